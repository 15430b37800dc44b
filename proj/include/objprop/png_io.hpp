#pragma once

#include "objprop/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>

namespace objprop {

using Rgb8 = std::array<std::uint8_t, 3>;

Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& image);

/// Reads 8-bit RGB; gray and RGBA inputs are converted.
Image<Rgb8> read_png_rgb8(const std::filesystem::path& path);
void write_png_rgb8(const std::filesystem::path& path, const Image<Rgb8>& image);

}  // namespace objprop
