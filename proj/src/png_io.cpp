#include "objprop/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace objprop {

namespace {

struct FileCloser
{
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode)
{
    File f(std::fopen(path.c_str(), mode));
    if (!f)
        throw std::runtime_error("cannot open " + path.string());
    return f;
}

[[noreturn]] void fail(const std::filesystem::path& path, const char* what)
{
    throw std::runtime_error(std::string(what) + ": " + path.string());
}


struct Decoded
{
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<unsigned char> bytes;
};

Decoded decode(const std::filesystem::path& path, bool want_gray16)
{
    File file = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        fail(path, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        fail(path, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    Decoded out;
    std::vector<png_bytep> rows;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        fail(path, "corrupt PNG");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (want_gray16) {
        if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
            png_destroy_read_struct(&png, &info, nullptr);
            fail(path, "expected a 16-bit grayscale PNG");
        }
        png_set_swap(png);  // PNG stores big-endian samples
    } else {
        if (color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (bit_depth == 16)
            png_set_strip_16(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (color_type & PNG_COLOR_MASK_ALPHA)
            png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.bytes.resize(stride * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int r = 0; r < out.height; ++r)
        rows[static_cast<std::size_t>(r)] = out.bytes.data() + stride * static_cast<std::size_t>(r);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
            const std::vector<png_bytep>& rows)
{
    File file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        fail(path, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        fail(path, "PNG write failed");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16)
        png_set_swap(png);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0)
        fail(path, "PNG write failed");
}

}  // namespace

Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path)
{
    const Decoded d = decode(path, true);
    Image<std::uint16_t> out(d.width, d.height);
    const auto* samples = reinterpret_cast<const std::uint16_t*>(d.bytes.data());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = samples[i];
    return out;
}

Image<Rgb8> read_png_rgb8(const std::filesystem::path& path)
{
    const Decoded d = decode(path, false);
    Image<Rgb8> out(d.width, d.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = {d.bytes[3 * i], d.bytes[3 * i + 1], d.bytes[3 * i + 2]};
    return out;
}

void write_png_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& image)
{
    std::vector<std::uint16_t> copy(image.pixels().begin(), image.pixels().end());
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    for (int r = 0; r < image.height(); ++r)
        rows[static_cast<std::size_t>(r)] =
            reinterpret_cast<png_bytep>(copy.data() + static_cast<std::size_t>(r) * image.width());
    encode(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 16, rows);
}

void write_png_rgb8(const std::filesystem::path& path, const Image<Rgb8>& image)
{
    std::vector<unsigned char> bytes(image.size() * 3);
    for (std::size_t i = 0; i < image.size(); ++i)
        for (int c = 0; c < 3; ++c)
            bytes[3 * i + static_cast<std::size_t>(c)] = image[i][static_cast<std::size_t>(c)];
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    for (int r = 0; r < image.height(); ++r)
        rows[static_cast<std::size_t>(r)] = bytes.data() + static_cast<std::size_t>(r) * image.width() * 3;
    encode(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, rows);
}

}  // namespace objprop
