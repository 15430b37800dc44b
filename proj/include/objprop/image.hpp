#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace objprop {

// Row-major dense image. Pixel (u, v) is column u, row v.
template <typename T>
class Image
{
public:
    Image() = default;
    Image(int width, int height, const T& fill = T{})
        : width_(width), height_(height), data_(checked_size(width, height), fill)
    {
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }
    std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width_ + u; }

    T& operator()(int u, int v)
    {
        assert(contains(u, v));
        return data_[index(u, v)];
    }
    const T& operator()(int u, int v) const
    {
        assert(contains(u, v));
        return data_[index(u, v)];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> pixels() { return data_; }
    std::span<const T> pixels() const { return data_; }

    void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

    bool operator==(const Image&) const = default;

private:
    static std::size_t checked_size(int width, int height)
    {
        if (width < 0 || height < 0)
            throw std::invalid_argument("image dimensions must be non-negative");
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Color = Eigen::Vector3f;  // linear RGB in [0, 1]

using DepthImage = Image<float>;  // meters, 0 = missing
using ColorImage = Image<Color>;
using Heatmap2D = Image<double>;
using LabelImage = Image<int>;

}  // namespace objprop
