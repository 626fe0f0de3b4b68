#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace optable {

struct Rgb {
    std::uint8_t r{0};
    std::uint8_t g{0};
    std::uint8_t b{0};

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 2-D grid of values. The tag parameter keeps planes with the
/// same element type (gray levels, probabilities) from mixing silently.
template <typename T, typename Tag>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height) {
        check_dims(width, height);
        values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> values)
        : width_(width), height_(height), values_(std::move(values)) {
        check_dims(width, height);
        if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw std::invalid_argument("grid: value count does not match width*height");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return values_.empty(); }
    std::size_t size() const { return values_.size(); }

    T& at(int x, int y) { return values_[index(x, y)]; }
    const T& at(int x, int y) const { return values_[index(x, y)]; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    bool same_shape(int w, int h) const { return w == width_ && h == height_; }
    template <typename U, typename V>
    bool same_shape(const Grid<U, V>& other) const {
        return other.width() == width_ && other.height() == height_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static void check_dims(int width, int height) {
        if (width < 1 || height < 1) {
            throw std::invalid_argument("grid: dimensions must be at least 1x1");
        }
    }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_{0};
    int height_{0};
    std::vector<T> values_;
};

using RasterImage = Grid<Rgb, struct RasterTag>;
/// Real-valued plane, normalized to [0,1].
using GrayImage = Grid<double, struct GrayTag>;
/// Per-pixel labels in {0,1}.
using BinaryMask = Grid<std::uint8_t, struct MaskTag>;
/// Per-pixel probability in [0,1].
using ProbabilityMap = Grid<double, struct ProbabilityTag>;

struct Hsv {
    double h{0.0};
    double s{0.0};
    double v{0.0};
};

/// Factor-2 box downsampling; each output channel is the 2x2 block average
/// rounded half-up. A trailing odd row/column is dropped.
RasterImage downsample2(const RasterImage& img);

/// Mask counterpart of downsample2: the mask is treated as a 0/255 image,
/// box-averaged with the same rounding and thresholded at 128, which keeps a
/// pixel when at least two of its four sources are set.
BinaryMask downsample2(const BinaryMask& mask);

/// Hexcone HSV with hue scaled to [0,1]. Hue is 0 for achromatic input.
Hsv rgb_to_hsv(double r, double g, double b);
void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b);

/// Rec. 601 luma on [0,1]-normalized channels.
GrayImage luminance(const RasterImage& img);

/// 3x3 Sobel gradient magnitude, replicate border, scaled by 1/(4*sqrt(2))
/// so that the output stays in [0,1] for inputs in [0,1].
GrayImage sobel_magnitude(const GrayImage& g);

}  // namespace optable
