#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "optable/imaging.hpp"

namespace optable {

/// Plane order of the channel stack; the descriptor layout follows it.
enum class Plane : int { red = 0, green, blue, hue, saturation, value, sobel };

inline constexpr int kPlaneCount = 7;
inline constexpr int kDescriptorSize = 2 * kPlaneCount;

/// Plane values are stored on a 1/65535 grid. 8-bit channels land on it
/// exactly (c/255 == c*257/65535), and integer integral tables then give
/// exact patch sums.
inline constexpr int kPlaneQuantum = 65535;

using FeatureVector = std::array<double, kDescriptorSize>;

struct ChannelStack {
    int width{0};
    int height{0};
    std::array<GrayImage, kPlaneCount> planes;

    const GrayImage& plane(Plane p) const { return planes[static_cast<int>(p)]; }
};

ChannelStack build_channel_stack(const RasterImage& img);

struct PatchRect {
    int x{0};
    int y{0};
    int size{1};

    friend bool operator==(const PatchRect&, const PatchRect&) = default;
};

bool rect_inside(const PatchRect& rect, int width, int height);

/// [mean, std] per plane, in plane order.
struct Descriptor {
    FeatureVector values{};

    double mean(Plane p) const { return values[2 * static_cast<int>(p)]; }
    double stddev(Plane p) const { return values[2 * static_cast<int>(p) + 1]; }
};

/// Per-plane summed-area tables of x and x^2 over the quantized planes.
/// Tables are (width+1) x (height+1), interleaved per cell.
class IntegralStats {
public:
    explicit IntegralStats(const ChannelStack& stack);

    int width() const { return width_; }
    int height() const { return height_; }

    bool contains(const PatchRect& rect) const { return rect_inside(rect, width_, height_); }

    /// Sum of plane values over the rectangle, in plane units.
    double sum(Plane p, const PatchRect& rect) const;
    double sum_squares(Plane p, const PatchRect& rect) const;

    /// Raw table entry (quantized units) at corner (x, y), x in [0,width], y in [0,height].
    std::int64_t table_sum(Plane p, int x, int y) const { return table_[cell(x, y) + 2 * static_cast<int>(p)]; }
    std::int64_t table_sum_squares(Plane p, int x, int y) const {
        return table_[cell(x, y) + 2 * static_cast<int>(p) + 1];
    }

    /// Writes the 14 descriptor values of `rect` without bounds checks.
    void descriptor_unchecked(const PatchRect& rect, double* out) const;

private:
    std::size_t cell(int x, int y) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_ + 1) + static_cast<std::size_t>(x)) *
               kDescriptorSize;
    }

    int width_;
    int height_;
    std::vector<std::int64_t> table_;
};

/// Throws std::out_of_range when the rectangle leaves the image.
Descriptor patch_descriptor(const IntegralStats& stats, const PatchRect& rect);

double squared_distance(const FeatureVector& a, const FeatureVector& b);
double descriptor_distance(const Descriptor& a, const Descriptor& b);

/// Descriptors of every size x size patch position, indexed by top-left corner.
class DescriptorField {
public:
    DescriptorField(const IntegralStats& stats, int size);

    int patch_size() const { return size_; }
    int columns() const { return columns_; }
    int rows() const { return rows_; }

    const double* at(int x, int y) const {
        return values_.data() +
               (static_cast<std::size_t>(y) * static_cast<std::size_t>(columns_) + static_cast<std::size_t>(x)) *
                   kDescriptorSize;
    }

    Descriptor descriptor(int x, int y) const;

private:
    int size_;
    int columns_;
    int rows_;
    std::vector<double> values_;
};

}  // namespace optable
