#include "optable/features.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace optable {

namespace {

__extension__ typedef __int128 wide_int;

double quantize(double v) {
    const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return std::nearbyint(clamped * kPlaneQuantum) / kPlaneQuantum;
}

std::int64_t to_units(double v) { return static_cast<std::int64_t>(std::llround(v * kPlaneQuantum)); }

}  // namespace

ChannelStack build_channel_stack(const RasterImage& img) {
    ChannelStack stack;
    stack.width = img.width();
    stack.height = img.height();
    for (auto& plane : stack.planes) plane = GrayImage(img.width(), img.height());

    auto src = img.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double r = src[i].r / 255.0;
        const double g = src[i].g / 255.0;
        const double b = src[i].b / 255.0;
        const Hsv hsv = rgb_to_hsv(r, g, b);
        stack.planes[0].values()[i] = quantize(r);
        stack.planes[1].values()[i] = quantize(g);
        stack.planes[2].values()[i] = quantize(b);
        stack.planes[3].values()[i] = quantize(hsv.h);
        stack.planes[4].values()[i] = quantize(hsv.s);
        stack.planes[5].values()[i] = quantize(hsv.v);
    }
    const GrayImage edges = sobel_magnitude(luminance(img));
    auto dst = stack.planes[6].values();
    auto e = edges.values();
    for (std::size_t i = 0; i < e.size(); ++i) dst[i] = quantize(e[i]);
    return stack;
}

bool rect_inside(const PatchRect& rect, int width, int height) {
    return rect.size >= 1 && rect.x >= 0 && rect.y >= 0 && rect.x <= width - rect.size &&
           rect.y <= height - rect.size;
}

IntegralStats::IntegralStats(const ChannelStack& stack)
    : width_(stack.width), height_(stack.height) {
    const std::size_t cells = static_cast<std::size_t>(width_ + 1) * static_cast<std::size_t>(height_ + 1);
    table_.assign(cells * kDescriptorSize, 0);
    std::array<std::int64_t, kDescriptorSize> row{};
    for (int y = 0; y < height_; ++y) {
        row.fill(0);
        for (int x = 0; x < width_; ++x) {
            const std::size_t above = cell(x + 1, y);
            const std::size_t here = cell(x + 1, y + 1);
            for (int p = 0; p < kPlaneCount; ++p) {
                const std::int64_t v = to_units(stack.planes[p].at(x, y));
                row[2 * p] += v;
                row[2 * p + 1] += v * v;
                table_[here + 2 * p] = table_[above + 2 * p] + row[2 * p];
                table_[here + 2 * p + 1] = table_[above + 2 * p + 1] + row[2 * p + 1];
            }
        }
    }
}

double IntegralStats::sum(Plane p, const PatchRect& rect) const {
    const int x1 = rect.x + rect.size;
    const int y1 = rect.y + rect.size;
    const std::int64_t s = table_sum(p, x1, y1) - table_sum(p, rect.x, y1) - table_sum(p, x1, rect.y) +
                           table_sum(p, rect.x, rect.y);
    return static_cast<double>(s) / kPlaneQuantum;
}

double IntegralStats::sum_squares(Plane p, const PatchRect& rect) const {
    const int x1 = rect.x + rect.size;
    const int y1 = rect.y + rect.size;
    const std::int64_t s = table_sum_squares(p, x1, y1) - table_sum_squares(p, rect.x, y1) -
                           table_sum_squares(p, x1, rect.y) + table_sum_squares(p, rect.x, rect.y);
    return static_cast<double>(s) / (static_cast<double>(kPlaneQuantum) * kPlaneQuantum);
}

void IntegralStats::descriptor_unchecked(const PatchRect& rect, double* out) const {
    const std::int64_t* a = table_.data() + cell(rect.x, rect.y);
    const std::int64_t* b = table_.data() + cell(rect.x + rect.size, rect.y);
    const std::int64_t* c = table_.data() + cell(rect.x, rect.y + rect.size);
    const std::int64_t* d = table_.data() + cell(rect.x + rect.size, rect.y + rect.size);
    const std::int64_t n = static_cast<std::int64_t>(rect.size) * rect.size;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int p = 0; p < kPlaneCount; ++p) {
        const std::int64_t s = d[2 * p] - b[2 * p] - c[2 * p] + a[2 * p];
        const std::int64_t q = d[2 * p + 1] - b[2 * p + 1] - c[2 * p + 1] + a[2 * p + 1];
        // n*q - s^2 is exact and non-negative for integer samples.
        const wide_int spread = static_cast<wide_int>(n) * q - static_cast<wide_int>(s) * s;
        const double variance = static_cast<double>(spread) * inv_n * inv_n;
        out[2 * p] = static_cast<double>(s) * inv_n / kPlaneQuantum;
        out[2 * p + 1] = std::sqrt(variance > 0.0 ? variance : 0.0) / kPlaneQuantum;
    }
}

Descriptor patch_descriptor(const IntegralStats& stats, const PatchRect& rect) {
    if (!stats.contains(rect)) {
        throw std::out_of_range("patch_descriptor: rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) +
                                ",size " + std::to_string(rect.size) + ") outside image");
    }
    Descriptor d;
    stats.descriptor_unchecked(rect, d.values.data());
    return d;
}

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
    double acc = 0.0;
    for (int i = 0; i < kDescriptorSize; ++i) {
        const double t = a[i] - b[i];
        acc += t * t;
    }
    return acc;
}

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
    return std::sqrt(squared_distance(a.values, b.values));
}

DescriptorField::DescriptorField(const IntegralStats& stats, int size)
    : size_(size), columns_(stats.width() - size + 1), rows_(stats.height() - size + 1) {
    if (size < 1 || columns_ < 1 || rows_ < 1) {
        throw std::invalid_argument("DescriptorField: patch size " + std::to_string(size) + " does not fit image");
    }
    values_.resize(static_cast<std::size_t>(columns_) * static_cast<std::size_t>(rows_) * kDescriptorSize);
    double* out = values_.data();
    for (int y = 0; y < rows_; ++y) {
        for (int x = 0; x < columns_; ++x, out += kDescriptorSize) {
            stats.descriptor_unchecked(PatchRect{x, y, size_}, out);
        }
    }
}

Descriptor DescriptorField::descriptor(int x, int y) const {
    Descriptor d;
    const double* src = at(x, y);
    for (int i = 0; i < kDescriptorSize; ++i) d.values[i] = src[i];
    return d;
}

}  // namespace optable
