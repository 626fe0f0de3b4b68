#include "optable/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace optable {

namespace {

std::uint8_t average_half_up(int a, int b, int c, int d) {
    // (sum + 2) / 4 is the half-up rounding of sum / 4 for non-negative sums.
    return static_cast<std::uint8_t>((a + b + c + d + 2) / 4);
}

void require_downsample_size(int w, int h) {
    if (w < 2 || h < 2) {
        throw std::invalid_argument("downsample2: image must be at least 2x2");
    }
}

}  // namespace

RasterImage downsample2(const RasterImage& img) {
    require_downsample_size(img.width(), img.height());
    const int ow = img.width() / 2;
    const int oh = img.height() / 2;
    RasterImage out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const Rgb& p00 = img.at(2 * x, 2 * y);
            const Rgb& p10 = img.at(2 * x + 1, 2 * y);
            const Rgb& p01 = img.at(2 * x, 2 * y + 1);
            const Rgb& p11 = img.at(2 * x + 1, 2 * y + 1);
            out.at(x, y) = Rgb{average_half_up(p00.r, p10.r, p01.r, p11.r),
                               average_half_up(p00.g, p10.g, p01.g, p11.g),
                               average_half_up(p00.b, p10.b, p01.b, p11.b)};
        }
    }
    return out;
}

BinaryMask downsample2(const BinaryMask& mask) {
    require_downsample_size(mask.width(), mask.height());
    const int ow = mask.width() / 2;
    const int oh = mask.height() / 2;
    BinaryMask out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const int set = (mask.at(2 * x, 2 * y) != 0) + (mask.at(2 * x + 1, 2 * y) != 0) +
                            (mask.at(2 * x, 2 * y + 1) != 0) + (mask.at(2 * x + 1, 2 * y + 1) != 0);
            const int avg = average_half_up(255 * set, 0, 0, 0);
            out.at(x, y) = avg >= 128 ? 1 : 0;
        }
    }
    return out;
}

Hsv rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    Hsv out;
    out.v = mx;
    out.s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) {
        out.h = 0.0;
        return out;
    }
    double sector;
    if (mx == r) {
        sector = (g - b) / delta;
        if (sector < 0.0) sector += 6.0;
    } else if (mx == g) {
        sector = (b - r) / delta + 2.0;
    } else {
        sector = (r - g) / delta + 4.0;
    }
    out.h = sector / 6.0;
    if (out.h >= 1.0) out.h = 0.0;
    return out;
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
    const double c = hsv.v * hsv.s;
    const double hp = std::fmod(hsv.h * 6.0, 6.0);
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    const double m = hsv.v - c;
    double r1 = 0.0, g1 = 0.0, b1 = 0.0;
    switch (static_cast<int>(hp)) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

GrayImage luminance(const RasterImage& img) {
    GrayImage out(img.width(), img.height());
    auto src = img.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double y = 0.299 * src[i].r + 0.587 * src[i].g + 0.114 * src[i].b;
        dst[i] = std::clamp(y / 255.0, 0.0, 1.0);
    }
    return out;
}

GrayImage sobel_magnitude(const GrayImage& g) {
    const int w = g.width();
    const int h = g.height();
    GrayImage out(w, h);
    const double scale = 1.0 / (4.0 * std::sqrt(2.0));
    auto px = [&](int x, int y) {
        return g.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                              (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                              (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            out.at(x, y) = std::min(1.0, std::sqrt(gx * gx + gy * gy) * scale);
        }
    }
    return out;
}

}  // namespace optable
