#include "optable/overlay.hpp"

#include <stdexcept>

namespace optable {

namespace {

constexpr Rgb kGreen{0, 255, 0};
constexpr Rgb kRed{255, 0, 0};

std::uint8_t half(std::uint8_t a, std::uint8_t b) { return static_cast<std::uint8_t>((a + b + 1) / 2); }

Rgb blend(const Rgb& pixel, const Rgb& tint) {
    return Rgb{half(pixel.r, tint.r), half(pixel.g, tint.g), half(pixel.b, tint.b)};
}

}  // namespace

RasterImage render_overlay(const RasterImage& before, const RasterImage& after, const ChangeMap& changes,
                           double threshold) {
    const int w = after.width();
    const int h = after.height();
    if (!before.same_shape(after) || !changes.appeared.same_shape(w, h) || !changes.disappeared.same_shape(w, h)) {
        throw std::invalid_argument("render_overlay: dimension mismatch");
    }
    auto both = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= w || y >= h) return false;
        return changes.appeared.at(x, y) >= threshold && changes.disappeared.at(x, y) >= threshold;
    };
    RasterImage out = after;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool appeared = changes.appeared.at(x, y) >= threshold;
            const bool disappeared = changes.disappeared.at(x, y) >= threshold;
            if (appeared && disappeared) {
                const bool edge = !both(x - 1, y) || !both(x + 1, y) || !both(x, y - 1) || !both(x, y + 1);
                out.at(x, y) = edge ? kRed : kGreen;
            } else if (appeared) {
                out.at(x, y) = blend(after.at(x, y), kGreen);
            } else if (disappeared) {
                out.at(x, y) = blend(before.at(x, y), kRed);
            }
        }
    }
    return out;
}

}  // namespace optable
