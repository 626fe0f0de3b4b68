#include "optable/dynamic_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

namespace optable {

namespace {

void require_window(int w_size, int stride) {
    if (w_size < 1 || w_size % 2 == 0) throw std::invalid_argument("w_size must be odd and >= 1");
    if (stride < 1) throw std::invalid_argument("search stride must be >= 1");
}

/// `descriptor_at(x, y)` returns a pointer to the 14 values of the target
/// patch with top-left (x, y).
template <typename DescriptorAt>
MatchResult scan_window(const double* query, const PatchRect& rect, int width, int height, int w_size, int stride,
                        DescriptorAt descriptor_at) {
    const int reach = (w_size - 1) / 2 / stride;
    double best_d2 = std::numeric_limits<double>::infinity();
    std::tuple<int, int, int> best_key{std::numeric_limits<int>::max(), 0, 0};
    int best_dx = 0;
    int best_dy = 0;
    for (int j = -reach; j <= reach; ++j) {
        const int dy = j * stride;
        const int y = rect.y + dy;
        if (y < 0 || y + rect.size > height) continue;
        for (int i = -reach; i <= reach; ++i) {
            const int dx = i * stride;
            const int x = rect.x + dx;
            if (x < 0 || x + rect.size > width) continue;
            const double* cand = descriptor_at(x, y);
            double d2 = 0.0;
            for (int c = 0; c < kDescriptorSize; ++c) {
                const double t = cand[c] - query[c];
                d2 += t * t;
            }
            if (d2 > best_d2) continue;
            const std::tuple<int, int, int> key{dx * dx + dy * dy, dy, dx};
            if (d2 < best_d2 || key < best_key) {
                best_d2 = d2;
                best_key = key;
                best_dx = dx;
                best_dy = dy;
            }
        }
    }
    MatchResult m;
    m.dx = best_dx;
    m.dy = best_dy;
    m.rect = PatchRect{rect.x + best_dx, rect.y + best_dy, rect.size};
    m.distance = std::sqrt(best_d2);
    const double* v2 = descriptor_at(m.rect.x, m.rect.y);
    std::copy(v2, v2 + kDescriptorSize, m.v2.values.begin());
    return m;
}

}  // namespace

ActionPair swap(const ActionPair& pair) {
    return ActionPair{pair.after, pair.before, pair.disappeared_mask, pair.appeared_mask};
}

void validate(const ActionPair& pair) {
    if (!pair.before.same_shape(pair.after)) throw std::invalid_argument("before/after dimensions differ");
    if (pair.appeared_mask && !pair.appeared_mask->same_shape(pair.after)) {
        throw std::invalid_argument("appeared mask dimensions differ from 'after'");
    }
    if (pair.disappeared_mask && !pair.disappeared_mask->same_shape(pair.before)) {
        throw std::invalid_argument("disappeared mask dimensions differ from 'before'");
    }
}

void validate(const DynamicParams& params) {
    validate(params.base);
    require_window(params.w_size, params.stride);
}

int search_stride(const DynamicParams& params, std::size_t level) {
    if (level == 0) return params.stride;
    return std::max(1, params.base.ladder.sizes[level] / 5);
}

MatchResult best_match(const IntegralStats& query_stats, const PatchRect& rect, const IntegralStats& target_stats,
                       int w_size, int stride) {
    require_window(w_size, stride);
    if (query_stats.width() != target_stats.width() || query_stats.height() != target_stats.height()) {
        throw std::invalid_argument("best_match: images differ in size");
    }
    const Descriptor v1 = patch_descriptor(query_stats, rect);
    Descriptor scratch;
    return scan_window(v1.values.data(), rect, target_stats.width(), target_stats.height(), w_size, stride,
                       [&](int x, int y) {
                           target_stats.descriptor_unchecked(PatchRect{x, y, rect.size}, scratch.values.data());
                           return static_cast<const double*>(scratch.values.data());
                       });
}

MatchResult best_match(const Descriptor& query, const PatchRect& rect, const DescriptorField& target, int w_size,
                       int stride) {
    require_window(w_size, stride);
    if (rect.size != target.patch_size()) throw std::invalid_argument("best_match: field patch size mismatch");
    const int width = target.columns() + rect.size - 1;
    const int height = target.rows() + rect.size - 1;
    if (!rect_inside(rect, width, height)) throw std::out_of_range("best_match: rect outside image");
    return scan_window(query.values.data(), rect, width, height, w_size, stride,
                       [&](int x, int y) { return target.at(x, y); });
}

ChangeDescriptor change_descriptor(const Descriptor& v1, const Descriptor& v2) {
    ChangeDescriptor c;
    for (int i = 0; i < kDescriptorSize; ++i) c.values[i] = v2.values[i] - v1.values[i];
    return c;
}

ChangeContext::ChangeContext(const RasterImage& before, const RasterImage& after, const DynamicParams& params)
    : params_(params), after_(build_channel_stack(after)) {
    validate(params);
    if (!before.same_shape(after)) throw std::invalid_argument("before/after dimensions differ");
    const IntegralStats before_stats(build_channel_stack(before));
    before_fields_.reserve(params.base.ladder.sizes.size());
    for (int size : params.base.ladder.sizes) before_fields_.emplace_back(before_stats, size);
}

MatchResult ChangeContext::match(const PatchRect& rect, std::size_t level) const {
    const Descriptor v1 = patch_descriptor(after_, rect);
    return best_match(v1, rect, before_fields_.at(level), params_.w_size, search_stride(params_, level));
}

ChangeDescriptor ChangeContext::describe(const PatchRect& rect, std::size_t level) const {
    const Descriptor v1 = patch_descriptor(after_, rect);
    const MatchResult m = best_match(v1, rect, before_fields_.at(level), params_.w_size, search_stride(params_, level));
    return change_descriptor(v1, m.v2);
}

TileSet extract_change_tiles(const ActionPair& pair, const DynamicParams& params, int pair_id) {
    validate(pair);
    if (!pair.appeared_mask) {
        throw std::invalid_argument("pair " + std::to_string(pair_id) + " has no appeared mask");
    }
    const ScaleLadder& ladder = params.base.ladder;
    if (pair.after.width() < ladder.coarsest() || pair.after.height() < ladder.coarsest()) {
        throw std::invalid_argument("pair " + std::to_string(pair_id) + " smaller than coarsest patch size");
    }
    const ChangeContext context(pair.before, pair.after, params);
    TileSet tiles;
    tiles.source_id = pair_id;
    tiles.levels.resize(ladder.sizes.size());
    for (std::size_t level = 0; level < ladder.sizes.size(); ++level) {
        const int size = ladder.sizes[level];
        auto& points = tiles.levels[level];
        for (int y = 0; y + size <= context.height(); y += size) {
            for (int x = 0; x + size <= context.width(); x += size) {
                const PatchRect rect{x, y, size};
                LabeledPoint p;
                p.features = context.describe(rect, level).values;
                p.label = patch_label(*pair.appeared_mask, rect);
                p.source = Provenance{pair_id, rect};
                points.push_back(p);
            }
        }
    }
    return tiles;
}

ReferenceBank build_change_bank(std::span<const ActionPair> dataset, const DynamicParams& params, int exclude) {
    validate(params);
    if (dataset.size() < 2) throw std::invalid_argument("change bank needs at least 2 pairs");
    std::vector<TileSet> tiles;
    tiles.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (static_cast<int>(i) == exclude) continue;
        tiles.push_back(extract_change_tiles(dataset[i], params, static_cast<int>(i)));
    }
    return assemble_bank(tiles, params.base, exclude);
}

DetectionResult detect_appearance(const ActionPair& pair, const ReferenceBank& bank, const DynamicParams& params) {
    validate(pair);
    const ChangeContext context(pair.before, pair.after, params);
    return coarse_to_fine(context.width(), context.height(), bank, params.base,
                          [&](const PatchRect& rect, std::size_t level) { return context.describe(rect, level).values; });
}

DetectionResult detect_disappearance(const ActionPair& pair, const ReferenceBank& bank, const DynamicParams& params) {
    return detect_appearance(swap(pair), bank, params);
}

ChangeMap detect_changes(const ActionPair& pair, const ReferenceBank& appearance_bank,
                         const ReferenceBank& disappearance_bank, const DynamicParams& params) {
    return ChangeMap{detect_appearance(pair, appearance_bank, params).map,
                     detect_disappearance(pair, disappearance_bank, params).map};
}

}  // namespace optable
