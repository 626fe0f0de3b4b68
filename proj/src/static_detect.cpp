#include "optable/static_detect.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace optable {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void fill_rect(ProbabilityMap& map, const PatchRect& rect, double value) {
    for (int y = rect.y; y < rect.y + rect.size; ++y) {
        for (int x = rect.x; x < rect.x + rect.size; ++x) map.at(x, y) = value;
    }
}

}  // namespace

std::vector<int> scale_sizes(int p_min, int tau, int levels) {
    if (p_min < 1) throw std::invalid_argument("scale ladder: p_min must be >= 1");
    if (tau < 2) throw std::invalid_argument("scale ladder: tau must be >= 2");
    if (levels < 1) throw std::invalid_argument("scale ladder: levels must be >= 1");
    std::vector<int> sizes;
    sizes.reserve(static_cast<std::size_t>(levels));
    long long size = p_min;
    for (int i = 0; i < levels; ++i) {
        if (size > std::numeric_limits<int>::max()) throw std::overflow_error("scale ladder: patch size overflows");
        sizes.push_back(static_cast<int>(size));
        size *= tau;
    }
    return sizes;
}

ScaleLadder make_ladder(int p_min, int tau, int levels) {
    return ScaleLadder{p_min, tau, levels, scale_sizes(p_min, tau, levels)};
}

void validate(const DetectParams& params) {
    if (params.k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(params.subdivide_threshold < 1.0)) throw std::invalid_argument("subdivide_threshold must be < 1");
    if (params.ladder.sizes != scale_sizes(params.ladder.p_min, params.ladder.tau, params.ladder.levels)) {
        throw std::invalid_argument("scale ladder sizes inconsistent with p_min/tau/levels");
    }
}

double patch_label(const BinaryMask& mask, const PatchRect& rect) {
    if (!rect_inside(rect, mask.width(), mask.height())) {
        throw std::out_of_range("patch_label: rect outside mask");
    }
    int set = 0;
    for (int y = rect.y; y < rect.y + rect.size; ++y) {
        for (int x = rect.x; x < rect.x + rect.size; ++x) set += mask.at(x, y) != 0;
    }
    return static_cast<double>(set) / (static_cast<double>(rect.size) * rect.size);
}

TileSet extract_tiles(const LabeledImage& entry, const ScaleLadder& ladder, int source_id) {
    const RasterImage& img = entry.image;
    if (!entry.mask.same_shape(img)) {
        throw std::invalid_argument("extract_tiles: mask dimensions differ from image (entry " +
                                    std::to_string(source_id) + ")");
    }
    if (img.width() < ladder.coarsest() || img.height() < ladder.coarsest()) {
        throw std::invalid_argument("extract_tiles: image " + std::to_string(source_id) +
                                    " smaller than coarsest patch size " + std::to_string(ladder.coarsest()));
    }
    const IntegralStats stats(build_channel_stack(img));
    TileSet tiles;
    tiles.source_id = source_id;
    tiles.levels.resize(ladder.sizes.size());
    for (std::size_t level = 0; level < ladder.sizes.size(); ++level) {
        const int size = ladder.sizes[level];
        auto& points = tiles.levels[level];
        points.reserve(static_cast<std::size_t>((img.width() / size) * (img.height() / size)));
        for (int y = 0; y + size <= img.height(); y += size) {
            for (int x = 0; x + size <= img.width(); x += size) {
                const PatchRect rect{x, y, size};
                LabeledPoint p;
                stats.descriptor_unchecked(rect, p.features.data());
                p.label = patch_label(entry.mask, rect);
                p.source = Provenance{source_id, rect};
                points.push_back(p);
            }
        }
    }
    return tiles;
}

ReferenceBank::ReferenceBank(std::vector<int> sizes, std::vector<KnnIndex> indices, int excluded)
    : sizes_(std::move(sizes)), indices_(std::move(indices)), excluded_(excluded) {
    if (sizes_.size() != indices_.size()) throw std::invalid_argument("ReferenceBank: one index per size required");
}

ReferenceBank assemble_bank(std::span<const TileSet> tiles, const DetectParams& params, int exclude) {
    validate(params);
    const std::size_t levels = params.ladder.sizes.size();
    std::vector<KnnIndex> indices;
    indices.reserve(levels);
    for (std::size_t level = 0; level < levels; ++level) {
        std::vector<LabeledPoint> points;
        for (const TileSet& t : tiles) {
            if (t.levels.size() != levels) throw std::invalid_argument("tile set does not match the ladder");
            if (t.source_id == exclude) continue;
            points.insert(points.end(), t.levels[level].begin(), t.levels[level].end());
        }
        if (points.empty()) throw std::invalid_argument("reference bank has no points at patch size " +
                                                        std::to_string(params.ladder.sizes[level]));
        indices.push_back(build_index(std::move(points), params.index, mix_seed(params.seed, level)));
    }
    return ReferenceBank(params.ladder.sizes, std::move(indices), exclude);
}

ReferenceBank build_reference_bank(std::span<const LabeledImage> dataset, const DetectParams& params, int exclude) {
    validate(params);
    if (dataset.size() < 2) throw std::invalid_argument("reference bank needs at least 2 dataset entries");
    std::vector<TileSet> tiles;
    tiles.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        tiles.push_back(extract_tiles(dataset[i], params.ladder, static_cast<int>(i)));
    }
    return assemble_bank(tiles, params, exclude);
}

DetectionResult coarse_to_fine(int width, int height, const ReferenceBank& bank, const DetectParams& params,
                               const PatchQuery& query) {
    validate(params);
    if (bank.sizes() != params.ladder.sizes) throw std::invalid_argument("bank sizes do not match the ladder");
    const int coarsest = params.ladder.coarsest();
    if (width < coarsest || height < coarsest) {
        throw std::invalid_argument("image smaller than coarsest patch size " + std::to_string(coarsest));
    }
    DetectionResult result{ProbabilityMap(width, height, 0.0), std::vector<std::size_t>(bank.level_count(), 0), false};

    struct Pending {
        PatchRect rect;
        std::size_t level;
    };
    std::vector<Pending> stack;
    const std::size_t top = bank.level_count() - 1;
    for (int y = height / coarsest * coarsest - coarsest; y >= 0; y -= coarsest) {
        for (int x = width / coarsest * coarsest - coarsest; x >= 0; x -= coarsest) {
            stack.push_back({PatchRect{x, y, coarsest}, top});
        }
    }
    const int tau = params.ladder.tau;
    while (!stack.empty()) {
        const Pending job = stack.back();
        stack.pop_back();
        const KnnIndex& index = bank.level(job.level);
        const Regression r = query_regress(index, query(job.rect, job.level), params.k);
        ++result.queries_per_level[job.level];
        result.degraded = result.degraded || r.degraded;
        if (job.level > 0 && r.probability > params.subdivide_threshold) {
            const int child = bank.sizes()[job.level - 1];
            for (int cy = tau - 1; cy >= 0; --cy) {
                for (int cx = tau - 1; cx >= 0; --cx) {
                    stack.push_back({PatchRect{job.rect.x + cx * child, job.rect.y + cy * child, child}, job.level - 1});
                }
            }
        } else {
            fill_rect(result.map, job.rect, r.probability);
        }
    }
    return result;
}

DetectionResult segment(const RasterImage& img, const ReferenceBank& bank, const DetectParams& params) {
    const IntegralStats stats(build_channel_stack(img));
    return coarse_to_fine(img.width(), img.height(), bank, params,
                          [&](const PatchRect& rect, std::size_t) { return patch_descriptor(stats, rect).values; });
}

}  // namespace optable
