#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "optable/features.hpp"
#include "optable/imaging.hpp"
#include "optable/knn.hpp"

namespace optable {

/// Geometric ladder of patch sides, finest first: p_min * tau^i.
struct ScaleLadder {
    int p_min{5};
    int tau{4};
    int levels{3};
    std::vector<int> sizes;

    int finest() const { return sizes.front(); }
    int coarsest() const { return sizes.back(); }
};

/// Throws std::invalid_argument for p_min < 1, tau < 2, levels < 1, and
/// std::overflow_error when a size does not fit in an int.
std::vector<int> scale_sizes(int p_min, int tau, int levels);
ScaleLadder make_ladder(int p_min, int tau, int levels);

struct DetectParams {
    int k{89};
    ScaleLadder ladder{make_ladder(5, 4, 3)};
    /// A patch is subdivided when its probability is strictly greater than
    /// this. Any negative value forces subdivision everywhere.
    double subdivide_threshold{0.0};
    IndexParams index{};
    std::uint64_t seed{0};
};

void validate(const DetectParams& params);

/// Fraction of set mask pixels inside the rectangle.
double patch_label(const BinaryMask& mask, const PatchRect& rect);

struct LabeledImage {
    RasterImage image;
    BinaryMask mask;
};

/// Bank points of one dataset entry, one list per ladder size.
struct TileSet {
    int source_id{-1};
    std::vector<std::vector<LabeledPoint>> levels;
};

/// Non-overlapping tiling from the origin at every ladder size; partial
/// trailing tiles are dropped.
TileSet extract_tiles(const LabeledImage& entry, const ScaleLadder& ladder, int source_id);

class ReferenceBank {
public:
    ReferenceBank(std::vector<int> sizes, std::vector<KnnIndex> indices, int excluded);

    const std::vector<int>& sizes() const { return sizes_; }
    const KnnIndex& level(std::size_t i) const { return indices_[i]; }
    std::size_t level_count() const { return indices_.size(); }
    int excluded() const { return excluded_; }

private:
    std::vector<int> sizes_;
    std::vector<KnnIndex> indices_;
    int excluded_;
};

/// Builds one index per ladder size from every tile set except `exclude`
/// (pass -1 to keep all). Index seeds derive from params.seed and the level.
ReferenceBank assemble_bank(std::span<const TileSet> tiles, const DetectParams& params, int exclude);

ReferenceBank build_reference_bank(std::span<const LabeledImage> dataset, const DetectParams& params, int exclude);

struct DetectionResult {
    ProbabilityMap map;
    /// k-NN queries issued per ladder level, finest first.
    std::vector<std::size_t> queries_per_level;
    /// Set when some level held fewer than k points.
    bool degraded{false};
};

/// Produces the query vector for a patch at a ladder level.
using PatchQuery = std::function<FeatureVector(const PatchRect& rect, std::size_t level)>;

/// Shared coarse-to-fine driver: tiles the coarsest level, regresses each
/// patch, and recurses into tau x tau children while the probability
/// exceeds the threshold and a finer level exists.
DetectionResult coarse_to_fine(int width, int height, const ReferenceBank& bank, const DetectParams& params,
                               const PatchQuery& query);

DetectionResult segment(const RasterImage& img, const ReferenceBank& bank, const DetectParams& params);

}  // namespace optable
