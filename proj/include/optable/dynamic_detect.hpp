#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "optable/features.hpp"
#include "optable/static_detect.hpp"

namespace optable {

/// Frames around one table action. appeared_mask annotates 'after',
/// disappeared_mask annotates 'before'.
struct ActionPair {
    RasterImage before;
    RasterImage after;
    std::optional<BinaryMask> appeared_mask;
    std::optional<BinaryMask> disappeared_mask;
};

/// Exchanges the frames and the two masks, turning disappearance into appearance.
ActionPair swap(const ActionPair& pair);

void validate(const ActionPair& pair);

struct DynamicParams {
    DetectParams base{};
    /// Side of the search window centered on the query patch; odd.
    int w_size{81};
    /// Search step at the finest level. Coarser levels step by max(1, size / 5).
    int stride{1};
};

void validate(const DynamicParams& params);
int search_stride(const DynamicParams& params, std::size_t level);

struct MatchResult {
    PatchRect rect{};
    int dx{0};
    int dy{0};
    double distance{0.0};
    Descriptor v2{};
};

/// Scans displacements (dx, dy) that are multiples of `stride` with
/// |dx|, |dy| <= (w_size - 1) / 2, skipping candidates that leave the
/// target image, and returns the one whose descriptor is closest to the
/// query patch. Ties go to the smaller displacement norm, then to the
/// lexicographically smaller (dy, dx).
MatchResult best_match(const IntegralStats& query_stats, const PatchRect& rect, const IntegralStats& target_stats,
                       int w_size, int stride);

/// Same search against a precomputed descriptor field of the target image.
MatchResult best_match(const Descriptor& query, const PatchRect& rect, const DescriptorField& target, int w_size,
                       int stride);

struct ChangeDescriptor {
    FeatureVector values{};
};

/// Componentwise v2 - v1.
ChangeDescriptor change_descriptor(const Descriptor& v1, const Descriptor& v2);

/// Everything needed to describe changes of 'after' patches against 'before'.
class ChangeContext {
public:
    ChangeContext(const RasterImage& before, const RasterImage& after, const DynamicParams& params);

    /// Change descriptor of the 'after' patch at `rect`, matched into 'before'.
    ChangeDescriptor describe(const PatchRect& rect, std::size_t level) const;
    MatchResult match(const PatchRect& rect, std::size_t level) const;

    int width() const { return after_.width(); }
    int height() const { return after_.height(); }

private:
    DynamicParams params_;
    IntegralStats after_;
    std::vector<DescriptorField> before_fields_;  // one per ladder level
};

/// Change tiles of one pair, labeled from its appeared mask.
TileSet extract_change_tiles(const ActionPair& pair, const DynamicParams& params, int pair_id);

ReferenceBank build_change_bank(std::span<const ActionPair> dataset, const DynamicParams& params, int exclude);

DetectionResult detect_appearance(const ActionPair& pair, const ReferenceBank& bank, const DynamicParams& params);

/// detect_appearance on the swapped pair; the bank must come from swapped
/// reference pairs (disappeared masks as labels).
DetectionResult detect_disappearance(const ActionPair& pair, const ReferenceBank& bank, const DynamicParams& params);

struct ChangeMap {
    ProbabilityMap appeared;     // on 'after'
    ProbabilityMap disappeared;  // on 'before'
};

ChangeMap detect_changes(const ActionPair& pair, const ReferenceBank& appearance_bank,
                         const ReferenceBank& disappearance_bank, const DynamicParams& params);

}  // namespace optable
