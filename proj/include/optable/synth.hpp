#pragma once

#include <cstdint>
#include <filesystem>

#include "optable/dataset.hpp"
#include "optable/dynamic_detect.hpp"
#include "optable/static_detect.hpp"

namespace optable {

/// Procedural operating-table scenes: a green cloth with fold shading and
/// noise, towel-like beige regions that are not annotated, and convex
/// instrument shapes (metallic or colored) that are.
struct SynthOptions {
    int width{640};
    int height{480};
    int min_instruments{3};
    int max_instruments{8};
    int max_towels{2};
    /// Jitter bound, in pixels, for instruments that stay on the table.
    int jitter{15};
};

LabeledImage render_static_scene(std::uint64_t seed, const SynthOptions& options = {});

/// added/removed in [0,2]; pass -1 to draw them (never both zero).
ActionPair render_action_pair(std::uint64_t seed, const SynthOptions& options = {}, int added = -1, int removed = -1);

/// Writes n scenes (static) or n pairs (dynamic) plus manifest.csv into
/// out_dir. Deterministic per seed.
DatasetManifest generate_synthetic_dataset(DatasetKind kind, int n, std::uint64_t seed,
                                           const std::filesystem::path& out_dir, const SynthOptions& options = {});

}  // namespace optable
