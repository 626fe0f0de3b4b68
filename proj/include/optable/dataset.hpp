#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "optable/dynamic_detect.hpp"
#include "optable/knn.hpp"
#include "optable/static_detect.hpp"

namespace optable {

/// Bad manifest, config or CLI input, detected before any heavy work.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DatasetKind { static_images, dynamic_pairs };

struct StaticRow {
    std::filesystem::path image;
    std::filesystem::path mask;
};

/// Mask paths may be empty when no ground truth exists.
struct DynamicRow {
    std::filesystem::path before;
    std::filesystem::path after;
    std::filesystem::path appeared_mask;
    std::filesystem::path disappeared_mask;
};

/// CSV manifest. Static header: `image,mask`. Dynamic header:
/// `before,after,appeared_mask,disappeared_mask`. Relative paths resolve
/// against base_dir (the manifest's directory).
struct DatasetManifest {
    DatasetKind kind{DatasetKind::static_images};
    std::filesystem::path base_dir;
    std::vector<StaticRow> static_rows;
    std::vector<DynamicRow> dynamic_rows;

    std::size_t size() const {
        return kind == DatasetKind::static_images ? static_rows.size() : dynamic_rows.size();
    }
    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.empty() || p.is_absolute() ? p : base_dir / p;
    }
    /// Row identifier used in reports: file stem of the image / 'after' frame.
    std::string row_id(std::size_t i) const;
};

/// Checks that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Every tunable of a run. Text form: one `key = value` per line, `#`
/// comments; unknown keys are rejected.
struct RunConfig {
    int k{89};
    int tau{4};
    int p_min{5};
    int levels{3};
    double subdivide_threshold{0.0};
    int w_size{81};
    int stride{1};
    std::uint64_t seed{0};
    bool downsample{true};
    int threads{1};
    std::filesystem::path output_dir{"out"};

    SearchMode knn_mode{SearchMode::approximate};
    int knn_trees{4};
    int knn_leaf_size{16};
    int knn_checks{4096};

    double overlay_threshold{0.5};

    int swarm_size{20};
    int iterations{30};
    double inertia{0.7};
    double c1{1.5};
    double c2{1.5};
    int k_min{1};
    int k_max{200};
    std::vector<int> tau_values{2, 3, 4, 5};
    int p_min_min{3};
    int p_min_max{20};
    int levels_min{1};
    int levels_max{4};
    std::vector<int> wsize_candidates{21, 41, 61, 81, 101};
    int wsize_draws{5};

    DetectParams detect_params() const;
    DynamicParams dynamic_params() const;
};

/// Applies one `key = value` assignment; throws InputError on unknown keys
/// or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
RunConfig load_config(const std::filesystem::path& path);
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);
void validate(const RunConfig& config);
/// Canonical text form; load_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

/// Loads images and masks, applying downsample2 when requested.
std::vector<LabeledImage> load_static_dataset(const DatasetManifest& manifest, bool downsample);
std::vector<ActionPair> load_dynamic_dataset(const DatasetManifest& manifest, bool downsample);

}  // namespace optable
