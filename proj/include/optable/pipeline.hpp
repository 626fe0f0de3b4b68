#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "optable/dataset.hpp"
#include "optable/dynamic_detect.hpp"
#include "optable/eval.hpp"
#include "optable/optimize.hpp"
#include "optable/static_detect.hpp"

namespace optable {

struct ReportRow {
    std::string id;
    /// Empty when the ground truth holds a single class.
    std::optional<AzScore> az;
    std::string note;
};

struct EvaluationReport {
    std::vector<ReportRow> rows;
    ScoreSummary summary{};
    std::size_t scored{0};
};

/// Scores each map against its truth; degenerate truths become unscored rows.
EvaluationReport score_maps(std::span<const std::string> ids, std::span<const ProbabilityMap> maps,
                            std::span<const BinaryMask> truths);

/// Columns: id,positives,negatives,az,std,note; last row aggregates.
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);

/// Tiles of one dataset entry together with the entry's dimensions.
struct TiledEntry {
    int width{0};
    int height{0};
    TileSet tiles;
};

/// Runs coarse_to_fine on an entry whose tiles were already extracted with
/// the same ladder; queries read the stored tile descriptors.
DetectionResult detect_from_tiles(const TiledEntry& entry, const ReferenceBank& bank, const DetectParams& params);

/// Leave-one-out over pre-extracted entries: fold i builds its bank from
/// all other entries and detects on entry i. Folds may run concurrently.
std::vector<DetectionResult> loocv_from_tiles(std::span<const TiledEntry> entries, const DetectParams& params,
                                              int threads);

std::vector<TiledEntry> tile_static(std::span<const LabeledImage> dataset, const ScaleLadder& ladder, int threads);
/// Change tiles labeled by the appeared masks; pass swapped pairs for disappearance.
std::vector<TiledEntry> tile_changes(std::span<const ActionPair> dataset, const DynamicParams& params, int threads);

struct StaticLoocv {
    EvaluationReport report;
    std::vector<DetectionResult> results;
};

StaticLoocv static_loocv(std::span<const LabeledImage> dataset, std::span<const std::string> ids,
                         const DetectParams& params, int threads);

struct DynamicLoocv {
    EvaluationReport appeared;
    EvaluationReport disappeared;
    std::vector<ChangeMap> maps;
};

/// Every pair needs both masks.
DynamicLoocv dynamic_loocv(std::span<const ActionPair> dataset, std::span<const std::string> ids,
                           const DynamicParams& params, int threads);

// File-level runners shared by the CLI and the tests. Outputs go to
// config.output_dir.

/// Writes static_report.csv and maps/<id>_prob.png.
EvaluationReport run_static_loocv(const DatasetManifest& manifest, const RunConfig& config);

/// Writes appeared_report.csv, disappeared_report.csv, and per pair
/// maps/<id>_appeared.png, maps/<id>_disappeared.png, overlays/<id>_overlay.png.
DynamicLoocv run_dynamic_loocv(const DatasetManifest& manifest, const RunConfig& config);

enum class OptimizeMode { dpso, wsize_grid };

struct OptimizeOutcome {
    std::vector<std::string> names;
    std::vector<int> best_params;
    double best_score{0.0};
    std::vector<TraceEntry> trace;
};

/// dpso tunes (k, tau, p_min, levels) on static LOOCV Az; wsize_grid draws
/// window sizes on dynamic LOOCV Az. Writes trace.csv and best_config.txt.
OptimizeOutcome run_optimize(const DatasetManifest& manifest, const RunConfig& config, OptimizeMode mode);

/// Trains on a static manifest and segments one image; writes a 16-bit map.
DetectionResult run_segment(const DatasetManifest& train, const RunConfig& config,
                            const std::filesystem::path& image, const std::filesystem::path& out_map);

/// Trains on a dynamic manifest and detects changes in one pair; writes
/// both maps and the overlay into config.output_dir under `stem`.
ChangeMap run_detect(const DatasetManifest& train, const RunConfig& config, const std::filesystem::path& before,
                     const std::filesystem::path& after, const std::string& stem);

}  // namespace optable
