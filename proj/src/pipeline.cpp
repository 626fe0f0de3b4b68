#include "optable/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "optable/overlay.hpp"
#include "optable/parallel.hpp"
#include "optable/png_io.hpp"

namespace optable {

namespace {

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw ImageIoError(ImageIoError::Kind::write_failed, "cannot create directory " + dir.string());
    }
}

std::vector<std::string> manifest_ids(const DatasetManifest& manifest) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < manifest.size(); ++i) ids.push_back(manifest.row_id(i));
    return ids;
}

void require_masks(std::span<const ActionPair> dataset) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (!dataset[i].appeared_mask || !dataset[i].disappeared_mask) {
            throw InputError("pair " + std::to_string(i) + " lacks ground-truth masks");
        }
    }
}

std::vector<ActionPair> swapped(std::span<const ActionPair> dataset) {
    std::vector<ActionPair> out;
    out.reserve(dataset.size());
    for (const ActionPair& p : dataset) out.push_back(swap(p));
    return out;
}

// Config text without the run-environment keys, so the file does not depend
// on where or how wide the search ran.
std::string tuned_text(const RunConfig& config) {
    std::istringstream in(to_text(config));
    std::string text, line;
    while (std::getline(in, line)) {
        if (line.rfind("threads ", 0) == 0 || line.rfind("output_dir ", 0) == 0) continue;
        text += line + '\n';
    }
    return text;
}

void note_degraded(EvaluationReport& report, std::span<const DetectionResult> results) {
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].degraded) continue;
        std::string& note = report.rows[i].note;
        note += note.empty() ? "degraded-k" : ";degraded-k";
    }
}

}  // namespace

EvaluationReport score_maps(std::span<const std::string> ids, std::span<const ProbabilityMap> maps,
                            std::span<const BinaryMask> truths) {
    if (ids.size() != maps.size() || maps.size() != truths.size()) {
        throw std::invalid_argument("score_maps: ids, maps and truths differ in length");
    }
    EvaluationReport report;
    std::vector<AzScore> scored;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        ReportRow row{ids[i], std::nullopt, ""};
        try {
            row.az = roc_az(maps[i], truths[i]);
            scored.push_back(*row.az);
        } catch (const UndefinedScoreError&) {
            row.note = "single-class truth";
        }
        report.rows.push_back(std::move(row));
    }
    report.scored = scored.size();
    if (!scored.empty()) report.summary = aggregate_scores(scored);
    return report;
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError(ImageIoError::Kind::write_failed, "cannot write report " + path.string());
    out << "id,positives,negatives,az,std,note\n";
    std::size_t positives = 0;
    std::size_t negatives = 0;
    for (const ReportRow& row : report.rows) {
        out << row.id << ',';
        if (row.az) {
            positives += row.az->positives;
            negatives += row.az->negatives;
            out << row.az->positives << ',' << row.az->negatives << ',' << fixed6(row.az->value);
        } else {
            out << ",,";
        }
        out << ",," << row.note << '\n';
    }
    out << "aggregate," << positives << ',' << negatives << ',';
    if (report.scored > 0) out << fixed6(report.summary.mean) << ',' << fixed6(report.summary.stddev);
    else out << ',';
    out << ",n=" << report.scored << '\n';
    if (!out) throw ImageIoError(ImageIoError::Kind::write_failed, "failed writing report " + path.string());
}

DetectionResult detect_from_tiles(const TiledEntry& entry, const ReferenceBank& bank, const DetectParams& params) {
    if (entry.tiles.levels.size() != params.ladder.sizes.size()) {
        throw std::invalid_argument("detect_from_tiles: tiles do not match the ladder");
    }
    return coarse_to_fine(entry.width, entry.height, bank, params, [&](const PatchRect& rect, std::size_t level) {
        const int size = rect.size;
        const auto index = static_cast<std::size_t>((rect.y / size) * (entry.width / size) + rect.x / size);
        return entry.tiles.levels[level].at(index).features;
    });
}

std::vector<DetectionResult> loocv_from_tiles(std::span<const TiledEntry> entries, const DetectParams& params,
                                              int threads) {
    validate(params);
    if (entries.size() < 2) throw std::invalid_argument("leave-one-out needs at least 2 entries");
    std::vector<TileSet> sets;
    sets.reserve(entries.size());
    for (const TiledEntry& e : entries) sets.push_back(e.tiles);
    std::vector<DetectionResult> results(entries.size());
    parallel_for(entries.size(), threads, [&](std::size_t i) {
        const ReferenceBank bank = assemble_bank(sets, params, sets[i].source_id);
        results[i] = detect_from_tiles(entries[i], bank, params);
    });
    return results;
}

std::vector<TiledEntry> tile_static(std::span<const LabeledImage> dataset, const ScaleLadder& ladder, int threads) {
    std::vector<TiledEntry> out(dataset.size());
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        out[i] = TiledEntry{dataset[i].image.width(), dataset[i].image.height(),
                            extract_tiles(dataset[i], ladder, static_cast<int>(i))};
    });
    return out;
}

std::vector<TiledEntry> tile_changes(std::span<const ActionPair> dataset, const DynamicParams& params, int threads) {
    validate(params);
    std::vector<TiledEntry> out(dataset.size());
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        out[i] = TiledEntry{dataset[i].after.width(), dataset[i].after.height(),
                            extract_change_tiles(dataset[i], params, static_cast<int>(i))};
    });
    return out;
}

StaticLoocv static_loocv(std::span<const LabeledImage> dataset, std::span<const std::string> ids,
                         const DetectParams& params, int threads) {
    validate(params);
    const std::vector<TiledEntry> entries = tile_static(dataset, params.ladder, threads);
    StaticLoocv out;
    out.results = loocv_from_tiles(entries, params, threads);
    std::vector<ProbabilityMap> maps;
    std::vector<BinaryMask> truths;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        maps.push_back(out.results[i].map);
        truths.push_back(dataset[i].mask);
    }
    out.report = score_maps(ids, maps, truths);
    note_degraded(out.report, out.results);
    return out;
}

DynamicLoocv dynamic_loocv(std::span<const ActionPair> dataset, std::span<const std::string> ids,
                           const DynamicParams& params, int threads) {
    validate(params);
    require_masks(dataset);
    const std::vector<ActionPair> reversed = swapped(dataset);
    const auto appear_results = loocv_from_tiles(tile_changes(dataset, params, threads), params.base, threads);
    const auto vanish_results = loocv_from_tiles(tile_changes(reversed, params, threads), params.base, threads);

    DynamicLoocv out;
    std::vector<ProbabilityMap> appeared, disappeared;
    std::vector<BinaryMask> appeared_truth, disappeared_truth;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out.maps.push_back(ChangeMap{appear_results[i].map, vanish_results[i].map});
        appeared.push_back(appear_results[i].map);
        disappeared.push_back(vanish_results[i].map);
        appeared_truth.push_back(*dataset[i].appeared_mask);
        disappeared_truth.push_back(*dataset[i].disappeared_mask);
    }
    out.appeared = score_maps(ids, appeared, appeared_truth);
    out.disappeared = score_maps(ids, disappeared, disappeared_truth);
    note_degraded(out.appeared, appear_results);
    note_degraded(out.disappeared, vanish_results);
    return out;
}

EvaluationReport run_static_loocv(const DatasetManifest& manifest, const RunConfig& config) {
    validate(config);
    const auto dataset = load_static_dataset(manifest, config.downsample);
    const auto ids = manifest_ids(manifest);
    const StaticLoocv run = static_loocv(dataset, ids, config.detect_params(), config.threads);
    ensure_dir(config.output_dir / "maps");
    write_report_csv(config.output_dir / "static_report.csv", run.report);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        save_probability_map(config.output_dir / "maps" / (ids[i] + "_prob.png"), run.results[i].map);
    }
    return run.report;
}

DynamicLoocv run_dynamic_loocv(const DatasetManifest& manifest, const RunConfig& config) {
    validate(config);
    const auto dataset = load_dynamic_dataset(manifest, config.downsample);
    const auto ids = manifest_ids(manifest);
    DynamicLoocv run = dynamic_loocv(dataset, ids, config.dynamic_params(), config.threads);
    ensure_dir(config.output_dir / "maps");
    ensure_dir(config.output_dir / "overlays");
    write_report_csv(config.output_dir / "appeared_report.csv", run.appeared);
    write_report_csv(config.output_dir / "disappeared_report.csv", run.disappeared);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        save_probability_map(config.output_dir / "maps" / (ids[i] + "_appeared.png"), run.maps[i].appeared);
        save_probability_map(config.output_dir / "maps" / (ids[i] + "_disappeared.png"), run.maps[i].disappeared);
        save_image(config.output_dir / "overlays" / (ids[i] + "_overlay.png"),
                   render_overlay(dataset[i].before, dataset[i].after, run.maps[i], config.overlay_threshold));
    }
    return run;
}

OptimizeOutcome run_optimize(const DatasetManifest& manifest, const RunConfig& config, OptimizeMode mode) {
    validate(config);
    OptimizeOutcome outcome;
    RunConfig best = config;

    if (mode == OptimizeMode::dpso) {
        const auto dataset = load_static_dataset(manifest, config.downsample);
        if (dataset.size() < 2) throw InputError("optimization needs at least 2 images");
        int min_side = std::numeric_limits<int>::max();
        for (const auto& e : dataset) min_side = std::min({min_side, e.image.width(), e.image.height()});

        ParamSpace space;
        space.params = {ParamBound{"k", config.k_min, config.k_max, {}},
                        ParamBound{"tau", 0, 0, config.tau_values},
                        ParamBound{"p_min", config.p_min_min, config.p_min_max, {}},
                        ParamBound{"levels", config.levels_min, config.levels_max, {}}};
        space.valid = [min_side](const std::vector<int>& p) {
            long long coarsest = p[2];
            for (int i = 1; i < p[3]; ++i) {
                coarsest *= p[1];
                if (coarsest > min_side) return false;
            }
            return coarsest <= min_side;
        };

        // Tiles depend only on the ladder, so they are shared across k.
        std::mutex cache_mutex;
        std::map<std::tuple<int, int, int>, std::shared_ptr<const std::vector<TiledEntry>>> cache;
        const Objective objective = [&](const std::vector<int>& p) {
            DetectParams params = config.detect_params();
            params.k = p[0];
            params.ladder = make_ladder(p[2], p[1], p[3]);
            std::shared_ptr<const std::vector<TiledEntry>> entries;
            {
                std::lock_guard lock(cache_mutex);
                auto& slot = cache[{p[2], p[1], p[3]}];
                if (!slot) slot = std::make_shared<const std::vector<TiledEntry>>(tile_static(dataset, params.ladder, 1));
                entries = slot;
            }
            const auto results = loocv_from_tiles(*entries, params, 1);
            std::vector<AzScore> scores;
            for (std::size_t i = 0; i < results.size(); ++i) {
                try {
                    scores.push_back(roc_az(results[i].map, dataset[i].mask));
                } catch (const UndefinedScoreError&) {
                }
            }
            return scores.empty() ? 0.0 : aggregate_scores(scores).mean;
        };

        SwarmConfig swarm{config.swarm_size, config.iterations, config.inertia, config.c1, config.c2, config.seed,
                          config.threads};
        const OptimizeResult r = dpso_optimize(space, objective, swarm);
        outcome.names = space.names();
        outcome.best_params = r.best_params;
        outcome.best_score = r.best_score;
        outcome.trace = r.trace;
        best.k = r.best_params[0];
        best.tau = r.best_params[1];
        best.p_min = r.best_params[2];
        best.levels = r.best_params[3];
    } else {
        const auto dataset = load_dynamic_dataset(manifest, config.downsample);
        require_masks(dataset);
        const std::vector<ActionPair> reversed = swapped(dataset);
        const auto objective = [&](int w_size) {
            RunConfig c = config;
            c.w_size = w_size;
            const DynamicParams params = c.dynamic_params();
            const auto score = [&](std::span<const ActionPair> pairs, bool appeared) {
                const auto results = loocv_from_tiles(tile_changes(pairs, params, config.threads), params.base,
                                                      config.threads);
                std::vector<AzScore> scores;
                for (std::size_t i = 0; i < results.size(); ++i) {
                    const BinaryMask& truth = appeared ? *dataset[i].appeared_mask : *dataset[i].disappeared_mask;
                    try {
                        scores.push_back(roc_az(results[i].map, truth));
                    } catch (const UndefinedScoreError&) {
                    }
                }
                return scores.empty() ? 0.0 : aggregate_scores(scores).mean;
            };
            return 0.5 * (score(dataset, true) + score(reversed, false));
        };
        const GridResult r = random_grid_search(config.wsize_candidates, objective, config.wsize_draws, config.seed);
        outcome.names = {"w_size"};
        // Running best in draw order, same tie rule as the search itself.
        bool first = true;
        int best_value = 0;
        double best_score = 0.0;
        for (std::size_t i = 0; i < r.evaluated.size(); ++i) {
            const auto [value, score] = r.evaluated[i];
            if (first || score > best_score || (score == best_score && value < best_value)) {
                best_value = value;
                best_score = score;
                first = false;
            }
            outcome.trace.push_back(TraceEntry{static_cast<int>(i), best_score, {best_value}});
        }
        outcome.best_params = {r.best_value};
        outcome.best_score = r.best_score;
        best.w_size = r.best_value;
    }

    ensure_dir(config.output_dir);
    write_trace_csv(config.output_dir / "trace.csv", outcome.names, outcome.trace);
    std::ofstream out(config.output_dir / "best_config.txt", std::ios::binary);
    out << "# best score " << fixed6(outcome.best_score) << '\n' << tuned_text(best);
    if (!out) throw ImageIoError(ImageIoError::Kind::write_failed, "cannot write best_config.txt");
    return outcome;
}

DetectionResult run_segment(const DatasetManifest& train, const RunConfig& config, const std::filesystem::path& image,
                            const std::filesystem::path& out_map) {
    validate(config);
    const auto dataset = load_static_dataset(train, config.downsample);
    RasterImage img = load_image(image);
    if (config.downsample) img = downsample2(img);
    const DetectParams params = config.detect_params();
    const std::vector<TiledEntry> entries = tile_static(dataset, params.ladder, config.threads);
    std::vector<TileSet> sets;
    for (const auto& e : entries) sets.push_back(e.tiles);
    const ReferenceBank bank = assemble_bank(sets, params, -1);
    DetectionResult result = segment(img, bank, params);
    if (out_map.has_parent_path()) ensure_dir(out_map.parent_path());
    save_probability_map(out_map, result.map);
    return result;
}

ChangeMap run_detect(const DatasetManifest& train, const RunConfig& config, const std::filesystem::path& before,
                     const std::filesystem::path& after, const std::string& stem) {
    validate(config);
    const auto dataset = load_dynamic_dataset(train, config.downsample);
    require_masks(dataset);
    ActionPair pair{load_image(before), load_image(after), {}, {}};
    if (!pair.before.same_shape(pair.after)) throw InputError("before and after frames differ in size");
    if (config.downsample) {
        pair.before = downsample2(pair.before);
        pair.after = downsample2(pair.after);
    }
    const DynamicParams params = config.dynamic_params();
    const std::vector<ActionPair> reversed = swapped(dataset);
    auto bank_of = [&](std::span<const ActionPair> pairs) {
        std::vector<TileSet> sets;
        for (const auto& e : tile_changes(pairs, params, config.threads)) sets.push_back(e.tiles);
        return assemble_bank(sets, params.base, -1);
    };
    const ChangeMap changes = detect_changes(pair, bank_of(dataset), bank_of(reversed), params);
    ensure_dir(config.output_dir);
    save_probability_map(config.output_dir / (stem + "_appeared.png"), changes.appeared);
    save_probability_map(config.output_dir / (stem + "_disappeared.png"), changes.disappeared);
    save_image(config.output_dir / (stem + "_overlay.png"),
               render_overlay(pair.before, pair.after, changes, config.overlay_threshold));
    return changes;
}

}  // namespace optable
