// optable: operating-table instrument segmentation and change detection.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "optable/dataset.hpp"
#include "optable/eval.hpp"
#include "optable/overlay.hpp"
#include "optable/pipeline.hpp"
#include "optable/png_io.hpp"
#include "optable/synth.hpp"

namespace {

using namespace optable;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;

    RunConfig resolve() const {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
        apply_overrides(config, overrides);
        if (!out_dir.empty()) config.output_dir = out_dir;
        validate(config);
        return config;
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_path, "key = value config file");
    cmd->add_option("--set", common.overrides, "override, key=value (repeatable)");
    cmd->add_option("--out-dir", common.out_dir, "output directory (overrides output_dir)");
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

int fail(const std::string& kind, const std::string& message) {
    std::cerr << "error: " << kind << ": " << one_line(message) << '\n';
    return kind == "usage" ? 2 : 1;
}

void print_report(const char* label, const EvaluationReport& report) {
    std::cout << label << " az mean/std: ";
    if (report.scored > 0) std::cout << format_summary(report.summary);
    else std::cout << "undefined";
    std::cout << " (n=" << report.scored << ")\n";
}

ProbabilityMap load_map_or_zero(const std::string& path, int w, int h) {
    if (path.empty()) return ProbabilityMap(w, h, 0.0);
    ProbabilityMap map = load_probability_map(path);
    if (!map.same_shape(w, h)) throw InputError("map " + path + " does not match the frame size");
    return map;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operating-table instrument segmentation and change detection"};
    app.require_subcommand(1);

    Common common;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_kind = "static";
    int synth_n = 12;
    SynthOptions synth_options;
    synth->add_option("--kind", synth_kind, "static or dynamic")->check(CLI::IsMember({"static", "dynamic"}));
    synth->add_option("--n", synth_n, "number of images or pairs");
    synth->add_option("--width", synth_options.width);
    synth->add_option("--height", synth_options.height);
    add_common(synth, common);

    auto* segment_cmd = app.add_subcommand("segment", "segment one image with a static training set");
    std::string train_path, image_path;
    segment_cmd->add_option("--train", train_path, "static manifest")->required();
    segment_cmd->add_option("--image", image_path, "image to segment")->required();
    add_common(segment_cmd, common);

    auto* detect_cmd = app.add_subcommand("detect", "detect changes in one pair with a dynamic training set");
    std::string before_path, after_path, stem;
    detect_cmd->add_option("--train", train_path, "dynamic manifest")->required();
    detect_cmd->add_option("--before", before_path)->required();
    detect_cmd->add_option("--after", after_path)->required();
    detect_cmd->add_option("--stem", stem, "output file prefix (default: stem of --after)");
    add_common(detect_cmd, common);

    std::string manifest_path;
    auto* loocv_static = app.add_subcommand("loocv-static", "leave-one-out evaluation of static segmentation");
    loocv_static->add_option("--manifest", manifest_path)->required();
    add_common(loocv_static, common);

    auto* loocv_dynamic = app.add_subcommand("loocv-dynamic", "leave-one-out evaluation of change detection");
    loocv_dynamic->add_option("--manifest", manifest_path)->required();
    add_common(loocv_dynamic, common);

    auto* optimize_cmd = app.add_subcommand("optimize", "hyperparameter search");
    std::string mode = "dpso";
    optimize_cmd->add_option("--manifest", manifest_path)->required();
    optimize_cmd->add_option("--mode", mode, "dpso or wsize-grid")->check(CLI::IsMember({"dpso", "wsize-grid"}));
    add_common(optimize_cmd, common);

    auto* render_cmd = app.add_subcommand("render", "draw a change overlay from saved maps");
    std::string appeared_path, disappeared_path;
    render_cmd->add_option("--before", before_path)->required();
    render_cmd->add_option("--after", after_path)->required();
    render_cmd->add_option("--appeared", appeared_path, "16-bit appeared map");
    render_cmd->add_option("--disappeared", disappeared_path, "16-bit disappeared map");
    render_cmd->add_option("--stem", stem, "output file prefix (default: overlay)");
    add_common(render_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        const RunConfig config = common.resolve();
        if (synth->parsed()) {
            const DatasetKind kind = synth_kind == "static" ? DatasetKind::static_images : DatasetKind::dynamic_pairs;
            if (synth_n < 2) throw InputError("synth: --n must be >= 2");
            const DatasetManifest m =
                generate_synthetic_dataset(kind, synth_n, config.seed, config.output_dir, synth_options);
            std::cout << "wrote " << m.size() << " rows to " << (config.output_dir / "manifest.csv").string() << '\n';
        } else if (segment_cmd->parsed()) {
            const DatasetManifest train = load_manifest(train_path);
            const std::filesystem::path out =
                config.output_dir / (std::filesystem::path(image_path).stem().string() + "_prob.png");
            const DetectionResult r = run_segment(train, config, image_path, out);
            std::cout << "wrote " << out.string() << (r.degraded ? " (degraded k)" : "") << '\n';
        } else if (detect_cmd->parsed()) {
            const DatasetManifest train = load_manifest(train_path);
            if (stem.empty()) stem = std::filesystem::path(after_path).stem().string();
            run_detect(train, config, before_path, after_path, stem);
            std::cout << "wrote " << stem << "_{appeared,disappeared,overlay}.png to " << config.output_dir.string()
                      << '\n';
        } else if (loocv_static->parsed()) {
            const DatasetManifest m = load_manifest(manifest_path);
            print_report("static", run_static_loocv(m, config));
        } else if (loocv_dynamic->parsed()) {
            const DatasetManifest m = load_manifest(manifest_path);
            const DynamicLoocv r = run_dynamic_loocv(m, config);
            print_report("appeared", r.appeared);
            print_report("disappeared", r.disappeared);
        } else if (optimize_cmd->parsed()) {
            const DatasetManifest m = load_manifest(manifest_path);
            const OptimizeOutcome r =
                run_optimize(m, config, mode == "dpso" ? OptimizeMode::dpso : OptimizeMode::wsize_grid);
            std::cout << "best score " << r.best_score << " at";
            for (std::size_t i = 0; i < r.names.size(); ++i) std::cout << ' ' << r.names[i] << '=' << r.best_params[i];
            std::cout << '\n';
        } else if (render_cmd->parsed()) {
            // Maps are stored at working resolution, so the frames follow the same setting.
            RasterImage before = load_image(before_path);
            RasterImage after = load_image(after_path);
            if (config.downsample) {
                before = downsample2(before);
                after = downsample2(after);
            }
            if (!before.same_shape(after)) throw InputError("before and after frames differ in size");
            const ChangeMap changes{load_map_or_zero(appeared_path, after.width(), after.height()),
                                    load_map_or_zero(disappeared_path, after.width(), after.height())};
            if (stem.empty()) stem = "overlay";
            std::filesystem::create_directories(config.output_dir);
            const std::filesystem::path out = config.output_dir / (stem + ".png");
            save_image(out, render_overlay(before, after, changes, config.overlay_threshold));
            std::cout << "wrote " << out.string() << '\n';
        }
    } catch (const InputError& e) {
        return fail("input", e.what());
    } catch (const ImageIoError& e) {
        return fail(to_string(e.kind()), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("filesystem", e.what());
    } catch (const std::invalid_argument& e) {
        return fail("invalid_argument", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
