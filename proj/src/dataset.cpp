#include "optable/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "optable/png_io.hpp"

namespace optable {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw InputError("config: " + key + " expects an integer, got '" + value + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw InputError("config: " + key + " expects an unsigned integer, got '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(out)) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw InputError("config: " + key + " expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw InputError("config: " + key + " expects on/off, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const std::string& item : split(value, ';')) {
        if (!item.empty()) out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw InputError("config: " + key + " expects a ';'-separated integer list");
    return out;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(values[i]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_file(const std::filesystem::path& p, std::size_t row) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) {
        throw InputError("manifest row " + std::to_string(row + 1) + ": missing file " + p.string());
    }
}

}  // namespace

std::string DatasetManifest::row_id(std::size_t i) const {
    const auto& p = kind == DatasetKind::static_images ? static_rows.at(i).image : dynamic_rows.at(i).after;
    return p.stem().string();
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest: " + path.string());
    DatasetManifest m;
    m.base_dir = path.parent_path();
    std::string line;
    if (!std::getline(in, line)) throw InputError("manifest is empty: " + path.string());
    const auto header = split(trim(line), ',');
    if (header == std::vector<std::string>{"image", "mask"}) {
        m.kind = DatasetKind::static_images;
    } else if (header == std::vector<std::string>{"before", "after", "appeared_mask", "disappeared_mask"}) {
        m.kind = DatasetKind::dynamic_pairs;
    } else {
        throw InputError("manifest header not recognized: '" + trim(line) + "'");
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split(trim(line), ',');
        if (fields.size() != header.size()) {
            throw InputError("manifest row " + std::to_string(row + 1) + ": expected " +
                             std::to_string(header.size()) + " fields");
        }
        if (m.kind == DatasetKind::static_images) {
            StaticRow r{fields[0], fields[1]};
            require_file(m.resolve(r.image), row);
            require_file(m.resolve(r.mask), row);
            m.static_rows.push_back(r);
        } else {
            DynamicRow r{fields[0], fields[1], fields[2], fields[3]};
            require_file(m.resolve(r.before), row);
            require_file(m.resolve(r.after), row);
            if (!r.appeared_mask.empty()) require_file(m.resolve(r.appeared_mask), row);
            if (!r.disappeared_mask.empty()) require_file(m.resolve(r.disappeared_mask), row);
            m.dynamic_rows.push_back(r);
        }
        ++row;
    }
    return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    if (manifest.kind == DatasetKind::static_images) {
        out << "image,mask\n";
        for (const auto& r : manifest.static_rows) out << r.image.string() << ',' << r.mask.string() << '\n';
    } else {
        out << "before,after,appeared_mask,disappeared_mask\n";
        for (const auto& r : manifest.dynamic_rows) {
            out << r.before.string() << ',' << r.after.string() << ',' << r.appeared_mask.string() << ','
                << r.disappeared_mask.string() << '\n';
        }
    }
    if (!out) throw std::runtime_error("failed writing manifest: " + path.string());
}

DetectParams RunConfig::detect_params() const {
    DetectParams p;
    p.k = k;
    p.ladder = make_ladder(p_min, tau, levels);
    p.subdivide_threshold = subdivide_threshold;
    p.index = IndexParams{knn_mode, knn_trees, knn_leaf_size, knn_checks};
    p.seed = seed;
    return p;
}

DynamicParams RunConfig::dynamic_params() const { return DynamicParams{detect_params(), w_size, stride}; }

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "k") c.k = parse_int(key, value);
    else if (key == "tau") c.tau = parse_int(key, value);
    else if (key == "p_min") c.p_min = parse_int(key, value);
    else if (key == "levels") c.levels = parse_int(key, value);
    else if (key == "subdivide_threshold") c.subdivide_threshold = parse_double(key, value);
    else if (key == "w_size") c.w_size = parse_int(key, value);
    else if (key == "stride") c.stride = parse_int(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "downsample") c.downsample = parse_bool(key, value);
    else if (key == "threads") c.threads = parse_int(key, value);
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "knn_mode") {
        if (value == "exact") c.knn_mode = SearchMode::exact;
        else if (value == "approximate") c.knn_mode = SearchMode::approximate;
        else throw InputError("config: knn_mode expects exact or approximate, got '" + value + "'");
    }
    else if (key == "knn_trees") c.knn_trees = parse_int(key, value);
    else if (key == "knn_leaf_size") c.knn_leaf_size = parse_int(key, value);
    else if (key == "knn_checks") c.knn_checks = parse_int(key, value);
    else if (key == "overlay_threshold") c.overlay_threshold = parse_double(key, value);
    else if (key == "swarm_size") c.swarm_size = parse_int(key, value);
    else if (key == "iterations") c.iterations = parse_int(key, value);
    else if (key == "inertia") c.inertia = parse_double(key, value);
    else if (key == "c1") c.c1 = parse_double(key, value);
    else if (key == "c2") c.c2 = parse_double(key, value);
    else if (key == "k_min") c.k_min = parse_int(key, value);
    else if (key == "k_max") c.k_max = parse_int(key, value);
    else if (key == "tau_values") c.tau_values = parse_int_list(key, value);
    else if (key == "p_min_min") c.p_min_min = parse_int(key, value);
    else if (key == "p_min_max") c.p_min_max = parse_int(key, value);
    else if (key == "levels_min") c.levels_min = parse_int(key, value);
    else if (key == "levels_max") c.levels_max = parse_int(key, value);
    else if (key == "wsize_candidates") c.wsize_candidates = parse_int_list(key, value);
    else if (key == "wsize_draws") c.wsize_draws = parse_int(key, value);
    else throw InputError("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config: " + path.string());
    RunConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
    for (const std::string& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw InputError("override '" + a + "' is not key=value");
        apply_setting(config, trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
    }
}

void validate(const RunConfig& c) {
    try {
        validate(c.dynamic_params());
    } catch (const std::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    if (c.threads < 1) throw InputError("config: threads must be >= 1");
    if (c.knn_trees < 1 || c.knn_leaf_size < 1 || c.knn_checks < 1) {
        throw InputError("config: knn_trees, knn_leaf_size and knn_checks must be >= 1");
    }
    if (c.overlay_threshold < 0.0 || c.overlay_threshold > 1.0) {
        throw InputError("config: overlay_threshold must be in [0,1]");
    }
    if (c.k_min < 1 || c.k_min > c.k_max || c.p_min_min < 1 || c.p_min_min > c.p_min_max || c.levels_min < 1 ||
        c.levels_min > c.levels_max) {
        throw InputError("config: optimizer bounds are empty or invalid");
    }
    if (std::any_of(c.tau_values.begin(), c.tau_values.end(), [](int t) { return t < 2; })) {
        throw InputError("config: tau_values must all be >= 2");
    }
    if (std::any_of(c.wsize_candidates.begin(), c.wsize_candidates.end(), [](int w) { return w < 1 || w % 2 == 0; })) {
        throw InputError("config: wsize_candidates must be odd and >= 1");
    }
    if (c.wsize_draws < 1) throw InputError("config: wsize_draws must be >= 1");
}

std::string to_text(const RunConfig& c) {
    std::ostringstream out;
    out << "k = " << c.k << '\n'
        << "tau = " << c.tau << '\n'
        << "p_min = " << c.p_min << '\n'
        << "levels = " << c.levels << '\n'
        << "subdivide_threshold = " << format_double(c.subdivide_threshold) << '\n'
        << "w_size = " << c.w_size << '\n'
        << "stride = " << c.stride << '\n'
        << "seed = " << c.seed << '\n'
        << "downsample = " << (c.downsample ? "on" : "off") << '\n'
        << "threads = " << c.threads << '\n'
        << "output_dir = " << c.output_dir.string() << '\n'
        << "knn_mode = " << (c.knn_mode == SearchMode::exact ? "exact" : "approximate") << '\n'
        << "knn_trees = " << c.knn_trees << '\n'
        << "knn_leaf_size = " << c.knn_leaf_size << '\n'
        << "knn_checks = " << c.knn_checks << '\n'
        << "overlay_threshold = " << format_double(c.overlay_threshold) << '\n'
        << "swarm_size = " << c.swarm_size << '\n'
        << "iterations = " << c.iterations << '\n'
        << "inertia = " << format_double(c.inertia) << '\n'
        << "c1 = " << format_double(c.c1) << '\n'
        << "c2 = " << format_double(c.c2) << '\n'
        << "k_min = " << c.k_min << '\n'
        << "k_max = " << c.k_max << '\n'
        << "tau_values = " << join_ints(c.tau_values) << '\n'
        << "p_min_min = " << c.p_min_min << '\n'
        << "p_min_max = " << c.p_min_max << '\n'
        << "levels_min = " << c.levels_min << '\n'
        << "levels_max = " << c.levels_max << '\n'
        << "wsize_candidates = " << join_ints(c.wsize_candidates) << '\n'
        << "wsize_draws = " << c.wsize_draws << '\n';
    return out.str();
}

std::vector<LabeledImage> load_static_dataset(const DatasetManifest& manifest, bool downsample) {
    if (manifest.kind != DatasetKind::static_images) throw InputError("expected a static manifest");
    std::vector<LabeledImage> out;
    out.reserve(manifest.static_rows.size());
    for (const StaticRow& r : manifest.static_rows) {
        RasterImage img = load_image(manifest.resolve(r.image));
        BinaryMask mask = load_mask(manifest.resolve(r.mask));
        if (!mask.same_shape(img)) throw InputError("mask size differs from image: " + r.mask.string());
        if (downsample) {
            img = downsample2(img);
            mask = downsample2(mask);
        }
        out.push_back(LabeledImage{std::move(img), std::move(mask)});
    }
    return out;
}

std::vector<ActionPair> load_dynamic_dataset(const DatasetManifest& manifest, bool downsample) {
    if (manifest.kind != DatasetKind::dynamic_pairs) throw InputError("expected a dynamic manifest");
    std::vector<ActionPair> out;
    out.reserve(manifest.dynamic_rows.size());
    for (const DynamicRow& r : manifest.dynamic_rows) {
        ActionPair pair{load_image(manifest.resolve(r.before)), load_image(manifest.resolve(r.after)), {}, {}};
        if (!r.appeared_mask.empty()) pair.appeared_mask = load_mask(manifest.resolve(r.appeared_mask));
        if (!r.disappeared_mask.empty()) pair.disappeared_mask = load_mask(manifest.resolve(r.disappeared_mask));
        try {
            validate(pair);
        } catch (const std::invalid_argument& e) {
            throw InputError("pair " + r.after.string() + ": " + e.what());
        }
        if (downsample) {
            pair.before = downsample2(pair.before);
            pair.after = downsample2(pair.after);
            if (pair.appeared_mask) pair.appeared_mask = downsample2(*pair.appeared_mask);
            if (pair.disappeared_mask) pair.disappeared_mask = downsample2(*pair.disappeared_mask);
        }
        out.push_back(std::move(pair));
    }
    return out;
}

}  // namespace optable
