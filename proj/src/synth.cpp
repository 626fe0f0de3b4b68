#include "optable/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include "optable/png_io.hpp"

namespace optable {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Stateless lattice noise in [-1, 1].
double hash_noise(std::int64_t x, std::int64_t y, std::uint64_t salt) {
    std::uint64_t h = salt ^ (static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL) ^
                      (static_cast<std::uint64_t>(y) * 0xC2B2AE3D27D4EB4FULL);
    h ^= h >> 33;
    h *= 0xFF51AFD7ED558CCDULL;
    h ^= h >> 33;
    h *= 0xC4CEB9FE1A85EC53ULL;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 52) - 1.0;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

enum class Form { bar, capsule, ellipse };

struct Color {
    double r{0.0};
    double g{0.0};
    double b{0.0};
};

/// Convex shape with a local frame: u along the main axis, v across it.
struct Body {
    Form form{Form::bar};
    double cx{0.0};
    double cy{0.0};
    double angle{0.0};
    double half_length{1.0};
    double half_width{1.0};

    bool covers(double px, double py, double& u, double& v) const {
        const double dx = px - cx;
        const double dy = py - cy;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        u = dx * c + dy * s;
        v = -dx * s + dy * c;
        const double nu = u / half_length;
        const double nv = v / half_width;
        switch (form) {
            case Form::bar:
                return std::abs(nu) <= 1.0 && std::abs(nv) <= 1.0;
            case Form::ellipse:
                return nu * nu + nv * nv <= 1.0;
            case Form::capsule: {
                const double core = half_length - half_width;
                const double du = std::max(0.0, std::abs(u) - core);
                return du * du + v * v <= half_width * half_width;
            }
        }
        return false;
    }
};

struct Instrument {
    Body body;
    bool metallic{true};
    Color base;
    double specular{0.0};
    std::uint64_t texture{0};
};

struct Towel {
    Body body;
    Color base;
    double weave_period{4.0};
    std::uint64_t texture{0};
};

struct Cloth {
    Color base;
    std::array<double, 4> fold_freq{};
    std::array<double, 4> fold_phase{};
    double fold_amplitude{0.0};
    std::uint64_t texture{0};
};

Body random_body(Rng& rng, const SynthOptions& o, double scale, Form form) {
    Body b;
    b.form = form;
    b.angle = uniform(rng, 0.0, std::numbers::pi);
    if (form == Form::ellipse) {
        b.half_length = uniform(rng, 24.0, 55.0) * scale;
        b.half_width = uniform(rng, 18.0, 40.0) * scale;
    } else {
        b.half_length = uniform(rng, 45.0, 125.0) * scale;
        b.half_width = uniform(rng, 8.0, 22.0) * scale;
    }
    const double margin = 0.5 * b.half_width;
    b.cx = uniform(rng, margin, o.width - margin);
    b.cy = uniform(rng, margin, o.height - margin);
    return b;
}

Instrument random_instrument(Rng& rng, const SynthOptions& o) {
    const double scale = std::min(o.width, o.height) / 480.0;
    Instrument ins;
    const int pick = uniform_int(rng, 0, 9);
    const Form form = pick < 5 ? Form::bar : (pick < 8 ? Form::capsule : Form::ellipse);
    ins.body = random_body(rng, o, scale, form);
    ins.metallic = uniform(rng, 0.0, 1.0) < 0.65;
    if (ins.metallic) {
        const double gray = uniform(rng, 120.0, 225.0);
        ins.base = Color{gray - uniform(rng, 0.0, 10.0), gray, gray + uniform(rng, 0.0, 14.0)};
        ins.specular = uniform(rng, 0.25, 0.45);
    } else {
        static constexpr std::array<double, 7> hues{0.0, 0.07, 0.13, 0.58, 0.66, 0.77, 0.9};
        Hsv hsv;
        hsv.h = std::fmod(hues[static_cast<std::size_t>(uniform_int(rng, 0, 6))] + uniform(rng, -0.02, 0.02) + 1.0, 1.0);
        hsv.s = uniform(rng, 0.45, 0.9);
        hsv.v = uniform(rng, 0.55, 0.95);
        double r, g, b;
        hsv_to_rgb(hsv, r, g, b);
        ins.base = Color{255.0 * r, 255.0 * g, 255.0 * b};
        ins.specular = uniform(rng, 0.05, 0.15);
    }
    ins.texture = rng();
    return ins;
}

Towel random_towel(Rng& rng, const SynthOptions& o) {
    const double scale = std::min(o.width, o.height) / 480.0;
    Towel t;
    t.body.form = uniform(rng, 0.0, 1.0) < 0.6 ? Form::bar : Form::ellipse;
    t.body.angle = uniform(rng, 0.0, std::numbers::pi);
    t.body.half_length = uniform(rng, 55.0, 110.0) * scale;
    t.body.half_width = uniform(rng, 35.0, 75.0) * scale;
    t.body.cx = uniform(rng, 0.0, o.width);
    t.body.cy = uniform(rng, 0.0, o.height);
    t.base = Color{uniform(rng, 205.0, 225.0), uniform(rng, 188.0, 205.0), uniform(rng, 155.0, 178.0)};
    t.weave_period = uniform(rng, 3.0, 6.0);
    t.texture = rng();
    return t;
}

Cloth random_cloth(Rng& rng) {
    Cloth c;
    c.base = Color{uniform(rng, 36.0, 42.0), uniform(rng, 117.0, 125.0), uniform(rng, 77.0, 83.0)};
    for (std::size_t i = 0; i < 4; ++i) {
        c.fold_freq[i] = uniform(rng, 0.004, 0.02);
        c.fold_phase[i] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    }
    c.fold_amplitude = uniform(rng, 0.04, 0.1);
    c.texture = rng();
    return c;
}

Color cloth_color(const Cloth& c, int x, int y) {
    const double fold = std::sin(c.fold_freq[0] * x + c.fold_phase[0]) * std::sin(c.fold_freq[1] * y + c.fold_phase[1]) +
                        0.5 * std::sin(c.fold_freq[2] * (x + y) + c.fold_phase[2]) +
                        0.5 * std::sin(c.fold_freq[3] * (x - y) + c.fold_phase[3]);
    const double shade = 1.0 + c.fold_amplitude * fold;
    const double grain = 5.0 * hash_noise(x, y, c.texture);
    return Color{c.base.r * shade + 0.6 * grain, c.base.g * shade + grain, c.base.b * shade + 0.8 * grain};
}

Color towel_color(const Towel& t, double u, double v) {
    const double weave = 6.0 * std::sin(2.0 * std::numbers::pi * u / t.weave_period) *
                         std::sin(2.0 * std::numbers::pi * v / t.weave_period);
    const double grain = 4.0 * hash_noise(std::lround(u), std::lround(v), t.texture);
    return Color{t.base.r + weave + grain, t.base.g + weave + grain, t.base.b + weave + grain};
}

Color instrument_color(const Instrument& ins, double u, double v) {
    // Cylindrical highlight across the width plus fine brushed-metal grain.
    const double across = std::clamp(v / ins.body.half_width, -1.0, 1.0);
    const double shade = (1.0 - ins.specular) + ins.specular * 1.6 * std::cos(0.5 * std::numbers::pi * across) -
                         0.3 * ins.specular * across;
    const double grain = (ins.metallic ? 6.0 : 3.0) * hash_noise(std::lround(u), std::lround(v), ins.texture);
    return Color{ins.base.r * shade + grain, ins.base.g * shade + grain, ins.base.b * shade + grain};
}

struct Scene {
    Cloth cloth;
    std::vector<Towel> towels;
    std::vector<Instrument> instruments;
};

Scene random_scene(Rng& rng, const SynthOptions& o) {
    if (o.width < 16 || o.height < 16) throw std::invalid_argument("synthetic scenes need at least 16x16 pixels");
    if (o.min_instruments < 1 || o.max_instruments < o.min_instruments) {
        throw std::invalid_argument("synthetic scenes need 1 <= min_instruments <= max_instruments");
    }
    Scene s;
    s.cloth = random_cloth(rng);
    const int towels = uniform_int(rng, 0, std::max(0, o.max_towels));
    for (int i = 0; i < towels; ++i) s.towels.push_back(random_towel(rng, o));
    const int count = uniform_int(rng, o.min_instruments, o.max_instruments);
    for (int i = 0; i < count; ++i) s.instruments.push_back(random_instrument(rng, o));
    return s;
}

/// Renders the scene; owner receives the index of the top-most instrument per pixel, or -1.
RasterImage render(const Scene& s, const SynthOptions& o, std::uint64_t sensor_seed, std::vector<int>& owner) {
    RasterImage img(o.width, o.height);
    owner.assign(static_cast<std::size_t>(o.width) * static_cast<std::size_t>(o.height), -1);
    for (int y = 0; y < o.height; ++y) {
        for (int x = 0; x < o.width; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            Color c = cloth_color(s.cloth, x, y);
            double u, v;
            for (const Towel& t : s.towels) {
                if (t.body.covers(px, py, u, v)) c = towel_color(t, u, v);
            }
            int top = -1;
            for (std::size_t i = s.instruments.size(); i-- > 0;) {
                if (s.instruments[i].body.covers(px, py, u, v)) {
                    c = instrument_color(s.instruments[i], u, v);
                    top = static_cast<int>(i);
                    break;
                }
            }
            const double sensor = 2.0 * hash_noise(x, y, sensor_seed);
            img.at(x, y) = Rgb{to_byte(c.r + sensor), to_byte(c.g + sensor), to_byte(c.b + sensor)};
            owner[static_cast<std::size_t>(y) * static_cast<std::size_t>(o.width) + static_cast<std::size_t>(x)] = top;
        }
    }
    return img;
}

template <typename Pred>
BinaryMask mask_from_owner(const std::vector<int>& owner, const SynthOptions& o, Pred pred) {
    BinaryMask mask(o.width, o.height);
    auto bits = mask.values();
    for (std::size_t i = 0; i < owner.size(); ++i) bits[i] = owner[i] >= 0 && pred(owner[i]) ? 1 : 0;
    return mask;
}

std::string numbered(const char* prefix, int i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%03d%s", prefix, i, suffix);
    return buf;
}

std::uint64_t scene_seed(std::uint64_t seed, int index) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

LabeledImage render_static_scene(std::uint64_t seed, const SynthOptions& options) {
    Rng rng(seed);
    const Scene s = random_scene(rng, options);
    std::vector<int> owner;
    RasterImage img = render(s, options, rng(), owner);
    return LabeledImage{std::move(img), mask_from_owner(owner, options, [](int) { return true; })};
}

ActionPair render_action_pair(std::uint64_t seed, const SynthOptions& options, int added, int removed) {
    if (added > 2 || removed > 2) throw std::invalid_argument("render_action_pair: at most 2 added and 2 removed");
    Rng rng(seed);
    const Scene before = random_scene(rng, options);
    if (added < 0 || removed < 0) {
        do {
            added = uniform_int(rng, 0, 2);
            removed = uniform_int(rng, 0, 2);
        } while (added == 0 && removed == 0);
    }
    removed = std::min(removed, static_cast<int>(before.instruments.size()) - 1);

    std::vector<std::size_t> order(before.instruments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> gone(before.instruments.size(), false);
    for (int i = 0; i < removed; ++i) gone[order[static_cast<std::size_t>(i)]] = true;

    Scene after;
    after.cloth = before.cloth;
    after.towels = before.towels;
    for (std::size_t i = 0; i < before.instruments.size(); ++i) {
        if (gone[i]) continue;
        Instrument moved = before.instruments[i];
        moved.body.cx += uniform_int(rng, -options.jitter, options.jitter);
        moved.body.cy += uniform_int(rng, -options.jitter, options.jitter);
        after.instruments.push_back(moved);
    }
    const int kept = static_cast<int>(after.instruments.size());
    for (int i = 0; i < added; ++i) after.instruments.push_back(random_instrument(rng, options));

    std::vector<int> before_owner, after_owner;
    ActionPair pair;
    pair.before = render(before, options, rng(), before_owner);
    pair.after = render(after, options, rng(), after_owner);
    pair.disappeared_mask = mask_from_owner(before_owner, options, [&](int i) { return gone[static_cast<std::size_t>(i)]; });
    pair.appeared_mask = mask_from_owner(after_owner, options, [&](int i) { return i >= kept; });
    return pair;
}

DatasetManifest generate_synthetic_dataset(DatasetKind kind, int n, std::uint64_t seed,
                                           const std::filesystem::path& out_dir, const SynthOptions& options) {
    if (n < 2) throw std::invalid_argument("synthetic dataset needs n >= 2");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw ImageIoError(ImageIoError::Kind::write_failed, "cannot create directory " + out_dir.string());
    }
    DatasetManifest manifest;
    manifest.kind = kind;
    manifest.base_dir = out_dir;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t s = scene_seed(seed, i);
        if (kind == DatasetKind::static_images) {
            const LabeledImage scene = render_static_scene(s, options);
            StaticRow row{numbered("image_", i, ".png"), numbered("mask_", i, ".png")};
            save_image(out_dir / row.image, scene.image);
            save_mask(out_dir / row.mask, scene.mask);
            manifest.static_rows.push_back(row);
        } else {
            const ActionPair pair = render_action_pair(s, options);
            DynamicRow row{numbered("pair_", i, "_before.png"), numbered("pair_", i, "_after.png"),
                           numbered("pair_", i, "_appeared.png"), numbered("pair_", i, "_disappeared.png")};
            save_image(out_dir / row.before, pair.before);
            save_image(out_dir / row.after, pair.after);
            save_mask(out_dir / row.appeared_mask, *pair.appeared_mask);
            save_mask(out_dir / row.disappeared_mask, *pair.disappeared_mask);
            manifest.dynamic_rows.push_back(row);
        }
    }
    save_manifest(out_dir / "manifest.csv", manifest);
    return manifest;
}

}  // namespace optable
