#include <doctest.h>

#include "oracles.hpp"
#include "optable/dataset.hpp"
#include "optable/png_io.hpp"
#include "test_util.hpp"

using namespace optable;

namespace {

void write_pair_files(const testing::TempDir& dir) {
    save_image(dir / "b.png", oracle::random_image(8, 6, 1));
    save_image(dir / "a.png", oracle::random_image(8, 6, 2));
    save_mask(dir / "am.png", BinaryMask(8, 6));
}

}  // namespace

TEST_CASE("static manifest round trip and relative resolution") {
    testing::TempDir dir;
    save_image(dir / "img.png", oracle::random_image(6, 4, 1));
    save_mask(dir / "m.png", BinaryMask(6, 4));
    DatasetManifest m;
    m.static_rows = {StaticRow{"img.png", "m.png"}, StaticRow{"img.png", "m.png"}};
    save_manifest(dir / "manifest.csv", m);
    CHECK(testing::read_file(dir / "manifest.csv") == "image,mask\nimg.png,m.png\nimg.png,m.png\n");
    const DatasetManifest back = load_manifest(dir / "manifest.csv");
    CHECK(back.kind == DatasetKind::static_images);
    CHECK(back.size() == 2);
    CHECK(back.resolve(back.static_rows[0].image) == dir / "img.png");
    CHECK(back.row_id(1) == "img");
}

TEST_CASE("dynamic manifest accepts empty mask columns") {
    testing::TempDir dir;
    write_pair_files(dir);
    testing::write_file(dir / "manifest.csv", "before,after,appeared_mask,disappeared_mask\nb.png,a.png,am.png,\n");
    const DatasetManifest m = load_manifest(dir / "manifest.csv");
    CHECK(m.kind == DatasetKind::dynamic_pairs);
    REQUIRE(m.size() == 1);
    CHECK(m.dynamic_rows[0].disappeared_mask.empty());
    CHECK(m.row_id(0) == "a");
    const auto pairs = load_dynamic_dataset(m, false);
    CHECK(pairs[0].appeared_mask.has_value());
    CHECK_FALSE(pairs[0].disappeared_mask.has_value());
    CHECK_THROWS_AS(load_static_dataset(m, false), InputError);
}

TEST_CASE("manifest errors are input errors") {
    testing::TempDir dir;
    write_pair_files(dir);
    CHECK_THROWS_AS(load_manifest(dir / "nope.csv"), InputError);
    testing::write_file(dir / "bad_header.csv", "picture,mask\n");
    CHECK_THROWS_AS(load_manifest(dir / "bad_header.csv"), InputError);
    testing::write_file(dir / "missing.csv", "image,mask\nb.png,ghost.png\n");
    CHECK_THROWS_AS(load_manifest(dir / "missing.csv"), InputError);
    testing::write_file(dir / "short.csv", "image,mask\nb.png\n");
    CHECK_THROWS_AS(load_manifest(dir / "short.csv"), InputError);
    testing::write_file(dir / "mixed.csv", "image,mask\nb.png,a.png,am.png,\n");
    CHECK_THROWS_AS(load_manifest(dir / "mixed.csv"), InputError);
}

TEST_CASE("loading downsamples images and masks together") {
    testing::TempDir dir;
    save_image(dir / "i.png", oracle::random_image(10, 8, 3));
    BinaryMask mask(10, 8);
    mask.at(0, 0) = mask.at(1, 0) = 1;
    save_mask(dir / "m.png", mask);
    testing::write_file(dir / "manifest.csv", "image,mask\ni.png,m.png\n");
    const auto m = load_manifest(dir / "manifest.csv");
    const auto full = load_static_dataset(m, false);
    const auto half = load_static_dataset(m, true);
    CHECK(full[0].image.width() == 10);
    CHECK(half[0].image.width() == 5);
    CHECK(half[0].image == downsample2(full[0].image));
    CHECK(half[0].mask.at(0, 0) == 1);
    CHECK(half[0].mask.at(1, 0) == 0);
}

TEST_CASE("config defaults mirror the detection defaults") {
    const RunConfig c;
    CHECK_NOTHROW(validate(c));
    const DetectParams d = c.detect_params();
    CHECK(d.k == 89);
    CHECK(d.ladder.sizes == std::vector<int>{5, 20, 80});
    CHECK(d.subdivide_threshold == 0.0);
    CHECK(c.dynamic_params().w_size == 81);
    CHECK(c.downsample);
}

TEST_CASE("config text round trip") {
    testing::TempDir dir;
    RunConfig c;
    apply_overrides(c, {"k=13", "tau = 3", "subdivide_threshold=-1", "downsample=off", "knn_mode=exact",
                        "wsize_candidates=21;41", "seed=18446744073709551615", "output_dir=some dir/x",
                        "inertia=0.123456789012345"});
    testing::write_file(dir / "c.txt", "# comment\n" + to_text(c) + "\n\n");
    const RunConfig back = load_config(dir / "c.txt");
    CHECK(to_text(back) == to_text(c));
    CHECK(back.k == 13);
    CHECK(back.tau == 3);
    CHECK(back.subdivide_threshold == -1.0);
    CHECK_FALSE(back.downsample);
    CHECK(back.knn_mode == SearchMode::exact);
    CHECK(back.wsize_candidates == std::vector<int>{21, 41});
    CHECK(back.seed == 18446744073709551615ULL);
    CHECK(back.output_dir == "some dir/x");
    CHECK(back.inertia == 0.123456789012345);
}

TEST_CASE("config rejects unknown keys and bad values") {
    RunConfig c;
    CHECK_THROWS_AS(apply_setting(c, "kay", "3"), InputError);
    CHECK_THROWS_AS(apply_setting(c, "k", "3x"), InputError);
    CHECK_THROWS_AS(apply_setting(c, "downsample", "maybe"), InputError);
    CHECK_THROWS_AS(apply_setting(c, "knn_mode", "fast"), InputError);
    CHECK_THROWS_AS(apply_setting(c, "inertia", "nan"), InputError);
    CHECK_THROWS_AS(apply_overrides(c, {"k"}), InputError);
    testing::TempDir dir;
    testing::write_file(dir / "c.txt", "k = 3\nnonsense line\n");
    CHECK_THROWS_AS(load_config(dir / "c.txt"), InputError);
    CHECK_THROWS_AS(load_config(dir / "missing.txt"), InputError);
}

TEST_CASE("config validation") {
    auto invalid = [](const std::string& assignment) {
        RunConfig c;
        apply_overrides(c, {assignment});
        CHECK_THROWS_AS(validate(c), InputError);
    };
    invalid("k=0");
    invalid("tau=1");
    invalid("w_size=80");
    invalid("threads=0");
    invalid("subdivide_threshold=1");
    invalid("overlay_threshold=1.5");
    invalid("k_min=300");
    invalid("wsize_candidates=21;40");
    RunConfig ok;
    apply_overrides(ok, {"k_min=10"});
    CHECK_NOTHROW(validate(ok));
}
