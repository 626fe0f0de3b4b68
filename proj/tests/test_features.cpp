#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "optable/features.hpp"

using namespace optable;

TEST_CASE("descriptor matches two-pass statistics") {
    const RasterImage img = oracle::random_image(24, 19, 8);
    const IntegralStats stats(build_channel_stack(img));
    std::mt19937 rng(2);
    for (int t = 0; t < 200; ++t) {
        const int size = 1 + static_cast<int>(rng() % 12);
        const int x = static_cast<int>(rng() % static_cast<unsigned>(img.width() - size + 1));
        const int y = static_cast<int>(rng() % static_cast<unsigned>(img.height() - size + 1));
        const PatchRect rect{x, y, size};
        const FeatureVector want = oracle::box_descriptor(img, rect);
        const Descriptor got = patch_descriptor(stats, rect);
        for (int i = 0; i < kDescriptorSize; ++i) CHECK(got.values[i] == doctest::Approx(want[i]).scale(1).epsilon(2e-5));
    }
}

TEST_CASE("uniform patches have exactly zero spread") {
    RasterImage img(10, 10, Rgb{37, 140, 201});
    const IntegralStats stats(build_channel_stack(img));
    const Descriptor d = patch_descriptor(stats, PatchRect{2, 3, 6});
    for (int p = 0; p < kPlaneCount; ++p) CHECK(d.stddev(static_cast<Plane>(p)) == 0.0);
    CHECK(d.mean(Plane::red) == 37.0 / 255.0);
    CHECK(d.mean(Plane::sobel) == 0.0);
}

TEST_CASE("8-bit channel means are exact") {
    const RasterImage img = oracle::random_image(9, 9, 33);
    const IntegralStats stats(build_channel_stack(img));
    const PatchRect rect{1, 2, 5};
    long sum = 0;
    for (int y = 2; y < 7; ++y)
        for (int x = 1; x < 6; ++x) sum += img.at(x, y).g;
    CHECK(patch_descriptor(stats, rect).mean(Plane::green) == doctest::Approx(sum / 25.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("descriptor ranges stay in the unit interval") {
    const RasterImage img = oracle::random_image(30, 30, 5);
    const IntegralStats stats(build_channel_stack(img));
    const DescriptorField field(stats, 4);
    for (int y = 0; y < field.rows(); ++y) {
        for (int x = 0; x < field.columns(); ++x) {
            const Descriptor d = field.descriptor(x, y);
            for (int p = 0; p < kPlaneCount; ++p) {
                CHECK(d.mean(static_cast<Plane>(p)) >= 0.0);
                CHECK(d.mean(static_cast<Plane>(p)) <= 1.0);
                CHECK(d.stddev(static_cast<Plane>(p)) >= 0.0);
                CHECK(d.stddev(static_cast<Plane>(p)) <= 0.5);
            }
        }
    }
}

TEST_CASE("integral sums agree with direct summation") {
    const RasterImage img = oracle::random_image(15, 12, 9);
    const ChannelStack stack = build_channel_stack(img);
    const IntegralStats stats(stack);
    const PatchRect rect{3, 4, 7};
    for (int p = 0; p < kPlaneCount; ++p) {
        double s = 0.0, q = 0.0;
        for (int y = rect.y; y < rect.y + rect.size; ++y) {
            for (int x = rect.x; x < rect.x + rect.size; ++x) {
                const double v = stack.planes[static_cast<std::size_t>(p)].at(x, y);
                s += v;
                q += v * v;
            }
        }
        CHECK(stats.sum(static_cast<Plane>(p), rect) == doctest::Approx(s).epsilon(1e-12));
        CHECK(stats.sum_squares(static_cast<Plane>(p), rect) == doctest::Approx(q).epsilon(1e-12));
    }
    CHECK(stats.table_sum(Plane::red, 0, 5) == 0);
    CHECK(stats.table_sum(Plane::red, 7, 0) == 0);
}

TEST_CASE("planes are quantized to the fixed grid") {
    const ChannelStack stack = build_channel_stack(oracle::random_image(6, 6, 1));
    for (const GrayImage& plane : stack.planes) {
        for (double v : plane.values()) CHECK(v * kPlaneQuantum == std::nearbyint(v * kPlaneQuantum));
    }
}

TEST_CASE("descriptor field equals per-patch descriptors bitwise") {
    const RasterImage img = oracle::blob_image(20, 16, 4);
    const IntegralStats stats(build_channel_stack(img));
    const DescriptorField field(stats, 5);
    CHECK(field.columns() == 16);
    CHECK(field.rows() == 12);
    for (int y = 0; y < field.rows(); ++y) {
        for (int x = 0; x < field.columns(); ++x) {
            CHECK(field.descriptor(x, y).values == patch_descriptor(stats, PatchRect{x, y, 5}).values);
        }
    }
    CHECK_THROWS_AS(DescriptorField(stats, 17), std::invalid_argument);
}

TEST_CASE("patches outside the image are rejected") {
    const IntegralStats stats(build_channel_stack(RasterImage(8, 8)));
    CHECK_THROWS_AS(patch_descriptor(stats, PatchRect{4, 0, 5}), std::out_of_range);
    CHECK_THROWS_AS(patch_descriptor(stats, PatchRect{-1, 0, 2}), std::out_of_range);
    CHECK_THROWS_AS(patch_descriptor(stats, PatchRect{0, 0, 0}), std::out_of_range);
    CHECK_NOTHROW(patch_descriptor(stats, PatchRect{0, 0, 8}));
}

TEST_CASE("distance is a symmetric Euclidean metric") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        Descriptor a, b;
        for (auto& v : a.values) v = u(rng);
        for (auto& v : b.values) v = u(rng);
        CHECK(descriptor_distance(a, b) == descriptor_distance(b, a));
        CHECK(descriptor_distance(a, a) == 0.0);
        CHECK(descriptor_distance(a, b) == doctest::Approx(std::sqrt(oracle::sq_dist(a.values, b.values))));
    }
}
