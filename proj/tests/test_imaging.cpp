#include "flowmend/imaging.hpp"

#include "flowmend/errors.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace flowmend;

namespace {

Frame plane(int w, int h, double ch, double cv, double c0 = 0.0) {
    Frame f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            f.at(x, y) = ch * x + cv * y + c0;
    return f;
}

} // namespace

TEST_SUITE("imaging") {

TEST_CASE("bilinear_sample hits exact values at integer positions") {
    Frame f(1, 1);
    f.at(0, 0) = 10.0;
    CHECK(bilinear_sample(f, {0.0, 0.0}) == doctest::Approx(10.0));

    std::mt19937_64 rng(42);
    Frame r = testsup::random_grid(rng, 7, 5, 0.0, 255.0);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            CHECK(bilinear_sample(r, {double(x), double(y)}) == doctest::Approx(r.at(x, y)).epsilon(1e-12));
}

TEST_CASE("bilinear_sample midpoint and corner-average values") {
    Frame ramp(2, 2);
    ramp.at(0, 0) = 0.0;
    ramp.at(1, 0) = 100.0;
    ramp.at(0, 1) = 0.0;
    ramp.at(1, 1) = 100.0;
    CHECK(bilinear_sample(ramp, {0.5, 0.0}) == doctest::Approx(50.0));

    Frame four(2, 2);
    four.at(0, 0) = 0.0;
    four.at(1, 0) = 100.0;
    four.at(0, 1) = 50.0;
    four.at(1, 1) = 150.0;
    CHECK(bilinear_sample(four, {0.5, 0.5}) == doctest::Approx(75.0));
}

TEST_CASE("bilinear_sample clamps out-of-bounds positions to the edge") {
    Frame f = plane(4, 4, 3.0, 7.0, 1.0);
    CHECK(bilinear_sample(f, {-5.0, 0.0}) == doctest::Approx(f.at(0, 0)));
    CHECK(bilinear_sample(f, {10.0, 10.0}) == doctest::Approx(f.at(3, 3)));
}

TEST_CASE("bilinear_sample stays within the hull of its four neighbors") {
    std::mt19937_64 rng(7);
    Frame f = testsup::random_grid(rng, 9, 9, 0.0, 255.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double x = testsup::uniform(rng, 0.0, 8.0);
        const double y = testsup::uniform(rng, 0.0, 8.0);
        const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
        const int x1 = std::min(x0 + 1, 8), y1 = std::min(y0 + 1, 8);
        const double lo = std::min({f.at(x0, y0), f.at(x1, y0), f.at(x0, y1), f.at(x1, y1)});
        const double hi = std::max({f.at(x0, y0), f.at(x1, y0), f.at(x0, y1), f.at(x1, y1)});
        const double v = bilinear_sample(f, {x, y});
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("spatial_gradient of a constant frame is zero") {
    Frame f(6, 6, 42.0);
    for (double h : {0.0, 2.5, 5.0}) {
        for (double v : {0.0, 3.0, 5.0}) {
            const SpatialGradient g = spatial_gradient(f, {h, v});
            CHECK(g.gh == doctest::Approx(0.0));
            CHECK(g.gv == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("spatial_gradient matches analytic gradients of planes on interior pixels") {
    Frame f1 = plane(8, 8, 3.0, 0.0);
    const SpatialGradient g1 = spatial_gradient(f1, {4.0, 4.0});
    CHECK(g1.gh == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(g1.gv == doctest::Approx(0.0).epsilon(1e-9));

    Frame f2 = plane(8, 8, 2.0, 5.0);
    for (double h : {1.0, 3.5, 6.0}) {
        for (double v : {1.0, 2.25, 6.0}) {
            const SpatialGradient g = spatial_gradient(f2, {h, v});
            CHECK(std::abs(g.gh - 2.0) < 1e-9);
            CHECK(std::abs(g.gv - 5.0) < 1e-9);
        }
    }
}

TEST_CASE("spatial_gradient falls back to one-sided differences at borders") {
    Frame f = plane(5, 5, 2.0, 5.0);
    const SpatialGradient g = spatial_gradient(f, {0.0, 0.0});
    CHECK(g.gh == doctest::Approx(2.0));
    CHECK(g.gv == doctest::Approx(5.0));
    const SpatialGradient ge = spatial_gradient(f, {4.0, 4.0});
    CHECK(ge.gh == doctest::Approx(2.0));
    CHECK(ge.gv == doctest::Approx(5.0));
}

TEST_CASE("dfd vanishes under perfect registration") {
    std::mt19937_64 rng(3);
    Frame f = testsup::random_grid(rng, 10, 8, 0.0, 255.0);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            CHECK(dfd(f, f, {double(x), double(y)}, {0.0, 0.0}) == doctest::Approx(0.0));
}

TEST_CASE("dfd recovers zero on a shifted frame with the true displacement") {
    const testsup::Texture tex = testsup::Texture::make(11);
    const Frame prev = testsup::render(tex, 24, 24);
    const Frame curr = testsup::render(tex, 24, 24, 2.0, 0.0);
    for (int y = 4; y < 20; ++y)
        for (int x = 4; x < 20; ++x)
            CHECK(std::abs(dfd(curr, prev, {double(x), double(y)}, {2.0, 0.0})) < 1e-9);
}

TEST_CASE("dfd of constant frames is their intensity offset") {
    Frame c1(5, 5, 80.0);
    Frame c2(5, 5, 30.0);
    CHECK(dfd(c1, c2, {2.0, 2.0}, {1.25, -0.5}) == doctest::Approx(50.0));
}

TEST_CASE("warp_frame with the zero field is the identity") {
    std::mt19937_64 rng(5);
    Frame prev = testsup::random_grid(rng, 12, 9, 0.0, 255.0);
    MotionField field(12, 9);
    std::fill(field.valid.begin(), field.valid.end(), uint8_t{1});
    const Frame out = warp_frame(prev, field);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out.data[i] == doctest::Approx(prev.data[i]));
}

TEST_CASE("warp_frame shifts a ramp by a uniform field on interior pixels") {
    Frame prev = plane(10, 10, 4.0, 0.0, 5.0);
    MotionField field(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            field.set(x, y, {1.0, 0.0}, true);
    const Frame out = warp_frame(prev, field);
    for (int y = 0; y < 10; ++y)
        for (int x = 1; x < 10; ++x)
            CHECK(out.at(x, y) == doctest::Approx(prev.at(x - 1, y)));
}

TEST_CASE("warp_frame copies the previous frame where the field is invalid") {
    std::mt19937_64 rng(9);
    Frame prev = testsup::random_grid(rng, 8, 8, 0.0, 255.0);
    MotionField field(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            field.set(x, y, {3.0, -2.0}, false);
    const Frame out = warp_frame(prev, field);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out.data[i] == prev.data[i]);
}

TEST_CASE("warp_frame recovers an integer global shift to 1e-9 on the interior") {
    std::mt19937_64 rng(13);
    Frame prev = testsup::random_grid(rng, 16, 16, 0.0, 255.0);
    // curr(x, y) = prev(x - 2, y - 1), valid for x >= 2, y >= 1
    Frame curr(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            curr.at(x, y) = prev.at(std::max(x - 2, 0), std::max(y - 1, 0));
    MotionField field(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            field.set(x, y, {2.0, 1.0}, true);
    const Frame warped = warp_frame(prev, field);
    for (int y = 1; y < 16; ++y)
        for (int x = 2; x < 16; ++x)
            CHECK(std::abs(warped.at(x, y) - curr.at(x, y)) <= 1e-9);
}

TEST_CASE("warp_frame rejects mismatched field dimensions") {
    Frame prev(8, 8, 0.0);
    MotionField field(7, 8);
    CHECK_THROWS_AS(warp_frame(prev, field), ShapeError);
}

} // TEST_SUITE
