#include "flowmend/conceal.hpp"

#include "flowmend/errors.hpp"
#include "flowmend/metrics_io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace flowmend;

namespace {

MotionField uniform_field(int w, int h, DisplacementVector d) {
    MotionField f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            f.set(x, y, d, true);
    return f;
}

int count_lost_pixels(const LossMask& mask, int w, int h) {
    const std::vector<uint8_t> legit = legit_pixel_mask(mask, w, h);
    int n = 0;
    for (uint8_t v : legit) n += v == 0;
    return n;
}

} // namespace

TEST_SUITE("conceal") {

TEST_CASE("simulate_loss with rate 0 and 1") {
    const LossMask none = simulate_loss(9, 11, 0.0, 7);
    CHECK(none.lost_count() == 0);
    const LossMask all = simulate_loss(9, 11, 1.0, 7);
    CHECK(all.lost_count() == all.block_count());
}

TEST_CASE("simulate_loss is a deterministic function of dims, rate, seed") {
    const LossMask a = simulate_loss(9, 11, 0.05, 1234);
    const LossMask b = simulate_loss(9, 11, 0.05, 1234);
    CHECK(a.lost == b.lost);
    const LossMask c = simulate_loss(9, 11, 0.05, 1235);
    CHECK(a.lost != c.lost); // different seed, different pattern
}

TEST_CASE("simulate_loss empirical rate over many seeds matches the target") {
    long long lost = 0, total = 0;
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        const LossMask m = simulate_loss(9, 11, 0.05, seed);
        lost += m.lost_count();
        total += m.block_count();
    }
    const double mean = static_cast<double>(lost) / static_cast<double>(total);
    CHECK(std::abs(mean / 0.05 - 1.0) <= 0.005);
}

TEST_CASE("legit_pixel_mask marks exactly the lost blocks") {
    LossMask mask = LossMask::for_frame(40, 40, 16);
    CHECK(mask.mb_cols == 3);
    CHECK(mask.mb_rows == 3);
    mask.lost[4] = 1; // center block
    const std::vector<uint8_t> legit = legit_pixel_mask(mask, 40, 40);
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 40; ++x) {
            const bool in_center = x >= 16 && x < 32 && y >= 16 && y < 32;
            CHECK(legit[static_cast<size_t>(y) * 40 + x] == (in_center ? 0 : 1));
        }
    }
}

TEST_CASE("avgn_conceal leaves a lossless field unchanged") {
    const LossMask mask = LossMask::for_frame(48, 32, 16);
    const MotionField field = uniform_field(48, 32, {1.5, -0.5});
    const MotionField out = avgn_conceal(field, mask);
    CHECK(out.valid == field.valid);
    for (size_t i = 0; i < out.vectors.size(); ++i) {
        CHECK(out.vectors[i].dh == field.vectors[i].dh);
        CHECK(out.vectors[i].dv == field.vectors[i].dv);
    }
}

TEST_CASE("avgn_conceal fills a surrounded block with the uniform neighbor motion") {
    LossMask mask = LossMask::for_frame(48, 48, 16);
    mask.lost[4] = 1; // center of the 3x3 block grid
    MotionField field = uniform_field(48, 48, {2.0, 1.0});
    for (int y = 16; y < 32; ++y)
        for (int x = 16; x < 32; ++x)
            field.set(x, y, {9.0, 9.0}, false); // garbage in the lost block
    const MotionField out = avgn_conceal(field, mask);
    for (int y = 16; y < 32; ++y) {
        for (int x = 16; x < 32; ++x) {
            CHECK(out.is_valid(x, y));
            CHECK(out.vec(x, y).dh == doctest::Approx(2.0));
            CHECK(out.vec(x, y).dv == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("avgn_conceal averages the available neighbors of a corner block") {
    // 2x2 block grid; corner 0 lost, neighbors carry (2,0), (0,2), (4,4).
    LossMask mask = LossMask::for_frame(32, 32, 16);
    mask.lost[0] = 1;
    MotionField field(32, 32);
    auto fill_block = [&](int col, int row, DisplacementVector d) {
        for (int y = row * 16; y < (row + 1) * 16; ++y)
            for (int x = col * 16; x < (col + 1) * 16; ++x)
                field.set(x, y, d, true);
    };
    fill_block(1, 0, {2.0, 0.0});
    fill_block(0, 1, {0.0, 2.0});
    fill_block(1, 1, {4.0, 4.0});
    const MotionField out = avgn_conceal(field, mask);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            CHECK(out.vec(x, y).dh == doctest::Approx(2.0));
            CHECK(out.vec(x, y).dv == doctest::Approx(2.0));
        }
    }
}

TEST_CASE("avgn_conceal falls back to zero with no available neighbor") {
    LossMask mask = LossMask::for_frame(16, 16, 16);
    mask.lost[0] = 1;
    const MotionField out = avgn_conceal(MotionField(16, 16), mask);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            CHECK(out.is_valid(x, y));
            CHECK(out.vec(x, y).dh == 0.0);
            CHECK(out.vec(x, y).dv == 0.0);
        }
    }
}

TEST_CASE("copy_conceal produces an all-valid zero field") {
    const LossMask mask = simulate_loss(2, 2, 0.5, 3);
    const MotionField f = copy_conceal(mask, 32, 32);
    for (size_t i = 0; i < f.vectors.size(); ++i) {
        CHECK(f.valid[i] == 1);
        CHECK(f.vectors[i].dh == 0.0);
        CHECK(f.vectors[i].dv == 0.0);
    }
}

TEST_CASE("copy concealment of a translating scene leaves the misregistration residual") {
    const testsup::Texture tex = testsup::Texture::make(52);
    const int w = 64, h = 48;
    const Frame prev = testsup::render(tex, w, h);
    const Frame curr = testsup::render(tex, w, h, 3.0, 0.0);
    LossMask mask = LossMask::for_frame(w, h, 16);
    mask.lost[5] = 1;
    const Frame damaged = damage_frame(curr, mask);
    const Frame out = conceal_frame(damaged, prev, copy_conceal(mask, w, h), mask);
    const std::vector<uint8_t> legit = legit_pixel_mask(mask, w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (legit[static_cast<size_t>(y) * w + x]) continue;
            // zero-motion copy reproduces prev, so the error is the frame difference
            CHECK(out.at(x, y) == doctest::Approx(prev.at(x, y)));
            const double residual = curr.at(x, y) - prev.at(x, y);
            CHECK(curr.at(x, y) - out.at(x, y) == doctest::Approx(residual));
        }
    }
}

TEST_CASE("conceal_frame passes legitimate pixels through bit-exact") {
    std::mt19937_64 rng(41);
    const Frame curr = testsup::random_grid(rng, 48, 48, 0.0, 255.0);
    const Frame prev = testsup::random_grid(rng, 48, 48, 0.0, 255.0);
    LossMask mask = LossMask::for_frame(48, 48, 16);
    mask.lost[4] = 1;
    const Frame out = conceal_frame(curr, prev, uniform_field(48, 48, {1.0, 1.0}), mask);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            const bool in_lost = x >= 16 && x < 32 && y >= 16 && y < 32;
            if (!in_lost) CHECK(out.at(x, y) == curr.at(x, y));
        }
    }
}

TEST_CASE("conceal_frame with no lost blocks is the identity") {
    std::mt19937_64 rng(42);
    const Frame curr = testsup::random_grid(rng, 32, 32, 0.0, 255.0);
    const Frame prev = testsup::random_grid(rng, 32, 32, 0.0, 255.0);
    const LossMask mask = LossMask::for_frame(32, 32, 16);
    const Frame out = conceal_frame(curr, prev, MotionField(32, 32), mask);
    CHECK(out.data == curr.data);
}

TEST_CASE("conceal_frame restores a static scene exactly with the zero field") {
    std::mt19937_64 rng(43);
    const Frame original = testsup::random_grid(rng, 48, 48, 0.0, 255.0);
    LossMask mask = LossMask::for_frame(48, 48, 16);
    mask.lost[0] = mask.lost[8] = 1;
    const Frame damaged = damage_frame(original, mask);
    const Frame out = conceal_frame(damaged, original, copy_conceal(mask, 48, 48), mask);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out.data[i] == original.data[i]);
}

TEST_CASE("damage_frame zeroes exactly the lost blocks") {
    std::mt19937_64 rng(44);
    const Frame original = testsup::random_grid(rng, 40, 24, 1.0, 255.0);
    LossMask mask = LossMask::for_frame(40, 24, 16);
    mask.lost[1] = 1;
    const Frame damaged = damage_frame(original, mask);
    int zeroed = 0;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 40; ++x)
            if (damaged.at(x, y) == 0.0) ++zeroed;
    CHECK(zeroed == count_lost_pixels(mask, 40, 24));
}

TEST_CASE("bregman_conceal with no loss and registered frames gives a zero field and tiny Q") {
    const testsup::Texture tex = testsup::Texture::make(45);
    const Frame f = testsup::render(tex, 48, 48);
    const LossMask mask = LossMask::for_frame(48, 48, 16);
    const BregmanConcealResult r = bregman_conceal(f, f, mask, {}, {});
    CHECK(r.trace.converged);
    CHECK(r.trace.final_q <= 1e-9);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            CHECK(r.field.is_valid(x, y));
            CHECK(std::abs(r.field.vec(x, y).dh) < 1e-6);
            CHECK(std::abs(r.field.vec(x, y).dv) < 1e-6);
        }
    }
}

TEST_CASE("bregman_conceal fills lost blocks of a uniform translation") {
    const testsup::Texture tex = testsup::Texture::make(46);
    const int w = 96, h = 64;
    const Frame prev = testsup::render(tex, w, h);
    const Frame curr = testsup::render(tex, w, h, 2.0, 0.0);
    LossMask mask = LossMask::for_frame(w, h, 16);
    mask.lost[9] = 1;  // block (col 3, row 1), interior
    mask.lost[14] = 1; // block (col 2, row 2), interior
    const Frame damaged = damage_frame(curr, mask);
    const BregmanConcealResult r = bregman_conceal(damaged, prev, mask, {}, {});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (legit_pixel_mask(mask, w, h)[i]) continue;
            CHECK(std::abs(r.field.vec(x, y).dh - 2.0) < 0.5);
            CHECK(std::abs(r.field.vec(x, y).dv - 0.0) < 0.5);
        }
    }
}

TEST_CASE("bregman_conceal in-fills a lost block from its own region, not the global mean") {
    const testsup::Texture left_tex = testsup::Texture::make(47);
    const testsup::Texture right_tex = testsup::Texture::make(48);
    const int w = 96, h = 64;
    auto render_pair = [&](double t) {
        Frame f(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                f.at(x, y) = x < w / 2 ? left_tex(x - 2.0 * t, y) : right_tex(x + 1.0 * t, y - 1.0 * t);
        return f;
    };
    const Frame prev = render_pair(0.0);
    const Frame curr = render_pair(1.0);
    LossMask mask = LossMask::for_frame(w, h, 16);
    // block (col 1, row 1): x in [16,32), strictly inside the left region
    mask.lost[1 * mask.mb_cols + 1] = 1;
    const Frame damaged = damage_frame(curr, mask);
    const BregmanConcealResult r = bregman_conceal(damaged, prev, mask, {}, {});
    for (int y = 16; y < 32; ++y) {
        for (int x = 16; x < 32; ++x) {
            CHECK(std::abs(r.field.vec(x, y).dh - 2.0) < 0.5);
            CHECK(std::abs(r.field.vec(x, y).dv - 0.0) < 0.5);
        }
    }
}

TEST_CASE("bregman_conceal with vanishing alpha reproduces the OLS estimates on a lossless frame") {
    const testsup::Texture tex = testsup::Texture::make(49);
    const Frame prev = testsup::render(tex, 48, 48);
    const Frame curr = testsup::render(tex, 48, 48, 1.0, -1.0);
    const LossMask mask = LossMask::for_frame(48, 48, 16);
    EstimationConfig est_cfg;
    const MotionField ols = estimate_field(curr, prev, legit_pixel_mask(mask, 48, 48), est_cfg);
    BregmanConfig cfg;
    cfg.alpha = 1e-8;
    const BregmanConcealResult r = bregman_conceal(curr, prev, mask, est_cfg, cfg);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            if (!ols.is_valid(x, y)) continue;
            CHECK(std::abs(r.field.vec(x, y).dh - ols.vec(x, y).dh) < 1e-3);
            CHECK(std::abs(r.field.vec(x, y).dv - ols.vec(x, y).dv) < 1e-3);
        }
    }
}

TEST_CASE("all concealment fields respect the displacement bound") {
    const testsup::Texture tex = testsup::Texture::make(50);
    const Frame prev = testsup::render(tex, 64, 48);
    const Frame curr = testsup::render(tex, 64, 48, 3.0, 2.0);
    LossMask mask = simulate_loss(3, 4, 0.3, 77);
    mask.mb_size = 16;
    const Frame damaged = damage_frame(curr, mask);
    EstimationConfig est_cfg;
    est_cfg.d_max = 2.0;
    const BregmanConcealResult breg = bregman_conceal(damaged, prev, mask, est_cfg, {});
    const MotionField est = estimate_field(damaged, prev, legit_pixel_mask(mask, 64, 48), est_cfg);
    const MotionField avg = avgn_conceal(est, mask);
    for (size_t i = 0; i < breg.field.vectors.size(); ++i) {
        CHECK(std::abs(breg.field.vectors[i].dh) <= 2.0);
        CHECK(std::abs(breg.field.vectors[i].dv) <= 2.0);
        CHECK(std::abs(avg.vectors[i].dh) <= 2.0);
        CHECK(std::abs(avg.vectors[i].dv) <= 2.0);
    }
}

TEST_CASE("select_alpha returns the single grid element") {
    const testsup::Texture tex = testsup::Texture::make(51);
    const Frame prev = testsup::render(tex, 48, 48);
    const Frame curr = testsup::render(tex, 48, 48, 1.0, 0.0);
    const LossMask mask = LossMask::for_frame(48, 48, 16);
    const double grid[] = {0.25};
    const AlphaSearchResult r = select_alpha(curr, prev, mask, {}, {}, grid);
    CHECK(r.best_alpha == 0.25);
    REQUIRE(r.scores.size() == 1);
    CHECK(r.scores[0].alpha == 0.25);
}

TEST_CASE("select_alpha rejects an empty or nonpositive grid") {
    const Frame f(16, 16, 100.0);
    const LossMask mask = LossMask::for_frame(16, 16, 16);
    CHECK_THROWS_AS(select_alpha(f, f, mask, {}, {}, {}), DomainError);
    const double bad[] = {1.0, 0.0};
    CHECK_THROWS_AS(select_alpha(f, f, mask, {}, {}, bad), DomainError);
}

} // TEST_SUITE
