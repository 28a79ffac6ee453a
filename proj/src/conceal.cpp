#include "flowmend/conceal.hpp"

#include "flowmend/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace flowmend {

namespace {

// Platform-stable uniform draw in [0, 1).
double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct BlockRange {
    int x0, x1, y0, y1;
};

BlockRange block_pixels(const LossMask& mask, int col, int row, int width, int height) {
    return {col * mask.mb_size, std::min((col + 1) * mask.mb_size, width),
            row * mask.mb_size, std::min((row + 1) * mask.mb_size, height)};
}

// Reference construction: 3x3 neighborhood mean of y over weighted cells, then
// synchronous outward passes that average already-filled references until the
// whole grid is covered. Cells never reached (no observations at all) take the
// fallback value.
Grid diffuse_reference(const Grid& y, const Grid& weight, double fallback, double floor) {
    const int w = y.width, h = y.height;
    Grid ref(w, h, fallback);
    std::vector<uint8_t> filled(y.size(), 0);

    bool all_filled = true;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double sum = 0.0;
            int count = 0;
            for (int di = std::max(0, i - 1); di <= std::min(h - 1, i + 1); ++di) {
                for (int dj = std::max(0, j - 1); dj <= std::min(w - 1, j + 1); ++dj) {
                    if (weight.at(dj, di) > 0.0) {
                        sum += y.at(dj, di);
                        ++count;
                    }
                }
            }
            if (count > 0) {
                ref.at(j, i) = sum / count;
                filled[static_cast<size_t>(i) * w + j] = 1;
            } else {
                all_filled = false;
            }
        }
    }

    while (!all_filled) {
        Grid next_ref = ref;
        std::vector<uint8_t> next_filled = filled;
        bool progressed = false;
        all_filled = true;
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                if (filled[static_cast<size_t>(i) * w + j]) continue;
                double sum = 0.0;
                int count = 0;
                for (int di = std::max(0, i - 1); di <= std::min(h - 1, i + 1); ++di) {
                    for (int dj = std::max(0, j - 1); dj <= std::min(w - 1, j + 1); ++dj) {
                        if (filled[static_cast<size_t>(di) * w + dj]) {
                            sum += ref.at(dj, di);
                            ++count;
                        }
                    }
                }
                if (count > 0) {
                    next_ref.at(j, i) = sum / count;
                    next_filled[static_cast<size_t>(i) * w + j] = 1;
                    progressed = true;
                } else {
                    all_filled = false;
                }
            }
        }
        ref = std::move(next_ref);
        filled = std::move(next_filled);
        if (!progressed) break; // nothing observed anywhere; fallback stands
    }

    for (double& v : ref.data) v = std::max(v, floor);
    return ref;
}

struct ComponentSolve {
    Grid solution; // shifted domain
    int outer = 0;
    double final_q = 0.0;
    bool converged = true;
};

ComponentSolve refine_component(const Grid& y, const Grid& weight, double s0, double d_max,
                                const BregmanConfig& cfg) {
    RegularizedProblem prob;
    prob.width = y.width;
    prob.height = y.height;
    prob.y = y;
    prob.weight = weight;
    prob.kernel = Kernel::identity();
    prob.reference = diffuse_reference(y, weight, s0, cfg.epsilon_floor);

    ComponentSolve out;
    SolveResult first = newton_solve(prob, cfg, prob.reference);
    out.outer = static_cast<int>(first.trace.size());
    out.converged = first.converged;

    // Adaptive reference refresh: the solved field, clamped back to the valid
    // displacement range, becomes the reference for one more solve.
    Grid refreshed = first.solution;
    for (double& v : refreshed.data)
        v = std::max(std::min(v, s0 + d_max), std::max(s0 - d_max, cfg.epsilon_floor));
    prob.reference = refreshed;

    SolveResult second = newton_solve(prob, cfg, refreshed);
    out.outer += static_cast<int>(second.trace.size());
    out.converged = out.converged && second.converged;
    out.final_q = second.trace.empty() ? second.initial_q : second.trace.back().q_value;
    out.solution = std::move(second.solution);
    return out;
}

// Shared by bregman_conceal and select_alpha: solve both displacement
// components of an estimated field, optionally excluding held-out pixels from
// the data term.
BregmanConcealResult refine_field(const MotionField& est, double d_max, const BregmanConfig& cfg,
                                  const std::vector<uint8_t>* exclude) {
    const int w = est.width, h = est.height;
    const double s0 = d_max + 1.0;

    Grid weight(w, h, 0.0);
    Grid yh(w, h, s0);
    Grid yv(w, h, s0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (!est.valid[i]) continue;
            if (exclude && (*exclude)[i]) continue;
            weight.at(x, y) = 1.0;
            yh.at(x, y) = est.vectors[i].dh + s0;
            yv.at(x, y) = est.vectors[i].dv + s0;
        }
    }

    const ComponentSolve ch = refine_component(yh, weight, s0, d_max, cfg);
    const ComponentSolve cv = refine_component(yv, weight, s0, d_max, cfg);

    BregmanConcealResult result;
    result.field = MotionField(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            DisplacementVector d;
            d.dh = std::clamp(ch.solution.at(x, y) - s0, -d_max, d_max);
            d.dv = std::clamp(cv.solution.at(x, y) - s0, -d_max, d_max);
            result.field.set(x, y, d, true);
        }
    }
    result.trace.total_outer = ch.outer + cv.outer;
    result.trace.final_q = ch.final_q + cv.final_q;
    result.trace.converged = ch.converged && cv.converged;
    return result;
}

} // namespace

LossMask LossMask::for_frame(int frame_width, int frame_height, int mb_size) {
    if (frame_width < 1 || frame_height < 1 || mb_size < 1)
        throw ShapeError("LossMask: bad frame geometry");
    LossMask m;
    m.mb_size = mb_size;
    m.mb_cols = (frame_width + mb_size - 1) / mb_size;
    m.mb_rows = (frame_height + mb_size - 1) / mb_size;
    m.lost.assign(static_cast<size_t>(m.mb_cols) * m.mb_rows, 0);
    return m;
}

int LossMask::lost_count() const {
    int n = 0;
    for (uint8_t v : lost) n += v != 0;
    return n;
}

const char* method_name(Method m) {
    switch (m) {
        case Method::bregman: return "bregman";
        case Method::avgn: return "avgn";
        case Method::copy: return "copy";
        case Method::zero_fill: return "zero-fill";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    if (name == "bregman") return Method::bregman;
    if (name == "avgn") return Method::avgn;
    if (name == "copy") return Method::copy;
    if (name == "zero-fill") return Method::zero_fill;
    return std::nullopt;
}

LossMask simulate_loss(int mb_rows, int mb_cols, double loss_rate, uint64_t seed) {
    if (!(loss_rate >= 0.0 && loss_rate <= 1.0))
        throw DomainError("simulate_loss: loss_rate must be in [0, 1]");
    LossMask m;
    m.mb_cols = mb_cols;
    m.mb_rows = mb_rows;
    m.lost.assign(static_cast<size_t>(mb_cols) * mb_rows, 0);
    std::mt19937_64 rng(seed);
    for (auto& cell : m.lost)
        cell = u01(rng) < loss_rate ? 1 : 0;
    return m;
}

std::vector<uint8_t> legit_pixel_mask(const LossMask& mask, int width, int height) {
    std::vector<uint8_t> legit(static_cast<size_t>(width) * height, 1);
    for (int row = 0; row < mask.mb_rows; ++row) {
        for (int col = 0; col < mask.mb_cols; ++col) {
            if (!mask.is_lost(col, row)) continue;
            const BlockRange b = block_pixels(mask, col, row, width, height);
            for (int y = b.y0; y < b.y1; ++y)
                for (int x = b.x0; x < b.x1; ++x)
                    legit[static_cast<size_t>(y) * width + x] = 0;
        }
    }
    return legit;
}

Frame damage_frame(const Frame& frame, const LossMask& mask, double fill) {
    Frame out = frame;
    for (int row = 0; row < mask.mb_rows; ++row) {
        for (int col = 0; col < mask.mb_cols; ++col) {
            if (!mask.is_lost(col, row)) continue;
            const BlockRange b = block_pixels(mask, col, row, frame.width, frame.height);
            for (int y = b.y0; y < b.y1; ++y)
                for (int x = b.x0; x < b.x1; ++x)
                    out.at(x, y) = fill;
        }
    }
    return out;
}

MotionField avgn_conceal(const MotionField& field, const LossMask& mask) {
    const int w = field.width, h = field.height;

    // Block-mean motion of every available (not lost, has at least one valid
    // pixel) macroblock.
    std::vector<DisplacementVector> block_mean(mask.block_count());
    std::vector<uint8_t> block_has_mean(mask.block_count(), 0);
    for (int row = 0; row < mask.mb_rows; ++row) {
        for (int col = 0; col < mask.mb_cols; ++col) {
            if (mask.is_lost(col, row)) continue;
            const BlockRange b = block_pixels(mask, col, row, w, h);
            double sh = 0.0, sv = 0.0;
            int count = 0;
            for (int y = b.y0; y < b.y1; ++y) {
                for (int x = b.x0; x < b.x1; ++x) {
                    if (!field.is_valid(x, y)) continue;
                    sh += field.vec(x, y).dh;
                    sv += field.vec(x, y).dv;
                    ++count;
                }
            }
            if (count > 0) {
                const size_t mba = static_cast<size_t>(row) * mask.mb_cols + col;
                block_mean[mba] = {sh / count, sv / count};
                block_has_mean[mba] = 1;
            }
        }
    }

    MotionField out = field;
    for (int row = 0; row < mask.mb_rows; ++row) {
        for (int col = 0; col < mask.mb_cols; ++col) {
            if (!mask.is_lost(col, row)) continue;
            double sh = 0.0, sv = 0.0;
            int count = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int nr = row + dr, nc = col + dc;
                    if (nr < 0 || nr >= mask.mb_rows || nc < 0 || nc >= mask.mb_cols) continue;
                    if (mask.is_lost(nc, nr)) continue;
                    const size_t mba = static_cast<size_t>(nr) * mask.mb_cols + nc;
                    if (!block_has_mean[mba]) continue;
                    sh += block_mean[mba].dh;
                    sv += block_mean[mba].dv;
                    ++count;
                }
            }
            const DisplacementVector fill =
                count > 0 ? DisplacementVector{sh / count, sv / count} : DisplacementVector{};
            const BlockRange b = block_pixels(mask, col, row, w, h);
            for (int y = b.y0; y < b.y1; ++y)
                for (int x = b.x0; x < b.x1; ++x)
                    out.set(x, y, fill, true);
        }
    }
    return out;
}

MotionField copy_conceal(const LossMask& mask, int width, int height) {
    (void)mask;
    MotionField field(width, height);
    std::fill(field.valid.begin(), field.valid.end(), uint8_t{1});
    return field;
}

BregmanConcealResult bregman_conceal(const Frame& curr, const Frame& prev, const LossMask& mask,
                                     const EstimationConfig& est_cfg, const BregmanConfig& breg_cfg) {
    if (!curr.same_shape(prev)) throw ShapeError("bregman_conceal: frame shapes differ");
    const std::vector<uint8_t> legit = legit_pixel_mask(mask, curr.width, curr.height);
    const MotionField est = estimate_field(curr, prev, legit, est_cfg);
    return refine_field(est, est_cfg.d_max, breg_cfg, nullptr);
}

Frame conceal_frame(const Frame& curr_damaged, const Frame& prev, const MotionField& field,
                    const LossMask& mask) {
    if (!curr_damaged.same_shape(prev)) throw ShapeError("conceal_frame: frame shapes differ");
    if (field.width != curr_damaged.width || field.height != curr_damaged.height)
        throw ShapeError("conceal_frame: field shape mismatch");

    Frame out = curr_damaged;
    for (int row = 0; row < mask.mb_rows; ++row) {
        for (int col = 0; col < mask.mb_cols; ++col) {
            if (!mask.is_lost(col, row)) continue;
            const BlockRange b = block_pixels(mask, col, row, out.width, out.height);
            for (int y = b.y0; y < b.y1; ++y) {
                for (int x = b.x0; x < b.x1; ++x) {
                    if (field.is_valid(x, y)) {
                        const DisplacementVector& d = field.vec(x, y);
                        out.at(x, y) = bilinear_sample(prev, {x - d.dh, y - d.dv});
                    } else {
                        out.at(x, y) = prev.at(x, y);
                    }
                }
            }
        }
    }
    return out;
}

AlphaSearchResult select_alpha(const Frame& curr, const Frame& prev, const LossMask& mask,
                               const EstimationConfig& est_cfg, const BregmanConfig& breg_cfg,
                               std::span<const double> alpha_grid, uint64_t holdout_seed) {
    if (alpha_grid.empty()) throw DomainError("select_alpha: empty alpha grid");
    for (double a : alpha_grid)
        if (!(a > 0.0)) throw DomainError("select_alpha: alphas must be > 0");

    const std::vector<uint8_t> legit = legit_pixel_mask(mask, curr.width, curr.height);
    const MotionField est = estimate_field(curr, prev, legit, est_cfg);

    std::vector<uint8_t> holdout(est.valid.size(), 0);
    std::mt19937_64 rng(holdout_seed);
    std::vector<size_t> held;
    for (size_t i = 0; i < est.valid.size(); ++i) {
        if (!est.valid[i]) continue;
        if (u01(rng) < 0.10) {
            holdout[i] = 1;
            held.push_back(i);
        }
    }

    AlphaSearchResult result;
    result.best_alpha = alpha_grid.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (double alpha : alpha_grid) {
        BregmanConfig cfg = breg_cfg;
        cfg.alpha = alpha;
        const BregmanConcealResult refined = refine_field(est, est_cfg.d_max, cfg, &holdout);

        double mse = 0.0;
        for (size_t i : held) {
            const int x = static_cast<int>(i % curr.width);
            const int y = static_cast<int>(i / curr.width);
            const double r = dfd(curr, prev, {static_cast<double>(x), static_cast<double>(y)},
                                 refined.field.vec(x, y));
            mse += r * r;
        }
        if (!held.empty()) mse /= static_cast<double>(held.size());

        result.scores.push_back({alpha, mse});
        if (mse < best_score || (mse == best_score && alpha > result.best_alpha)) {
            best_score = mse;
            result.best_alpha = alpha;
        }
    }
    return result;
}

} // namespace flowmend
