#pragma once

#include "flowmend/bregman.hpp"
#include "flowmend/imaging.hpp"
#include "flowmend/motion.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowmend {

// Macroblock loss pattern. MBA is the row-major block address.
struct LossMask {
    int mb_size = 16;
    int mb_cols = 0;
    int mb_rows = 0;
    std::vector<uint8_t> lost;

    static LossMask for_frame(int frame_width, int frame_height, int mb_size = 16);

    int block_count() const { return mb_cols * mb_rows; }
    bool is_lost(int mb_col, int mb_row) const {
        return lost[static_cast<size_t>(mb_row) * mb_cols + mb_col] != 0;
    }
    int lost_count() const;
};

enum class Method { bregman, avgn, copy, zero_fill };

const char* method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

struct ConcealmentReport {
    int frame_index = 0;
    Method method = Method::bregman;
    double psnr_db = 0.0;
    int lost_mb_count = 0;
    int solver_outer_iters = 0; // 0 for baselines
    double final_q = 0.0;       // bregman only
};

// Marks each macroblock lost independently with probability loss_rate.
// Identical (dims, rate, seed) always produce the identical mask.
LossMask simulate_loss(int mb_rows, int mb_cols, double loss_rate, uint64_t seed);

// Per-pixel legitimacy mask induced by the block loss pattern.
std::vector<uint8_t> legit_pixel_mask(const LossMask& mask, int width, int height);

// Copy of the frame with every lost macroblock's pixels set to fill.
Frame damage_frame(const Frame& frame, const LossMask& mask, double fill = 0.0);

// Fills each lost macroblock with the mean of the block-mean motion vectors of
// its available 8-neighbors; blocks with no available neighbor get the zero
// vector. Legitimate blocks pass through untouched.
MotionField avgn_conceal(const MotionField& field, const LossMask& mask);

// Zero-motion baseline: temporal copy of the co-located block.
MotionField copy_conceal(const LossMask& mask, int width, int height);

struct ConcealTrace {
    int total_outer = 0;    // Newton iterations summed over components and passes
    double final_q = 0.0;   // final functional value, both components
    bool converged = true;
};

struct BregmanConcealResult {
    MotionField field;
    ConcealTrace trace;
};

// The full refinement pipeline: estimate motion on legitimate pixels, solve the
// regularized functional per displacement component on the positivity-shifted
// grid with a diffused neighborhood-mean reference, refresh the reference from
// the solution and solve once more. Returns a field valid at every pixel.
BregmanConcealResult bregman_conceal(const Frame& curr, const Frame& prev, const LossMask& mask,
                                     const EstimationConfig& est_cfg, const BregmanConfig& breg_cfg);

// Replaces lost-macroblock pixels with the motion-compensated previous frame;
// legitimate pixels pass through bit-exact.
Frame conceal_frame(const Frame& curr_damaged, const Frame& prev, const MotionField& field,
                    const LossMask& mask);

struct AlphaScore {
    double alpha = 0.0;
    double holdout_mse = 0.0;
};

struct AlphaSearchResult {
    double best_alpha = 0.0;
    std::vector<AlphaScore> scores;
};

// Holds out a seeded 10% of the valid-estimated pixels from the data term, runs
// the refinement per alpha and scores by mean squared DFD of the refined field
// on the held-out pixels. Ties go to the larger alpha.
AlphaSearchResult select_alpha(const Frame& curr, const Frame& prev, const LossMask& mask,
                               const EstimationConfig& est_cfg, const BregmanConfig& breg_cfg,
                               std::span<const double> alpha_grid, uint64_t holdout_seed = 1234);

} // namespace flowmend
