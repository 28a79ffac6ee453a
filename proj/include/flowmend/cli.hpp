#pragma once

#include <cstdint>
#include <string>

namespace flowmend {

// Settings shared by the simulate/conceal/evaluate commands. Defaults follow
// the evaluation protocol: q = 1, gamma = 0.8, 5% loss, 16x16 macroblocks.
struct RunConfig {
    std::string input;
    bool raw = false;
    int raw_width = 0;
    int raw_height = 0;
    int frames = -1; // -1: all available

    std::string output_dir;
    std::string method = "bregman"; // bregman | avgn | copy | zero-fill | all
    double loss_rate = 0.05;
    uint64_t seed = 1;
    std::string mask_in;  // directory of mask_%04d.txt files
    std::string mask_out; // directory to write the masks actually used

    double q = 1.0;
    double gamma = 0.8;
    double alpha = 1.0;
    std::string alpha_mode = "fixed"; // fixed | search
    int mb_size = 16;

    double d_max = 15.0;
    int window_half = 2;
    double outer_tol = 1e-6;
    double inner_tol = 1e-8;
    int outer_max = 100;
    int inner_max = 200;

    std::string report_path;
};

// Writes one loss mask per inter frame (seed + frame index) into output_dir and
// prints a total/lost summary line.
void cmd_simulate(const RunConfig& cfg);

// Runs the concealment pipeline frame by frame. Frame 0 is the intact intra
// reference; each method chains on its own reconstructed frames. Writes
// <method>_NNNN.pgm into output_dir plus the CSV report when requested.
void cmd_conceal(const RunConfig& cfg);

// Per-frame, per-method PSNR of the concealed sequences in output_dir against
// the originals; writes frame,method,psnr_db CSV rows.
void cmd_evaluate(const RunConfig& cfg);

// Mask filename for inter frame k, relative to a directory.
std::string mask_file_name(int frame_index);
// Concealed frame filename for a method and frame index.
std::string frame_file_name(const std::string& method, int frame_index);

} // namespace flowmend
