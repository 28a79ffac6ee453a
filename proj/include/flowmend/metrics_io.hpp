#pragma once

#include "flowmend/conceal.hpp"
#include "flowmend/imaging.hpp"

#include <span>
#include <string>
#include <vector>

namespace flowmend {

// 10 log10(255^2 MN / ||w - w_hat||^2), capped at 99.0 dB for a zero residual.
double psnr(const Frame& original, const Frame& restored);

// Binary PGM (P5), maxval 255. Intensities are clamped to [0, 255] and rounded
// half away from zero on write.
Frame read_pgm(const std::string& path);
void write_pgm(const Frame& frame, const std::string& path);

// Y plane of the indexed frame of a raw planar 4:2:0 file; chroma is skipped.
Frame read_yuv420_luma(const std::string& path, int width, int height, int frame_index);

// CSV: frame,method,psnr_db,lost_mbs,outer_iters,final_q with rows ordered by
// (frame, method name) and reals printed with 6 decimals.
void write_report(std::span<const ConcealmentReport> reports, const std::string& path);

// Loss-mask text format: "mb_size cols rows" then one lost MBA per line,
// ascending.
LossMask read_loss_mask(const std::string& path);
void write_loss_mask(const LossMask& mask, const std::string& path);

// A frame sequence on disk: either a directory of same-sized PGM files
// (lexicographic order) or one raw 4:2:0 file with explicit geometry.
struct SequenceSource {
    enum class Format { pgm_directory, raw_yuv420 };
    Format format = Format::pgm_directory;
    std::string path;
    int width = 0;
    int height = 0;
    int frame_count = 0;
    std::vector<std::string> pgm_files;
};

// Resolves geometry and frame count; max_frames < 0 means all available.
SequenceSource open_sequence(const std::string& path, bool raw, int raw_width, int raw_height,
                             int max_frames);
Frame load_frame(const SequenceSource& source, int index);

} // namespace flowmend
