#include "flowmend/cli.hpp"

#include "flowmend/conceal.hpp"
#include "flowmend/errors.hpp"
#include "flowmend/metrics_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <vector>

namespace flowmend {

namespace {

namespace fs = std::filesystem;

EstimationConfig estimation_config(const RunConfig& cfg) {
    EstimationConfig est;
    est.window_half = cfg.window_half;
    est.d_max = cfg.d_max;
    return est;
}

BregmanConfig bregman_config(const RunConfig& cfg) {
    BregmanConfig breg;
    breg.q = cfg.q;
    breg.gamma = cfg.gamma;
    breg.alpha = cfg.alpha;
    breg.outer_tol = cfg.outer_tol;
    breg.inner_tol = cfg.inner_tol;
    breg.outer_max = cfg.outer_max;
    breg.inner_max = cfg.inner_max;
    return breg;
}

void ensure_dir(const std::string& dir, const char* what) {
    if (dir.empty()) throw IoError(std::string(what) + ": no output directory given");
    fs::create_directories(dir);
}

std::vector<Method> selected_methods(const std::string& name) {
    if (name == "all")
        return {Method::bregman, Method::avgn, Method::copy, Method::zero_fill};
    const std::optional<Method> m = parse_method(name);
    if (!m) throw DomainError("unknown method: " + name);
    return {*m};
}

LossMask mask_for_frame(const RunConfig& cfg, const SequenceSource& src, int frame_index) {
    if (!cfg.mask_in.empty()) {
        const LossMask m = read_loss_mask((fs::path(cfg.mask_in) / mask_file_name(frame_index)).string());
        const LossMask shape = LossMask::for_frame(src.width, src.height, m.mb_size);
        if (m.mb_cols != shape.mb_cols || m.mb_rows != shape.mb_rows)
            throw ShapeError("mask grid does not match the sequence geometry");
        return m;
    }
    LossMask m = simulate_loss((src.height + cfg.mb_size - 1) / cfg.mb_size,
                               (src.width + cfg.mb_size - 1) / cfg.mb_size, cfg.loss_rate,
                               cfg.seed + static_cast<uint64_t>(frame_index));
    m.mb_size = cfg.mb_size;
    return m;
}

} // namespace

std::string mask_file_name(int frame_index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "mask_%04d.txt", frame_index);
    return buf;
}

std::string frame_file_name(const std::string& method, int frame_index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.pgm", method.c_str(), frame_index);
    return buf;
}

void cmd_simulate(const RunConfig& cfg) {
    const SequenceSource src = open_sequence(cfg.input, cfg.raw, cfg.raw_width, cfg.raw_height, cfg.frames);
    const std::string out_dir = cfg.mask_out.empty() ? cfg.output_dir : cfg.mask_out;
    ensure_dir(out_dir, "simulate");

    long long total = 0, lost = 0;
    for (int k = 1; k < src.frame_count; ++k) {
        const LossMask m = mask_for_frame(cfg, src, k);
        write_loss_mask(m, (fs::path(out_dir) / mask_file_name(k)).string());
        total += m.block_count();
        lost += m.lost_count();
    }
    std::cout << "frames " << src.frame_count << " total_mbs " << total << " lost_mbs " << lost
              << "\n";
}

void cmd_conceal(const RunConfig& cfg) {
    const SequenceSource src = open_sequence(cfg.input, cfg.raw, cfg.raw_width, cfg.raw_height, cfg.frames);
    ensure_dir(cfg.output_dir, "conceal");
    if (!cfg.mask_out.empty()) ensure_dir(cfg.mask_out, "conceal");

    // Frame 0 is the intra reference; a mask demanding losses there is refused.
    if (!cfg.mask_in.empty()) {
        const fs::path intra_mask = fs::path(cfg.mask_in) / mask_file_name(0);
        if (fs::exists(intra_mask) && read_loss_mask(intra_mask.string()).lost_count() > 0)
            throw DomainError("conceal: frame 0 must be intact (intra losses are not concealed)");
    }

    const std::vector<Method> methods = selected_methods(cfg.method);
    const EstimationConfig est_cfg = estimation_config(cfg);
    const BregmanConfig breg_cfg = bregman_config(cfg);
    const std::array<double, 5> default_alpha_grid = {0.01, 0.1, 1.0, 10.0, 100.0};

    // Per-method reconstructed reference chain, seeded by the intact frame 0.
    const Frame intra = load_frame(src, 0);
    std::map<Method, Frame> reference;
    for (Method m : methods) {
        reference.emplace(m, intra);
        write_pgm(intra, (fs::path(cfg.output_dir) / frame_file_name(method_name(m), 0)).string());
    }

    std::vector<ConcealmentReport> reports;
    for (int k = 1; k < src.frame_count; ++k) {
        const Frame original = load_frame(src, k);
        const LossMask mask = mask_for_frame(cfg, src, k);
        if (!cfg.mask_out.empty())
            write_loss_mask(mask, (fs::path(cfg.mask_out) / mask_file_name(k)).string());
        const Frame damaged = damage_frame(original, mask);

        for (Method m : methods) {
            const Frame& prev = reference.at(m);
            Frame concealed(0, 0);
            ConcealmentReport report;
            report.frame_index = k;
            report.method = m;
            report.lost_mb_count = mask.lost_count();

            switch (m) {
                case Method::zero_fill:
                    concealed = damaged;
                    break;
                case Method::copy:
                    concealed = conceal_frame(damaged, prev, copy_conceal(mask, src.width, src.height), mask);
                    break;
                case Method::avgn: {
                    const MotionField field =
                        estimate_field(damaged, prev, legit_pixel_mask(mask, src.width, src.height), est_cfg);
                    concealed = conceal_frame(damaged, prev, avgn_conceal(field, mask), mask);
                    break;
                }
                case Method::bregman: {
                    BregmanConfig solve_cfg = breg_cfg;
                    if (cfg.alpha_mode == "search") {
                        const AlphaSearchResult pick = select_alpha(damaged, prev, mask, est_cfg,
                                                                    breg_cfg, default_alpha_grid);
                        solve_cfg.alpha = pick.best_alpha;
                    }
                    const BregmanConcealResult r = bregman_conceal(damaged, prev, mask, est_cfg, solve_cfg);
                    if (!r.trace.converged)
                        std::cerr << "warning: solver did not converge on frame " << k << "\n";
                    report.solver_outer_iters = r.trace.total_outer;
                    report.final_q = r.trace.final_q;
                    concealed = conceal_frame(damaged, prev, r.field, mask);
                    break;
                }
            }

            report.psnr_db = psnr(original, concealed);
            reports.push_back(report);
            write_pgm(concealed, (fs::path(cfg.output_dir) / frame_file_name(method_name(m), k)).string());
            reference.at(m) = std::move(concealed);
        }
    }

    if (!cfg.report_path.empty()) write_report(reports, cfg.report_path);
}

void cmd_evaluate(const RunConfig& cfg) {
    const SequenceSource src = open_sequence(cfg.input, cfg.raw, cfg.raw_width, cfg.raw_height, cfg.frames);
    if (cfg.output_dir.empty()) throw IoError("evaluate: no concealed directory given");
    if (cfg.report_path.empty()) throw IoError("evaluate: no report path given");

    static const std::array<Method, 4> all_methods = {Method::bregman, Method::avgn, Method::copy,
                                                      Method::zero_fill};
    std::ofstream out(cfg.report_path, std::ios::binary);
    if (!out) throw IoError("evaluate: cannot open " + cfg.report_path);
    out << "frame,method,psnr_db\n";

    char line[128];
    for (int k = 0; k < src.frame_count; ++k) {
        const Frame original = load_frame(src, k);
        for (Method m : all_methods) {
            const fs::path file = fs::path(cfg.output_dir) / frame_file_name(method_name(m), k);
            if (!fs::exists(file)) continue;
            const Frame concealed = read_pgm(file.string());
            if (!concealed.same_shape(original))
                throw ShapeError("evaluate: geometry mismatch for " + file.string());
            std::snprintf(line, sizeof(line), "%d,%s,%.6f\n", k, method_name(m),
                          psnr(original, concealed));
            out << line;
        }
    }
    if (!out) throw IoError("evaluate: write failed for " + cfg.report_path);
}

} // namespace flowmend
