#include "flowmend/cli.hpp"
#include "flowmend/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

// --raw WxH
std::pair<int, int> parse_geometry(const std::string& s) {
    const size_t x = s.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--raw expects WxH, e.g. 176x144");
    try {
        return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--raw expects WxH, e.g. 176x144");
    }
}

void add_common_flags(CLI::App* cmd, flowmend::RunConfig& cfg, std::string& raw_geometry) {
    cmd->add_option("--input", cfg.input, "PGM directory or raw 4:2:0 file")->required();
    cmd->add_option("--raw", raw_geometry, "treat input as raw 4:2:0 with geometry WxH");
    cmd->add_option("--frames", cfg.frames, "number of frames to process");
    cmd->add_option("--output", cfg.output_dir, "output directory");
    cmd->add_option("--seed", cfg.seed, "loss simulation seed");
    cmd->add_option("--loss-rate", cfg.loss_rate, "macroblock loss probability");
    cmd->add_option("--mb-size", cfg.mb_size, "macroblock size in pixels");
    cmd->add_option("--mask-in", cfg.mask_in, "directory of loss masks to apply");
    cmd->add_option("--mask-out", cfg.mask_out, "directory to write the masks used");
    cmd->add_option("--report", cfg.report_path, "CSV report path");
}

void add_solver_flags(CLI::App* cmd, flowmend::RunConfig& cfg) {
    cmd->add_option("--method", cfg.method, "bregman | avgn | copy | zero-fill | all");
    cmd->add_option("--q", cfg.q, "divergence exponent");
    cmd->add_option("--gamma", cfg.gamma, "relaxation factor");
    cmd->add_option("--alpha", cfg.alpha, "regularization weight");
    cmd->add_option("--alpha-mode", cfg.alpha_mode, "fixed | search")
        ->check(CLI::IsMember({"fixed", "search"}));
    cmd->add_option("--d-max", cfg.d_max, "displacement bound in pixels");
    cmd->add_option("--window-half", cfg.window_half, "observation window half-width");
    cmd->add_option("--outer-tol", cfg.outer_tol, "Newton relative-update tolerance");
    cmd->add_option("--inner-tol", cfg.inner_tol, "Gauss-Seidel residual tolerance");
    cmd->add_option("--outer-max", cfg.outer_max, "max Newton iterations");
    cmd->add_option("--inner-max", cfg.inner_max, "max Gauss-Seidel sweeps");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"macroblock loss concealment via motion refinement and regularized smoothing"};
    app.set_config("--config");
    app.require_subcommand(1);

    flowmend::RunConfig cfg;
    std::string raw_geometry;

    CLI::App* simulate = app.add_subcommand("simulate", "write seeded per-frame loss masks");
    add_common_flags(simulate, cfg, raw_geometry);

    CLI::App* conceal = app.add_subcommand("conceal", "conceal lost macroblocks frame by frame");
    add_common_flags(conceal, cfg, raw_geometry);
    add_solver_flags(conceal, cfg);

    CLI::App* evaluate = app.add_subcommand("evaluate", "per-frame PSNR of concealed sequences");
    add_common_flags(evaluate, cfg, raw_geometry);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!raw_geometry.empty()) {
            const auto [w, h] = parse_geometry(raw_geometry);
            cfg.raw = true;
            cfg.raw_width = w;
            cfg.raw_height = h;
        }
        if (simulate->parsed()) flowmend::cmd_simulate(cfg);
        if (conceal->parsed()) flowmend::cmd_conceal(cfg);
        if (evaluate->parsed()) flowmend::cmd_evaluate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
