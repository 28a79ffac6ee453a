#include "flowmend/motion.hpp"

#include "flowmend/errors.hpp"

#include <algorithm>
#include <cmath>

namespace flowmend {

namespace {

constexpr double kStepTol = 0.01;      // px; refinement stops below this update
constexpr double kMaxCondition = 1e8;  // gate on cond(H^T H)

double clamp_component(double v, double bound) {
    return v < -bound ? -bound : (v > bound ? bound : v);
}

} // namespace

void EstimationConfig::validate() const {
    if (window_half < 1) throw DomainError("EstimationConfig: window_half must be >= 1");
    if (max_refinements < 1) throw DomainError("EstimationConfig: max_refinements must be >= 1");
    if (!(min_gradient_energy > 0.0)) throw DomainError("EstimationConfig: min_gradient_energy must be > 0");
    if (!(d_max > 0.0)) throw DomainError("EstimationConfig: d_max must be > 0");
}

double ObservationSystem::gradient_energy() const {
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i)
        acc += gh[i] * gh[i] + gv[i] * gv[i];
    return acc;
}

ObservationSystem build_observation(const Frame& curr, const Frame& prev, PixelPos center,
                                    DisplacementVector d_pred, const EstimationConfig& cfg,
                                    const std::vector<uint8_t>* usable) {
    ObservationSystem obs;
    obs.window_half = cfg.window_half;
    obs.center = center;

    const int cx = static_cast<int>(std::llround(center.h));
    const int cy = static_cast<int>(std::llround(center.v));
    const int n = cfg.window_half;
    obs.y.reserve(static_cast<size_t>(2 * n + 1) * (2 * n + 1));

    for (int dy = -n; dy <= n; ++dy) {
        const int py = cy + dy;
        if (py < 0 || py >= curr.height) continue;
        for (int dx = -n; dx <= n; ++dx) {
            const int px = cx + dx;
            if (px < 0 || px >= curr.width) continue;
            if (usable && !(*usable)[static_cast<size_t>(py) * curr.width + px]) continue;
            const PixelPos p{static_cast<double>(px), static_cast<double>(py)};
            const PixelPos displaced{p.h - d_pred.dh, p.v - d_pred.dv};
            const SpatialGradient g = spatial_gradient(prev, displaced);
            obs.y.push_back(curr.at(px, py) - bilinear_sample(prev, displaced));
            obs.gh.push_back(-g.gh);
            obs.gv.push_back(-g.gv);
        }
    }
    return obs;
}

std::optional<DisplacementVector> ols_update(const ObservationSystem& obs) {
    double a = 0.0, b = 0.0, c = 0.0, r1 = 0.0, r2 = 0.0;
    for (size_t i = 0; i < obs.rows(); ++i) {
        a += obs.gh[i] * obs.gh[i];
        b += obs.gh[i] * obs.gv[i];
        c += obs.gv[i] * obs.gv[i];
        r1 += obs.gh[i] * obs.y[i];
        r2 += obs.gv[i] * obs.y[i];
    }

    // Eigenvalues of the 2x2 SPD normal matrix give the condition estimate.
    const double tr = a + c;
    const double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4.0 * b * b));
    const double lam_max = 0.5 * (tr + disc);
    const double lam_min = 0.5 * (tr - disc);
    if (!(lam_min > 0.0) || lam_max > kMaxCondition * lam_min) return std::nullopt;

    const double det = a * c - b * b;
    if (det <= 0.0) return std::nullopt;
    return DisplacementVector{(c * r1 - b * r2) / det, (a * r2 - b * r1) / det};
}

RefineResult refine_dv(const Frame& curr, const Frame& prev, PixelPos center,
                       DisplacementVector d0, const EstimationConfig& cfg,
                       const std::vector<uint8_t>* usable) {
    cfg.validate();
    DisplacementVector d{clamp_component(d0.dh, cfg.d_max), clamp_component(d0.dv, cfg.d_max)};

    for (int i = 0; i < cfg.max_refinements; ++i) {
        const ObservationSystem obs = build_observation(curr, prev, center, d, cfg, usable);
        if (obs.rows() == 0 || obs.gradient_energy() < cfg.min_gradient_energy)
            return {i == 0 ? d0 : d, false};
        const std::optional<DisplacementVector> x = ols_update(obs);
        if (!x) return {i == 0 ? d0 : d, false};

        d.dh = clamp_component(d.dh + x->dh, cfg.d_max);
        d.dv = clamp_component(d.dv + x->dv, cfg.d_max);
        if (std::hypot(x->dh, x->dv) < kStepTol) return {d, true};
    }
    return {d, false};
}

MotionField estimate_field(const Frame& curr, const Frame& prev,
                           const std::vector<uint8_t>& legit, const EstimationConfig& cfg) {
    if (!curr.same_shape(prev)) throw ShapeError("estimate_field: frame shapes differ");
    if (legit.size() != curr.size()) throw ShapeError("estimate_field: mask size mismatch");

    MotionField field(curr.width, curr.height);
    for (int y = 0; y < curr.height; ++y) {
        for (int x = 0; x < curr.width; ++x) {
            if (!legit[static_cast<size_t>(y) * curr.width + x]) continue;
            const RefineResult r = refine_dv(curr, prev,
                                             {static_cast<double>(x), static_cast<double>(y)},
                                             DisplacementVector{}, cfg, &legit);
            if (r.converged) field.set(x, y, r.d, true);
        }
    }
    return field;
}

} // namespace flowmend
