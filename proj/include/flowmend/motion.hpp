#pragma once

#include "flowmend/imaging.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace flowmend {

struct EstimationConfig {
    int window_half = 2;                // 5x5 observation window
    int max_refinements = 10;
    double min_gradient_energy = 1e-4;  // gate on trace(H^T H)
    double d_max = 15.0;                // displacement bound, pixels

    void validate() const; // throws DomainError
};

// Stacked linearized observation system y = H x for one working point. One row
// per in-frame window pixel: y holds the displaced frame difference, (gh, gv)
// the matching row of H (the negated spatial gradient of the previous frame at
// the displaced position, which makes d_pred + x the corrected displacement).
struct ObservationSystem {
    std::vector<double> y;
    std::vector<double> gh;
    std::vector<double> gv;
    int window_half = 0;
    PixelPos center;

    size_t rows() const { return y.size(); }
    // trace(H^T H); near zero means textureless neighborhood.
    double gradient_energy() const;
};

// usable, when given, marks current-frame pixels whose content may enter the
// data vector; rows on unusable (lost) pixels are dropped along with rows
// centered outside the frame. Lost data is absent, never an observation.
ObservationSystem build_observation(const Frame& curr, const Frame& prev, PixelPos center,
                                    DisplacementVector d_pred, const EstimationConfig& cfg,
                                    const std::vector<uint8_t>* usable = nullptr);

// Least-squares update x = (H^T H)^{-1} H^T y via the 2x2 normal equations.
// Returns nullopt when H^T H is singular or has condition estimate above 1e8.
std::optional<DisplacementVector> ols_update(const ObservationSystem& obs);

struct RefineResult {
    DisplacementVector d;
    bool converged = false;
};

// Iterates build_observation + ols_update, accumulating d <- d + x clamped to
// +-d_max, until the update drops below 0.01 px or max_refinements is reached.
RefineResult refine_dv(const Frame& curr, const Frame& prev, PixelPos center,
                       DisplacementVector d0, const EstimationConfig& cfg,
                       const std::vector<uint8_t>* usable = nullptr);

// Dense field over all pixels with legit(x,y) set; lost, degenerate and
// non-converged pixels come back invalid with the zero vector.
MotionField estimate_field(const Frame& curr, const Frame& prev,
                           const std::vector<uint8_t>& legit, const EstimationConfig& cfg);

} // namespace flowmend
