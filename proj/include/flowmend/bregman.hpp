#pragma once

#include "flowmend/imaging.hpp"

#include <vector>

namespace flowmend {

// Solver knobs. Defaults follow the evaluation protocol (q = 1, gamma = 0.8);
// gamma = 1 is accepted and recovers the undamped Newton step.
struct BregmanConfig {
    double q = 1.0;             // divergence exponent, > 0
    double alpha = 1.0;         // regularization weight, >= 0
    double gamma = 0.8;         // relaxation factor, in (0, 1]
    int outer_max = 100;        // Newton iterations
    int inner_max = 200;        // Gauss-Seidel sweeps per Newton step
    double outer_tol = 1e-6;    // relative-update stopping threshold
    double inner_tol = 1e-8;    // sup-norm residual threshold for the inner solve
    double epsilon_floor = 1e-6;

    void validate() const; // throws DomainError
};

// Small square correlation stencil b(k,l), offsets k,l in [-half_width, half_width].
struct Kernel {
    int half_width = 0;
    std::vector<double> taps; // (2N+1)^2 values, row-major in (k, l)

    static Kernel identity();

    int side() const { return 2 * half_width + 1; }
    double at(int k, int l) const {
        return taps[static_cast<size_t>(k + half_width) * side() + (l + half_width)];
    }
    double& at(int k, int l) {
        return taps[static_cast<size_t>(k + half_width) * side() + (l + half_width)];
    }
};

// Data y, per-cell weights (0 marks unobserved cells), stencil b and reference
// grid for the regularized functional. Grids are rectangular; the stencil uses
// clamp-to-edge indexing.
struct RegularizedProblem {
    int width = 0;
    int height = 0;
    Grid y;
    Grid weight;
    Grid reference;
    Kernel kernel = Kernel::identity();

    void validate(const BregmanConfig& cfg) const; // throws ShapeError / DomainError
};

// Current iterate, inner correction, and counters of one Newton solve.
struct SolverState {
    Grid x_hat;
    Grid delta;
    int t = 0;
    int c = 0;
};

struct OuterRecord {
    double q_value = 0.0;     // Q after the relaxed update
    double update_norm = 0.0; // ||gamma * delta||_2
    int sweeps = 0;
};

struct SolveResult {
    Grid solution;
    std::vector<OuterRecord> trace;
    bool converged = false;
    double initial_q = 0.0;
};

// D_q(x_hat, x_bar): the q-discrepancy Bregman divergence, nonnegative and zero
// iff the grids agree. All entries must be >= floor.
double bregman_divergence(const Grid& x_hat, const Grid& x_bar, double q, double floor = 1e-6);

// Correlation of the problem stencil with a grid, clamp-to-edge, and its exact
// adjoint (the adjoint accounts for the clamped cells, so gradients match
// finite differences of the functional at borders too).
Grid apply_kernel(const RegularizedProblem& prob, const Grid& g);
Grid apply_kernel_adjoint(const RegularizedProblem& prob, const Grid& g);

// The regularized functional: weighted squared residual plus alpha * D_q.
double q_functional(const RegularizedProblem& prob, const BregmanConfig& cfg, const Grid& x_hat);

// Analytic gradient F of the functional:
//   F = -2 B^T W (y - B x_hat) + alpha * (x_hat^q - x_bar^q) / q
Grid q_gradient(const RegularizedProblem& prob, const BregmanConfig& cfg, const Grid& x_hat);

// One raster-order Gauss-Seidel sweep on the Newton system J * delta = -F,
// where J is the Jacobian of F frozen at the current iterate. Updates
// state.delta in place, increments state.c, and returns the sup-norm of
// F + J * delta after the sweep. Throws SingularSystemError on a vanishing
// diagonal entry.
double gauss_seidel_sweep(SolverState& state, const RegularizedProblem& prob,
                          const BregmanConfig& cfg, const Grid& F);

// Newton-Raphson outer loop with Gauss-Seidel inner solves and relaxed update
// x <- max(x + gamma * delta, floor). Stops on the relative update criterion or
// outer_max; converged=false reports the best iterate on exhaustion.
SolveResult newton_solve(const RegularizedProblem& prob, const BregmanConfig& cfg, const Grid& x0);

// Direct dense solve of the q = 1 stationarity system
//   (2 B^T W B + alpha I) x = 2 B^T W y + alpha x_bar
// for grids small enough to assemble densely. Test oracle for newton_solve.
Grid solve_q1_closed_form(const RegularizedProblem& prob, const BregmanConfig& cfg);

// Dense row-major linear solve via LU with partial pivoting; throws
// SingularSystemError on a vanishing pivot.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n);

} // namespace flowmend
