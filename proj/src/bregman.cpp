#include "flowmend/bregman.hpp"

#include "flowmend/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flowmend {

namespace {

int clampi(int i, int n) {
    return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

// Entry of the clamped correlation operator: d(B x)(i,j) / d x(r,s). At the
// borders several stencil taps can land on the same cell, so this is a sum.
double stencil_weight(const Kernel& k, int r, int s, int i, int j, int w, int h) {
    const int n = k.half_width;
    double acc = 0.0;
    for (int dk = -n; dk <= n; ++dk) {
        if (clampi(i + dk, h) != r) continue;
        for (int dl = -n; dl <= n; ++dl) {
            if (clampi(j + dl, w) != s) continue;
            acc += k.at(dk, dl);
        }
    }
    return acc;
}

void require_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": grid shapes differ");
}

void require_floor(const Grid& g, double floor, const char* what) {
    for (double v : g.data)
        if (!(v >= floor)) throw DomainError(std::string(what) + ": entry below epsilon floor");
}

double l2_norm(const Grid& g) {
    double acc = 0.0;
    for (double v : g.data) acc += v * v;
    return std::sqrt(acc);
}

} // namespace

void BregmanConfig::validate() const {
    if (!(q > 0.0)) throw DomainError("BregmanConfig: q must be > 0");
    if (!(alpha >= 0.0)) throw DomainError("BregmanConfig: alpha must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("BregmanConfig: gamma must be in (0, 1]");
    if (outer_max < 1 || inner_max < 1) throw DomainError("BregmanConfig: iteration caps must be >= 1");
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw DomainError("BregmanConfig: tolerances must be > 0");
    if (!(epsilon_floor > 0.0)) throw DomainError("BregmanConfig: epsilon_floor must be > 0");
}

Kernel Kernel::identity() {
    Kernel k;
    k.half_width = 0;
    k.taps = {1.0};
    return k;
}

void RegularizedProblem::validate(const BregmanConfig& cfg) const {
    if (width < 1 || height < 1) throw ShapeError("RegularizedProblem: empty grid");
    const size_t n = static_cast<size_t>(width) * height;
    if (y.width != width || y.height != height || y.size() != n)
        throw ShapeError("RegularizedProblem: y shape mismatch");
    if (!y.same_shape(weight) || !y.same_shape(reference))
        throw ShapeError("RegularizedProblem: weight/reference shape mismatch");
    if (kernel.half_width < 0) throw DomainError("RegularizedProblem: kernel half-width < 0");
    const size_t taps = static_cast<size_t>(kernel.side()) * kernel.side();
    if (kernel.taps.size() != taps) throw ShapeError("RegularizedProblem: kernel tap count mismatch");
    for (double t : kernel.taps)
        if (!std::isfinite(t)) throw DomainError("RegularizedProblem: non-finite kernel tap");
    for (double w : weight.data)
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("RegularizedProblem: weights must be finite and >= 0");
    require_floor(reference, cfg.epsilon_floor, "RegularizedProblem reference");
}

double bregman_divergence(const Grid& x_hat, const Grid& x_bar, double q, double floor) {
    if (!(q > 0.0)) throw DomainError("bregman_divergence: q must be > 0");
    require_shape(x_hat, x_bar, "bregman_divergence");
    require_floor(x_hat, floor, "bregman_divergence x_hat");
    require_floor(x_bar, floor, "bregman_divergence x_bar");

    double acc = 0.0;
    for (size_t i = 0; i < x_hat.size(); ++i) {
        const double a = x_hat.data[i];
        const double b = x_bar.data[i];
        const double aq = std::pow(a, q);
        const double bq = std::pow(b, q);
        acc += a * ((aq - bq) / q) - bq * (a - b);
    }
    return acc / (1.0 + q);
}

Grid apply_kernel(const RegularizedProblem& prob, const Grid& g) {
    const int w = prob.width, h = prob.height;
    const int n = prob.kernel.half_width;
    Grid out(w, h);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int k = -n; k <= n; ++k) {
                const int ii = clampi(i + k, h);
                for (int l = -n; l <= n; ++l) {
                    acc += prob.kernel.at(k, l) * g.at(clampi(j + l, w), ii);
                }
            }
            out.at(j, i) = acc;
        }
    }
    return out;
}

Grid apply_kernel_adjoint(const RegularizedProblem& prob, const Grid& g) {
    const int w = prob.width, h = prob.height;
    const int n = prob.kernel.half_width;
    Grid out(w, h);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double v = g.at(j, i);
            if (v == 0.0) continue;
            for (int k = -n; k <= n; ++k) {
                const int ii = clampi(i + k, h);
                for (int l = -n; l <= n; ++l) {
                    out.at(clampi(j + l, w), ii) += prob.kernel.at(k, l) * v;
                }
            }
        }
    }
    return out;
}

double q_functional(const RegularizedProblem& prob, const BregmanConfig& cfg, const Grid& x_hat) {
    prob.validate(cfg);
    if (x_hat.width != prob.width || x_hat.height != prob.height)
        throw ShapeError("q_functional: iterate shape mismatch");
    require_floor(x_hat, cfg.epsilon_floor, "q_functional x_hat");

    const Grid bx = apply_kernel(prob, x_hat);
    double data = 0.0;
    for (size_t i = 0; i < bx.size(); ++i) {
        const double r = prob.y.data[i] - bx.data[i];
        data += prob.weight.data[i] * r * r;
    }
    if (cfg.alpha == 0.0) return data;
    return data + cfg.alpha * bregman_divergence(x_hat, prob.reference, cfg.q, cfg.epsilon_floor);
}

Grid q_gradient(const RegularizedProblem& prob, const BregmanConfig& cfg, const Grid& x_hat) {
    prob.validate(cfg);
    if (x_hat.width != prob.width || x_hat.height != prob.height)
        throw ShapeError("q_gradient: iterate shape mismatch");
    require_floor(x_hat, cfg.epsilon_floor, "q_gradient x_hat");

    Grid wr = apply_kernel(prob, x_hat);
    for (size_t i = 0; i < wr.size(); ++i)
        wr.data[i] = prob.weight.data[i] * (prob.y.data[i] - wr.data[i]);

    Grid f = apply_kernel_adjoint(prob, wr);
    for (double& v : f.data) v *= -2.0;

    if (cfg.alpha != 0.0) {
        for (size_t i = 0; i < f.data.size(); ++i) {
            const double a = x_hat.data[i];
            const double b = prob.reference.data[i];
            f.data[i] += cfg.alpha * (std::pow(a, cfg.q) - std::pow(b, cfg.q)) / cfg.q;
        }
    }
    return f;
}

double gauss_seidel_sweep(SolverState& state, const RegularizedProblem& prob,
                          const BregmanConfig& cfg, const Grid& F) {
    const int w = prob.width, h = prob.height;
    const int n = prob.kernel.half_width;

    // Correlation of the stencil with the correction, evaluated at one cell
    // against the live (partially updated) delta.
    auto b_delta_at = [&](int i, int j) {
        double acc = 0.0;
        for (int k = -n; k <= n; ++k) {
            const int ii = clampi(i + k, h);
            for (int l = -n; l <= n; ++l)
                acc += prob.kernel.at(k, l) * state.delta.at(clampi(j + l, w), ii);
        }
        return acc;
    };

    const bool q_is_one = cfg.q == 1.0;
    for (int r = 0; r < h; ++r) {
        for (int s = 0; s < w; ++s) {
            double diag = 0.0;
            if (cfg.alpha != 0.0)
                diag = cfg.alpha * (q_is_one ? 1.0 : std::pow(state.x_hat.at(s, r), cfg.q - 1.0));
            double offdiag = 0.0;
            const double d_rs = state.delta.at(s, r);
            for (int i = std::max(0, r - n); i <= std::min(h - 1, r + n); ++i) {
                for (int j = std::max(0, s - n); j <= std::min(w - 1, s + n); ++j) {
                    const double wij = prob.weight.at(j, i);
                    if (wij == 0.0) continue;
                    const double beta = stencil_weight(prob.kernel, r, s, i, j, w, h);
                    if (beta == 0.0) continue;
                    diag += 2.0 * wij * beta * beta;
                    offdiag += 2.0 * wij * beta * (b_delta_at(i, j) - beta * d_rs);
                }
            }
            if (std::abs(diag) < 1e-12)
                throw SingularSystemError("gauss_seidel_sweep: vanishing Jacobian diagonal");
            state.delta.at(s, r) = -(F.at(s, r) + offdiag) / diag;
        }
    }
    state.c += 1;

    // Newton residual F + J * delta with the post-sweep correction.
    Grid bd = apply_kernel(prob, state.delta);
    for (size_t i = 0; i < bd.size(); ++i) bd.data[i] *= prob.weight.data[i];
    Grid jd = apply_kernel_adjoint(prob, bd);
    double residual = 0.0;
    for (size_t i = 0; i < jd.size(); ++i) {
        double v = 2.0 * jd.data[i];
        if (cfg.alpha != 0.0) {
            const double x = state.x_hat.data[i];
            v += cfg.alpha * (q_is_one ? 1.0 : std::pow(x, cfg.q - 1.0)) * state.delta.data[i];
        }
        residual = std::max(residual, std::abs(F.data[i] + v));
    }
    return residual;
}

SolveResult newton_solve(const RegularizedProblem& prob, const BregmanConfig& cfg, const Grid& x0) {
    cfg.validate();
    prob.validate(cfg);
    if (x0.width != prob.width || x0.height != prob.height)
        throw ShapeError("newton_solve: x0 shape mismatch");

    SolveResult result;
    Grid x = x0;
    for (double& v : x.data) v = std::max(v, cfg.epsilon_floor);
    result.initial_q = q_functional(prob, cfg, x);

    for (int t = 0; t < cfg.outer_max; ++t) {
        const Grid F = q_gradient(prob, cfg, x);

        SolverState st;
        st.x_hat = x;
        st.delta = Grid(prob.width, prob.height, 0.0);
        st.t = t;
        st.c = 0;

        int sweeps = 0;
        while (sweeps < cfg.inner_max) {
            const double res = gauss_seidel_sweep(st, prob, cfg, F);
            ++sweeps;
            if (res <= cfg.inner_tol) break;
        }

        const double x_norm = l2_norm(x);
        double update_sq = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            const double step = cfg.gamma * st.delta.data[i];
            update_sq += step * step;
            x.data[i] = std::max(x.data[i] + step, cfg.epsilon_floor);
        }
        const double update_norm = std::sqrt(update_sq);

        result.trace.push_back({q_functional(prob, cfg, x), update_norm, sweeps});
        if (update_norm / std::max(x_norm, 1.0) < cfg.outer_tol) {
            result.converged = true;
            break;
        }
    }

    result.solution = std::move(x);
    return result;
}

std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n) {
    if (static_cast<size_t>(n) * n != a.size() || static_cast<size_t>(n) != b.size())
        throw ShapeError("solve_dense: size mismatch");

    double scale = 1.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    const double tiny = 1e-12 * scale;

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[static_cast<size_t>(r) * n + col]) > std::abs(a[static_cast<size_t>(pivot) * n + col]))
                pivot = r;
        if (std::abs(a[static_cast<size_t>(pivot) * n + col]) < tiny)
            throw SingularSystemError("solve_dense: singular matrix");
        if (pivot != col) {
            for (int j = 0; j < n; ++j)
                std::swap(a[static_cast<size_t>(pivot) * n + j], a[static_cast<size_t>(col) * n + j]);
            std::swap(b[pivot], b[col]);
        }
        const double d = a[static_cast<size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double factor = a[static_cast<size_t>(r) * n + col] / d;
            if (factor == 0.0) continue;
            for (int j = col; j < n; ++j)
                a[static_cast<size_t>(r) * n + j] -= factor * a[static_cast<size_t>(col) * n + j];
            b[r] -= factor * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int j = r + 1; j < n; ++j)
            acc -= a[static_cast<size_t>(r) * n + j] * b[j];
        b[r] = acc / a[static_cast<size_t>(r) * n + r];
    }
    return b;
}

Grid solve_q1_closed_form(const RegularizedProblem& prob, const BregmanConfig& cfg) {
    cfg.validate();
    prob.validate(cfg);
    if (cfg.q != 1.0) throw DomainError("solve_q1_closed_form: requires q = 1");
    const int w = prob.width, h = prob.height;
    const int cells = w * h;
    if (cells > 32 * 32) throw DomainError("solve_q1_closed_form: grid too large for dense assembly");

    const int n = prob.kernel.half_width;
    std::vector<double> a(static_cast<size_t>(cells) * cells, 0.0);

    // A = 2 B^T W B + alpha I, accumulated row by row of B (each observation
    // cell touches at most (2N+1)^2 unknowns).
    std::vector<int> idx;
    std::vector<double> beta;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double wij = prob.weight.at(j, i);
            if (wij == 0.0) continue;
            idx.clear();
            beta.clear();
            for (int r = std::max(0, i - n); r <= std::min(h - 1, i + n); ++r) {
                for (int s = std::max(0, j - n); s <= std::min(w - 1, j + n); ++s) {
                    const double bv = stencil_weight(prob.kernel, r, s, i, j, w, h);
                    if (bv == 0.0) continue;
                    idx.push_back(r * w + s);
                    beta.push_back(bv);
                }
            }
            for (size_t p = 0; p < idx.size(); ++p)
                for (size_t q2 = 0; q2 < idx.size(); ++q2)
                    a[static_cast<size_t>(idx[p]) * cells + idx[q2]] += 2.0 * wij * beta[p] * beta[q2];
        }
    }
    for (int i = 0; i < cells; ++i)
        a[static_cast<size_t>(i) * cells + i] += cfg.alpha;

    Grid wy = prob.y;
    for (size_t i = 0; i < wy.size(); ++i) wy.data[i] *= prob.weight.data[i];
    Grid rhs_grid = apply_kernel_adjoint(prob, wy);
    std::vector<double> rhs(static_cast<size_t>(cells));
    for (int i = 0; i < cells; ++i)
        rhs[i] = 2.0 * rhs_grid.data[i] + cfg.alpha * prob.reference.data[i];

    std::vector<double> sol = solve_dense(std::move(a), std::move(rhs), cells);
    Grid out(w, h);
    out.data.assign(sol.begin(), sol.end());
    return out;
}

} // namespace flowmend
