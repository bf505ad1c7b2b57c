#pragma once

#include <limits>
#include <vector>

#include "itpg/refsolver.hpp"

// The inclusion-detection application on an interval conductor: forward
// flux-to-temperature maps for the background and for a conductor with an
// inclusion, the map-gap equation with Tikhonov regularization, the probe
// indicator scan that recovers the inclusion, and the identity linking the
// gap solution to the difference of Green functions.

namespace itpg::sampling {

using refsolver::Mesh;

// conductor on [0,1] with piecewise diffusivity 1 + (k-1) on (d1, d2);
// flux-conservative finite volumes, Crank-Nicolson stepping
class OmegaSolver {
  public:
    OmegaSolver(int n_cells, double dt, double T, double k = 1.0, double d1 = 0.0,
                double d2 = 0.0)
        : n_(n_cells + 1), dt_(dt), T_(T), h_(1.0 / n_cells), k_(k), d1_(d1), d2_(d2) {
        if (d2 > d1) {
            if (d1 <= 0.0 || d2 >= 1.0)
                throw config_error("inclusion must be strictly inside the conductor");
            geometry::Contrast guard(k); // validates k != 1, k > 0
        }
        // face diffusivities: gamma is piecewise constant between nodes
        gamma_face_.resize(n_ - 1);
        for (int i = 0; i + 1 < n_; ++i) {
            double mid = (x(i) + x(i + 1)) / 2.0;
            gamma_face_[i] = (d2 > d1 && mid > d1 && mid < d2) ? k : 1.0;
        }
        build();
    }

    int n_nodes() const { return n_; }
    int n_steps() const { return int(std::round(T_ / dt_)); }
    double x(int i) const { return i * h_; }
    double dt() const { return dt_; }
    double h() const { return h_; }

    // advance one step with boundary fluxes (g0, g1) held over the interval
    // and an optional volumetric source sampled at the half level
    void step(std::vector<double>& u, double g0, double g1,
              const std::function<double(double, double)>* source = nullptr,
              double t_mid = 0.0) const {
        std::vector<double> rhs(n_);
        for (int i = 0; i < n_; ++i) {
            double lap = explicit_lap(u, i);
            rhs[i] = u[i] + 0.5 * dt_ * lap;
        }
        rhs[0] += dt_ * g0 / (0.5 * h_);
        rhs[n_ - 1] += dt_ * g1 / (0.5 * h_);
        if (source)
            for (int i = 0; i < n_; ++i) rhs[i] += dt_ * (*source)(x(i), t_mid);
        lhs_.solve(rhs);
        u = std::move(rhs);
    }

    // damped variant for rough data: two backward half steps over one dt
    void step_damped(std::vector<double>& u, double g0, double g1) const {
        for (int half = 0; half < 2; ++half) {
            std::vector<double> rhs = u;
            rhs[0] += 0.5 * dt_ * g0 / (0.5 * h_);
            rhs[n_ - 1] += 0.5 * dt_ * g1 / (0.5 * h_);
            lhs_startup_.solve(rhs);
            u = std::move(rhs);
        }
    }

    // mass is conserved up to the boundary fluxes
    double mass(const std::vector<double>& u) const {
        double m = 0.0;
        for (int i = 0; i < n_; ++i) m += cell(i) * u[i];
        return m;
    }

  private:
    int n_;
    double dt_, T_, h_, k_, d1_, d2_;
    std::vector<double> gamma_face_;
    mutable BandedMatrix lhs_, lhs_startup_;

    double cell(int i) const { return (i == 0 || i == n_ - 1) ? 0.5 * h_ : h_; }

    double explicit_lap(const std::vector<double>& u, int i) const {
        double fr = i + 1 < n_ ? gamma_face_[i] * (u[i + 1] - u[i]) / h_ : 0.0;
        double fl = i > 0 ? gamma_face_[i - 1] * (u[i] - u[i - 1]) / h_ : 0.0;
        return (fr - fl) / cell(i);
    }

    void build() {
        auto assemble = [&](double theta_dt) {
            BandedMatrix A(n_, 1, 1);
            for (int i = 0; i < n_; ++i) {
                double ci = cell(i);
                double ar = i + 1 < n_ ? gamma_face_[i] / h_ : 0.0;
                double al = i > 0 ? gamma_face_[i - 1] / h_ : 0.0;
                A.at(i, i) = 1.0 + theta_dt * (ar + al) / ci;
                if (i + 1 < n_) A.at(i, i + 1) = -theta_dt * ar / ci;
                if (i > 0) A.at(i, i - 1) = -theta_dt * al / ci;
            }
            if (!A.factorize()) throw degeneracy_error("conductor step matrix singular");
            return A;
        };
        lhs_ = assemble(0.5 * dt_);
        lhs_startup_ = assemble(0.5 * dt_); // backward half step
    }
};

// ---------------------------------------------------------------------------
// flux-to-temperature map
// ---------------------------------------------------------------------------

// discrete map from flux histories (2 boundary nodes x n_t intervals,
// piecewise constant) to temperature traces (2 x n_t levels); causal and
// block-Toeplitz because the conductor is autonomous
struct NDMap {
    int n_t = 0;
    // response[b_in][b_out][lag]: trace at b_out, lag intervals after a unit
    // flux pulse on b_in during the first interval
    std::array<std::array<std::vector<double>, 2>, 2> response;

    int dim() const { return 2 * n_t; }

    // dense application: out[(level m) * 2 + b_out]
    std::vector<double> apply(const std::vector<double>& g) const {
        std::vector<double> out(dim(), 0.0);
        for (int m = 1; m <= n_t; ++m)
            for (int bo = 0; bo < 2; ++bo) {
                double acc = 0.0;
                for (int mp = 1; mp <= m; ++mp)
                    for (int bi = 0; bi < 2; ++bi)
                        acc += response[bi][bo][m - mp] * g[(mp - 1) * 2 + bi];
                out[(m - 1) * 2 + bo] = acc;
            }
        return out;
    }

    std::vector<std::vector<double>> dense() const {
        std::vector<std::vector<double>> A(dim(), std::vector<double>(dim(), 0.0));
        for (int m = 1; m <= n_t; ++m)
            for (int bo = 0; bo < 2; ++bo)
                for (int mp = 1; mp <= m; ++mp)
                    for (int bi = 0; bi < 2; ++bi)
                        A[(m - 1) * 2 + bo][(mp - 1) * 2 + bi] =
                            response[bi][bo][m - mp];
        return A;
    }
};

// assembles the map from two pulse solves; response read at interval ends
inline NDMap forward_nd_map(int n_cells, double dt, double T, double k, double d1,
                            double d2) {
    OmegaSolver solver(n_cells, dt, T, k, d1, d2);
    NDMap map;
    map.n_t = solver.n_steps();
    for (int bi = 0; bi < 2; ++bi) {
        std::vector<double> u(solver.n_nodes(), 0.0);
        for (int b = 0; b < 2; ++b) map.response[bi][b].assign(map.n_t, 0.0);
        for (int m = 0; m < map.n_t; ++m) {
            double g0 = (m == 0 && bi == 0) ? 1.0 : 0.0;
            double g1 = (m == 0 && bi == 1) ? 1.0 : 0.0;
            solver.step(u, g0, g1);
            map.response[bi][0][m] = u.front();
            map.response[bi][1][m] = u.back();
        }
    }
    return map;
}

// forward solve for an arbitrary flux history; returns traces per level
inline std::vector<double> forward_nd(int n_cells, double dt, double T, double k, double d1,
                                      double d2, const std::vector<double>& g) {
    OmegaSolver solver(n_cells, dt, T, k, d1, d2);
    int n_t = solver.n_steps();
    if (int(g.size()) != 2 * n_t) throw config_error("flux history has the wrong length");
    std::vector<double> u(solver.n_nodes(), 0.0);
    std::vector<double> trace(2 * n_t, 0.0);
    for (int m = 0; m < n_t; ++m) {
        solver.step(u, g[2 * m], g[2 * m + 1]);
        trace[2 * m] = u.front();
        trace[2 * m + 1] = u.back();
    }
    return trace;
}

// ---------------------------------------------------------------------------
// probe sources
// ---------------------------------------------------------------------------

// boundary trace (and optionally the field history) of the background Green
// function with homogeneous Neumann conditions and a mollified source at
// (y, s)
struct OmegaGreen {
    std::vector<double> trace;                 // 2 per level, 0 before s
    std::vector<std::vector<double>> field;    // per level, if requested
    std::vector<double> times;
};

inline OmegaGreen green_omega(int n_cells, double dt, double T, double y, double s,
                              double eps, bool keep_field = false) {
    OmegaSolver solver(n_cells, dt, T);
    int n_t = solver.n_steps();
    Mesh grid(0.0, 1.0, n_cells + 1, dt, T);
    std::vector<double> u(solver.n_nodes(), 0.0);
    OmegaGreen out;
    out.trace.assign(2 * n_t, 0.0);
    int m_start = int(std::round(s / dt));
    for (int m = 0; m < n_t; ++m) {
        double t_next = (m + 1) * dt;
        if (m == m_start) {
            u = refsolver::mollified_delta(grid, y, eps);
            solver.step_damped(u, 0.0, 0.0); // damped release of the rough impulse
        } else if (m > m_start) {
            solver.step(u, 0.0, 0.0);
        }
        out.times.push_back(t_next);
        out.trace[2 * m] = u.front();
        out.trace[2 * m + 1] = u.back();
        if (keep_field) out.field.push_back(u);
    }
    return out;
}

// ---------------------------------------------------------------------------
// gap equation
// ---------------------------------------------------------------------------

struct GapOperator {
    std::vector<std::vector<double>> A; // dense difference map
    int n_t = 0;

    static GapOperator build(const NDMap& with_inclusion, const NDMap& background) {
        if (with_inclusion.n_t != background.n_t) throw grid_error("map grids differ");
        GapOperator gap;
        gap.n_t = with_inclusion.n_t;
        auto Ad = with_inclusion.dense();
        auto A0 = background.dense();
        gap.A.resize(Ad.size());
        for (size_t i = 0; i < Ad.size(); ++i) {
            gap.A[i].resize(Ad.size());
            for (size_t j = 0; j < Ad.size(); ++j) gap.A[i][j] = Ad[i][j] - A0[i][j];
        }
        return gap;
    }
};

struct GapSolution {
    std::vector<double> g;
    double residual = 0.0; // |A g - b|
    double g_norm = 0.0;
};

// Tikhonov-regularized least squares through the normal equations; the
// Gramian is formed once per operator and refactored per alpha
class GapSolver {
  public:
    explicit GapSolver(const GapOperator& gap) : A_(gap.A), n_(int(gap.A.size())) {
        AtA_.assign(n_, std::vector<double>(n_, 0.0));
        for (int i = 0; i < n_; ++i)
            for (int r = 0; r < n_; ++r) {
                if (A_[r][i] == 0.0) continue;
                for (int j = 0; j <= i; ++j) AtA_[i][j] += A_[r][i] * A_[r][j];
            }
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j) AtA_[i][j] = AtA_[j][i];
    }

    GapSolution solve(const std::vector<double>& b, double alpha) const {
        if (!(alpha > 0.0)) throw config_error("regularization parameter must be positive");
        BandedMatrix M(n_, n_ - 1, n_ - 1);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) M.at(i, j) = AtA_[i][j];
            M.at(i, i) += alpha;
        }
        if (!M.factorize()) throw degeneracy_error("regularized system singular");
        std::vector<double> rhs(n_, 0.0);
        for (int i = 0; i < n_; ++i)
            for (int r = 0; r < n_; ++r) rhs[i] += A_[r][i] * b[r];
        M.solve(rhs);
        GapSolution sol;
        sol.g = std::move(rhs);
        for (int r = 0; r < n_; ++r) {
            double ar = -b[r];
            for (int j = 0; j < n_; ++j) ar += A_[r][j] * sol.g[j];
            sol.residual += ar * ar;
        }
        sol.residual = std::sqrt(sol.residual);
        for (double v : sol.g) sol.g_norm += v * v;
        sol.g_norm = std::sqrt(sol.g_norm);
        return sol;
    }

  private:
    std::vector<std::vector<double>> A_;
    int n_;
    std::vector<std::vector<double>> AtA_;
};

// ---------------------------------------------------------------------------
// indicator scan
// ---------------------------------------------------------------------------

struct IndicatorPoint {
    double y = 0.0;
    double value = 0.0; // |g| / |rhs| at the smallest regularization level
};

struct IndicatorField {
    double s = 0.0;
    std::vector<double> alphas;
    std::vector<IndicatorPoint> points;
    double est_d1 = 0.0, est_d2 = 0.0; // recovered inclusion interval
    double median_inside = 0.0, median_outside = 0.0;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

struct SamplingSetup {
    int n_cells = 200;
    double dt = 5e-3;
    double T = 1.0;
    double k = 4.0;
    double d1 = 0.4, d2 = 0.7;
    double s = 0.3;
    double eps = 0.02;
    std::vector<double> alphas = {1e-4, 1e-6, 1e-8, 1e-10, 1e-12};

    double x_of(int i) const { return double(i) / n_cells; }
};

inline IndicatorField indicator_scan(const SamplingSetup& su,
                                     const std::vector<double>& probes) {
    NDMap lam_d = forward_nd_map(su.n_cells, su.dt, su.T, su.k, su.d1, su.d2);
    NDMap lam_0 = forward_nd_map(su.n_cells, su.dt, su.T, 1.0, 0.0, 0.0);
    GapOperator gap = GapOperator::build(lam_d, lam_0);
    GapSolver solver(gap);

    IndicatorField field;
    field.s = su.s;
    field.alphas = su.alphas;
    double alpha_last = su.alphas.back();
    for (double y : probes) {
        OmegaGreen rhs = green_omega(su.n_cells, su.dt, su.T, y, su.s, su.eps);
        double bn = 0.0;
        for (double v : rhs.trace) bn += v * v;
        bn = std::sqrt(bn);
        GapSolution sol = solver.solve(rhs.trace, alpha_last);
        field.points.push_back({y, sol.g_norm / std::max(bn, 1e-300)});
    }

    // threshold at the geometric midpoint of the log-range; the inclusion
    // estimate is the longest run of sub-threshold probes
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& p : field.points) {
        lo = std::min(lo, p.value);
        hi = std::max(hi, p.value);
    }
    double thresh = std::sqrt(lo * hi);
    int best_len = 0, best_start = -1, cur_len = 0, cur_start = -1;
    for (size_t i = 0; i < field.points.size(); ++i) {
        if (field.points[i].value < thresh) {
            if (cur_len == 0) cur_start = int(i);
            if (++cur_len > best_len) {
                best_len = cur_len;
                best_start = cur_start;
            }
        } else {
            cur_len = 0;
        }
    }
    if (best_len > 0) {
        field.est_d1 = field.points[best_start].y;
        field.est_d2 = field.points[best_start + best_len - 1].y;
    }

    std::vector<double> inside, outside;
    for (const auto& p : field.points)
        (p.y > su.d1 && p.y < su.d2 ? inside : outside).push_back(p.value);
    field.median_inside = median_of(inside);
    field.median_outside = median_of(outside);
    return field;
}

// ---------------------------------------------------------------------------
// identity between the gap solution and the Green-function difference
// ---------------------------------------------------------------------------

struct PsolReport {
    double rel_deviation = 0.0; // in the interior of the inclusion
    double scale = 0.0;
};

// reconstructs v from the gap solution (background Neumann solve driven by
// g) and compares it to G^D - G^Omega inside the inclusion at the final time
inline PsolReport psol_identity_check(const SamplingSetup& su, double y, double alpha) {
    NDMap lam_d = forward_nd_map(su.n_cells, su.dt, su.T, su.k, su.d1, su.d2);
    NDMap lam_0 = forward_nd_map(su.n_cells, su.dt, su.T, 1.0, 0.0, 0.0);
    GapSolver solver(GapOperator::build(lam_d, lam_0));
    OmegaGreen rhs = green_omega(su.n_cells, su.dt, su.T, y, su.s, su.eps, true);
    GapSolution sol = solver.solve(rhs.trace, alpha);

    // v: background conductor driven by the recovered flux history
    OmegaSolver bg(su.n_cells, su.dt, su.T);
    std::vector<double> v(bg.n_nodes(), 0.0);
    for (int m = 0; m < bg.n_steps(); ++m) bg.step(v, sol.g[2 * m], sol.g[2 * m + 1]);

    // inclusion-domain Green column with the matching mollifier
    int i1 = int(std::round(su.d1 * su.n_cells));
    int i2 = int(std::round(su.d2 * su.n_cells));
    Mesh dmesh(su.d1, su.d2, i2 - i1 + 1, su.dt, su.T);
    refsolver::TransmissionSolver tsolver(dmesh, su.k);
    refsolver::GreenColumn gd = refsolver::green_column(tsolver, 1, y, su.s, su.eps);

    PsolReport rep;
    const auto& gO = rhs.field.back();
    size_t mT = gd.traj.times.size() - 1;
    for (int i = i1; i <= i2; ++i) {
        double margin = std::min(su.x_of(i) - su.d1, su.d2 - su.x_of(i));
        if (margin < 0.2 * (su.d2 - su.d1)) continue; // interior of D only
        double lhs = v[i];
        double rhs_v = gd.traj.v[mT][i - i1] - gO[i];
        rep.scale = std::max(rep.scale, std::abs(rhs_v));
        rep.rel_deviation = std::max(rep.rel_deviation, std::abs(lhs - rhs_v));
    }
    if (rep.scale > 0.0) rep.rel_deviation /= rep.scale;
    return rep;
}

} // namespace itpg::sampling
