#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "itpg/geometry.hpp"

// Finite-difference reference solver for the coupled transmission system on
// an interval: two diffusion fields (diffusivities 1 and k) coupled only
// through the endpoint conditions v - u = 0 and d_nu v - k d_nu u = 0.
// Crank-Nicolson in time with a Rannacher start, second-order one-sided flux
// stencils, banded LU per step.

namespace itpg::refsolver {

using SourceFn = std::function<double(double, double)>; // (x, t)

struct Mesh {
    double xa = 0.0, xb = 1.0;
    int n = 65;         // nodes including endpoints
    double dt = 1e-3;
    double T = 0.1;

    Mesh() = default;
    Mesh(double a, double b, int n_, double dt_, double T_)
        : xa(a), xb(b), n(n_), dt(dt_), T(T_) {
        if (!(xb > xa) || n < 8 || !(dt > 0) || !(T > 0))
            throw config_error("mesh requires xb > xa, n >= 8, dt > 0, T > 0");
    }
    double h() const { return (xb - xa) / (n - 1); }
    double x(int i) const { return xa + i * h(); }
};

struct ITPState {
    std::vector<double> v, u;
    double time = 0.0;
};

// trapezoid weights on the mesh
inline std::vector<double> quad_weights(const Mesh& m) {
    std::vector<double> w(m.n, m.h());
    w.front() = w.back() = 0.5 * m.h();
    return w;
}

inline double dot_weighted(const std::vector<double>& w, const std::vector<double>& a,
                           const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * a[i] * b[i];
    return s;
}

// normalized mollified delta: Gaussian of width eps, clipped at 6 eps,
// renormalized to unit mass on the grid
inline std::vector<double> mollified_delta(const Mesh& m, double y, double eps) {
    if (eps < 2.0 * m.h()) throw config_error("mollifier width must be at least 2h");
    std::vector<double> d(m.n, 0.0);
    for (int i = 0; i < m.n; ++i) {
        double r = (m.x(i) - y) / eps;
        if (std::abs(r) <= 6.0) d[i] = std::exp(-0.5 * r * r);
    }
    auto w = quad_weights(m);
    double mass = 0.0;
    for (int i = 0; i < m.n; ++i) mass += w[i] * d[i];
    if (mass <= 0.0) throw config_error("mollifier support misses the grid");
    for (double& v : d) v /= mass;
    return d;
}

enum class Scheme { implicit_euler, crank_nicolson };

// couple_sign +1: v - u and d_nu v - k d_nu u  (forward problem)
// couple_sign -1: v + u and d_nu v + k d_nu u  (adjoint problem)
class TransmissionSolver {
  public:
    TransmissionSolver(const Mesh& mesh, double k, Scheme scheme = Scheme::crank_nicolson,
                       int couple_sign = +1, bool rannacher = true)
        : mesh_(mesh), k_(geometry::Contrast(k).k), sign_(couple_sign),
          theta_(scheme == Scheme::implicit_euler ? 1.0 : 0.5), rannacher_(rannacher) {
        main_ = build(mesh_.dt, theta_);
        if (rannacher_) startup_ = build(0.5 * mesh_.dt, 1.0);
    }

    const Mesh& mesh() const { return mesh_; }
    double contrast() const { return k_; }

    // advance one macro step dt; the first call after reset_startup() uses
    // two damped implicit-Euler half steps
    void step(ITPState& state, const SourceFn& N1, const SourceFn& N2) {
        if (rannacher_ && pending_startup_) {
            substep(state, N1, N2, *startup_, 0.5 * mesh_.dt, 1.0);
            substep(state, N1, N2, *startup_, 0.5 * mesh_.dt, 1.0);
            pending_startup_ = false;
        } else {
            substep(state, N1, N2, *main_, mesh_.dt, theta_);
        }
        audit_coupling(state);
    }

    void reset_startup() { pending_startup_ = rannacher_; }

    // max residual of the two coupling conditions at both endpoints
    double coupling_residual(const ITPState& s) const {
        const int n = mesh_.n;
        double h = mesh_.h();
        auto flux_left = [&](const std::vector<double>& f) {
            return (3.0 * f[0] - 4.0 * f[1] + f[2]) / (2.0 * h);
        };
        auto flux_right = [&](const std::vector<double>& f) {
            return (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        };
        double r = std::abs(s.v[0] - sign_ * s.u[0]);
        r = std::max(r, std::abs(s.v[n - 1] - sign_ * s.u[n - 1]));
        r = std::max(r, std::abs(flux_left(s.v) - sign_ * k_ * flux_left(s.u)));
        r = std::max(r, std::abs(flux_right(s.v) - sign_ * k_ * flux_right(s.u)));
        return r;
    }

    double last_audit() const { return last_audit_; }

  private:
    Mesh mesh_;
    double k_;
    int sign_;
    double theta_;
    bool rannacher_;
    bool pending_startup_ = false;
    double last_audit_ = 0.0;
    std::optional<BandedMatrix> main_, startup_;

    std::optional<BandedMatrix> build(double dt, double theta) const {
        const int n = mesh_.n;
        const double h = mesh_.h();
        const double rv = theta * dt / (h * h);
        const double ru = k_ * theta * dt / (h * h);
        BandedMatrix A(2 * n, 5, 5);
        for (int i = 1; i < n - 1; ++i) {
            int rv_row = 2 * i, ru_row = 2 * i + 1;
            A.at(rv_row, 2 * (i - 1)) = -rv;
            A.at(rv_row, 2 * i) = 1.0 + 2.0 * rv;
            A.at(rv_row, 2 * (i + 1)) = -rv;
            A.at(ru_row, 2 * (i - 1) + 1) = -ru;
            A.at(ru_row, 2 * i + 1) = 1.0 + 2.0 * ru;
            A.at(ru_row, 2 * (i + 1) + 1) = -ru;
        }
        // left endpoint: value coupling and one-sided flux coupling
        A.at(0, 0) = 1.0;
        A.at(0, 1) = -double(sign_);
        A.at(1, 0) = 3.0;
        A.at(1, 2) = -4.0;
        A.at(1, 4) = 1.0;
        A.at(1, 1) = -sign_ * k_ * 3.0;
        A.at(1, 3) = sign_ * k_ * 4.0;
        A.at(1, 5) = -sign_ * k_ * 1.0;
        // right endpoint
        int last = n - 1;
        A.at(2 * last, 2 * last) = 1.0;
        A.at(2 * last, 2 * last + 1) = -double(sign_);
        A.at(2 * last + 1, 2 * last) = 3.0;
        A.at(2 * last + 1, 2 * (last - 1)) = -4.0;
        A.at(2 * last + 1, 2 * (last - 2)) = 1.0;
        A.at(2 * last + 1, 2 * last + 1) = -sign_ * k_ * 3.0;
        A.at(2 * last + 1, 2 * (last - 1) + 1) = sign_ * k_ * 4.0;
        A.at(2 * last + 1, 2 * (last - 2) + 1) = -sign_ * k_ * 1.0;
        std::optional<BandedMatrix> out(std::move(A));
        if (!out->factorize())
            throw degeneracy_error("transmission step matrix is singular");
        return out;
    }

    void substep(ITPState& s, const SourceFn& N1, const SourceFn& N2, const BandedMatrix& A,
                 double dt, double theta) {
        const int n = mesh_.n;
        const double h = mesh_.h();
        const double rv = (1.0 - theta) * dt / (h * h);
        const double ru = k_ * (1.0 - theta) * dt / (h * h);
        const double tmid = s.time + (theta == 1.0 ? dt : 0.5 * dt);
        std::vector<double> rhs(2 * n, 0.0);
        for (int i = 1; i < n - 1; ++i) {
            double lap_v = s.v[i - 1] - 2.0 * s.v[i] + s.v[i + 1];
            double lap_u = s.u[i - 1] - 2.0 * s.u[i] + s.u[i + 1];
            rhs[2 * i] = s.v[i] + rv * lap_v + dt * N1(mesh_.x(i), tmid);
            rhs[2 * i + 1] = s.u[i] + ru * lap_u + dt * N2(mesh_.x(i), tmid);
        }
        A.solve(rhs);
        for (int i = 0; i < n; ++i) {
            s.v[i] = rhs[2 * i];
            s.u[i] = rhs[2 * i + 1];
        }
        s.time += dt;
    }

    void audit_coupling(const ITPState& s) {
        double scale = 1.0;
        for (double x : s.v) scale = std::max(scale, std::abs(x));
        for (double x : s.u) scale = std::max(scale, std::abs(x));
        last_audit_ = coupling_residual(s) / scale;
        if (last_audit_ > 1e-8)
            throw grid_error("coupling residual above tolerance after a step");
    }
};

inline ITPState zero_state(const Mesh& m) {
    ITPState s;
    s.v.assign(m.n, 0.0);
    s.u.assign(m.n, 0.0);
    return s;
}

// ---------------------------------------------------------------------------
// trajectories and Green columns
// ---------------------------------------------------------------------------

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> v, u; // [time index][node]
};

inline Trajectory run_forward(TransmissionSolver& solver, ITPState state, double t_end,
                              const SourceFn& N1, const SourceFn& N2) {
    Trajectory out;
    solver.reset_startup();
    out.times.push_back(state.time);
    out.v.push_back(state.v);
    out.u.push_back(state.u);
    const double dt = solver.mesh().dt;
    while (state.time < t_end - 0.5 * dt) {
        solver.step(state, N1, N2);
        out.times.push_back(state.time);
        out.v.push_back(state.v);
        out.u.push_back(state.u);
    }
    return out;
}

inline SourceFn zero_source() {
    return [](double, double) { return 0.0; };
}

// one column of the discrete Green matrix: impulse ((2-ell) delta, (ell-1) delta)
// released at (y, s), evolved to T
struct GreenColumn {
    int ell = 1;
    double y = 0.5, s = 0.0, epsilon = 0.0;
    Trajectory traj; // times start at s
};

inline GreenColumn green_column(TransmissionSolver& solver, int ell, double y, double s,
                                double eps) {
    const Mesh& m = solver.mesh();
    if (ell != 1 && ell != 2) throw config_error("column index must be 1 or 2");
    if (y <= m.xa || y >= m.xb) throw config_error("source point must be interior");
    GreenColumn col;
    col.ell = ell;
    col.y = y;
    col.s = s;
    col.epsilon = eps;
    ITPState state = zero_state(m);
    state.time = s;
    auto d = mollified_delta(m, y, eps);
    (ell == 1 ? state.v : state.u) = d;
    col.traj = run_forward(solver, std::move(state), m.T, zero_source(), zero_source());
    return col;
}

struct DiscreteGreenMatrix {
    GreenColumn col1, col2;
};

inline DiscreteGreenMatrix green_matrix(TransmissionSolver& solver, double y, double s,
                                        double eps) {
    return {green_column(solver, 1, y, s, eps), green_column(solver, 2, y, s, eps)};
}

// ---------------------------------------------------------------------------
// adjoint problem (backward in s from terminal data at s = t)
// ---------------------------------------------------------------------------

struct AdjointTrajectory {
    std::vector<double> times; // physical times s = t - sigma, descending
    std::vector<std::vector<double>> w, z;

    // linear interpolation at a physical time
    void at(double s_query, std::vector<double>& w_out, std::vector<double>& z_out) const {
        if (times.size() < 2) throw grid_error("adjoint trajectory too short");
        if (s_query > times.front() + 1e-12 || s_query < times.back() - 1e-12)
            throw grid_error("adjoint query outside the stored window");
        size_t i = 0;
        while (i + 2 < times.size() && times[i + 1] > s_query) ++i;
        double t0 = times[i], t1 = times[i + 1];
        double a = (t0 - s_query) / (t0 - t1);
        w_out.resize(w[i].size());
        z_out.resize(w[i].size());
        for (size_t j = 0; j < w[i].size(); ++j) {
            w_out[j] = (1 - a) * w[i][j] + a * w[i + 1][j];
            z_out[j] = (1 - a) * z[i][j] + a * z[i + 1][j];
        }
    }
};

// terminal data (w0, z0) at s = t, evolved backward to s = 0 through the
// sign-flipped coupling; internally a forward march in sigma = t - s
inline AdjointTrajectory adjoint_solve(const Mesh& mesh, double k, std::vector<double> w0,
                                       std::vector<double> z0, double t,
                                       Scheme scheme = Scheme::crank_nicolson) {
    Mesh m = mesh;
    m.T = t;
    TransmissionSolver solver(m, k, scheme, -1, true);
    ITPState state;
    state.v = std::move(w0);
    state.u = std::move(z0);
    state.time = 0.0; // sigma
    Trajectory sigma_traj = run_forward(solver, std::move(state), t, zero_source(),
                                        zero_source());
    AdjointTrajectory out;
    for (size_t i = 0; i < sigma_traj.times.size(); ++i) {
        out.times.push_back(t - sigma_traj.times[i]);
        out.w.push_back(std::move(sigma_traj.v[i]));
        out.z.push_back(std::move(sigma_traj.u[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// duality pairing and reciprocity
// ---------------------------------------------------------------------------

struct PairingReport {
    std::vector<double> taus;
    std::vector<double> values; // integral of U.Z at each tau
    double deviation = 0.0;     // (max - min) / |mean|
};

// integral over the interval of (v w + u z) at every shared time in
// [window_lo, window_hi]
inline PairingReport duality_pairing(const Mesh& mesh, const Trajectory& U,
                                     const AdjointTrajectory& Z, double window_lo,
                                     double window_hi) {
    PairingReport rep;
    auto wq = quad_weights(mesh);
    std::vector<double> wz, zz;
    for (size_t i = 0; i < U.times.size(); ++i) {
        double tau = U.times[i];
        if (tau < window_lo - 1e-12 || tau > window_hi + 1e-12) continue;
        Z.at(tau, wz, zz);
        rep.taus.push_back(tau);
        rep.values.push_back(dot_weighted(wq, U.v[i], wz) + dot_weighted(wq, U.u[i], zz));
    }
    if (rep.values.empty()) return rep;
    double lo = rep.values[0], hi = rep.values[0], mean = 0.0;
    for (double v : rep.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        mean += v;
    }
    mean /= double(rep.values.size());
    rep.deviation = (hi - lo) / std::max(std::abs(mean), 1e-300);
    return rep;
}

// reciprocity: the forward kernel read at (x1, t1) from an impulse at
// (y0, s0) against the adjoint kernel read at (y0, s0) from terminal data at
// (x1, t1), for all four block entries
struct ReciprocityReport {
    double max_deviation = 0.0;
    double scale = 0.0;
};

inline ReciprocityReport reciprocity_check(const Mesh& mesh, double k, double y0, double s0,
                                           double x1, double t1, double eps) {
    if (t1 <= s0) throw config_error("reciprocity check needs t1 > s0");
    ReciprocityReport rep;
    TransmissionSolver fwd(mesh, k, Scheme::crank_nicolson, +1, true);

    auto probe_fwd = mollified_delta(mesh, x1, eps);
    auto probe_adj = mollified_delta(mesh, y0, eps);
    auto wq = quad_weights(mesh);

    for (int ell = 1; ell <= 2; ++ell) {
        GreenColumn col = green_column(fwd, ell, y0, s0, eps);
        // locate t1 in the forward trajectory
        size_t it = 0;
        while (it + 1 < col.traj.times.size() && col.traj.times[it] < t1 - 1e-12) ++it;
        for (int comp = 1; comp <= 2; ++comp) {
            const auto& field = comp == 1 ? col.traj.v[it] : col.traj.u[it];
            double g_val = dot_weighted(wq, field, probe_fwd);

            // adjoint run with the mollified terminal impulse in component comp
            std::vector<double> w0(mesh.n, 0.0), z0(mesh.n, 0.0);
            (comp == 1 ? w0 : z0) = probe_fwd;
            AdjointTrajectory adj = adjoint_solve(mesh, k, std::move(w0), std::move(z0),
                                                  col.traj.times[it]);
            std::vector<double> ws, zs;
            adj.at(s0, ws, zs);
            double h_val = dot_weighted(wq, ell == 1 ? ws : zs, probe_adj);

            rep.max_deviation = std::max(rep.max_deviation, std::abs(g_val - h_val));
            rep.scale = std::max({rep.scale, std::abs(g_val), std::abs(h_val)});
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// manufactured-solution study
// ---------------------------------------------------------------------------

struct MmsCase {
    std::function<double(double)> p, q;     // spatial profiles of v*, u*
    std::function<double(double)> pxx, qxx; // second derivatives
    double omega = 0.0;                     // time factor g(t) = sin(omega t),
                                            // or g = t when omega = 0
};

// v* = g(t) p(x), u* = g(t) q(x) with p - q and p' - k q' vanishing at both
// ends; a nonzero omega makes the time error visible (the trapezoidal step
// is exact on solutions linear in t)
inline MmsCase default_mms_case(double omega = 0.0) {
    MmsCase c;
    c.omega = omega;
    c.p = [](double x) {
        double b = x * x * (1 - x) * (1 - x);
        return std::cos(pi * x) + b;
    };
    c.pxx = [](double x) {
        double bxx = 2.0 * (1.0 - 6.0 * x + 6.0 * x * x);
        return -pi * pi * std::cos(pi * x) + bxx;
    };
    c.q = [](double x) { return std::cos(pi * x); };
    c.qxx = [](double x) { return -pi * pi * std::cos(pi * x); };
    return c;
}

// max-norm error of the solved fields against the manufactured pair at T
inline double mms_error(const Mesh& mesh, double k, Scheme scheme = Scheme::crank_nicolson,
                        double omega = 0.0) {
    MmsCase c = default_mms_case(omega);
    auto g = [omega](double t) { return omega == 0.0 ? t : std::sin(omega * t); };
    auto gdot = [omega](double t) { return omega == 0.0 ? 1.0 : omega * std::cos(omega * t); };
    SourceFn N1 = [&](double x, double t) { return gdot(t) * c.p(x) - g(t) * c.pxx(x); };
    SourceFn N2 = [&](double x, double t) { return gdot(t) * c.q(x) - k * g(t) * c.qxx(x); };
    TransmissionSolver solver(mesh, k, scheme, +1, false);
    ITPState state = zero_state(mesh);
    Trajectory traj = run_forward(solver, std::move(state), mesh.T, N1, N2);
    double err = 0.0;
    double t_end = traj.times.back();
    for (int i = 0; i < mesh.n; ++i) {
        err = std::max(err, std::abs(traj.v.back()[i] - g(t_end) * c.p(mesh.x(i))));
        err = std::max(err, std::abs(traj.u.back()[i] - g(t_end) * c.q(mesh.x(i))));
    }
    return err;
}

// smooth compactly supported bump on (lo, hi), zero outside with all
// derivatives; convenient coupling-compatible test data
inline std::vector<double> compact_bump(const Mesh& m, double lo, double hi) {
    std::vector<double> b(m.n, 0.0);
    for (int i = 0; i < m.n; ++i) {
        double r = 2.0 * (m.x(i) - lo) / (hi - lo) - 1.0;
        if (std::abs(r) < 1.0) b[i] = std::exp(-1.0 / (1.0 - r * r));
    }
    return b;
}

// observed order from three errors at successive halvings
inline double observed_order(double e_coarse, double e_mid, double e_fine) {
    return 0.5 * (std::log2(e_coarse / e_mid) + std::log2(e_mid / e_fine));
}

// discrete L2-in-time H1-in-space norm of a trajectory
inline double l2h1_norm(const Mesh& mesh, const Trajectory& traj) {
    double total = 0.0;
    double h = mesh.h();
    for (size_t it = 0; it + 1 < traj.times.size(); ++it) {
        double dt = traj.times[it + 1] - traj.times[it];
        double sq = 0.0;
        for (const auto* f : {&traj.v[it], &traj.u[it]}) {
            const auto& v = *f;
            for (int i = 0; i < mesh.n; ++i) {
                double grad = i + 1 < mesh.n ? (v[i + 1] - v[i]) / h : (v[i] - v[i - 1]) / h;
                sq += h * (v[i] * v[i] + grad * grad);
            }
        }
        total += dt * sq;
    }
    return std::sqrt(total);
}

} // namespace itpg::refsolver
