#pragma once

#include <functional>
#include <vector>

#include "itpg/symbols.hpp"

// Inverse Laplace-Fourier evaluation of the symbol-level kernels:
//   K(dx', dt) = (2 pi)^{-3} int_{R^2} e^{i dx'.xi'} int_C e^{i dt eta}
//                 g(xi', eta) d eta d xi'
// where C is the Laplace line tau = i eta shifted by -iq.  The (2 pi i)^{-1}
// Bromwich factor of the tau integral is folded in, so feeding the free
// half-space branch reproduces the heat kernel exactly.
//
// For dt > 0 the eta contour keeps the central segment at depth -iq and
// slants the tails upward into the half-plane where e^{i dt eta} decays;
// the integrand is analytic between this contour and the straight line
// (the singularities sit on the vertical rays above the real axis), so the
// deformation is exact and turns a conditionally convergent tail into an
// exponentially damped one.  For dt < 0 the tails slant downward and q is
// scaled like 1/|dt|, which multiplies everything by e^{-q|dt|} and makes
// the causal vanishing explicit.

namespace itpg::kernels {

using geometry::Mat3;
using geometry::Vec2;
using symbols::Vec2c;

struct ContourSpec {
    double q_offset = 2.0;     // depth of the central segment
    double wedge_slope = 1.0;  // tail slope into the decaying half-plane
    double gamma0 = 2.0;       // half-width of the central segment
    double eta_truncation = 0; // 0 = choose from dt range and tail_tol
    double xi_truncation = 0;  // 0 = choose from dt range and tail_tol
    double tail_tol = 1e-9;
    double phase_cap = 16.0;    // phase budget per quadrature panel
    int nodes_per_panel = 12;
    double eta_near_scale = 0.25; // dyadic panel scale near the branch points
    double xi_near_scale = 1.0;
    double refine = 1.0;       // >1 tightens panels and node counts
    double mu_cone = 0.25;

    void validated(double mu) const {
        if (!(q_offset > 0) || !(wedge_slope > 0) || !(gamma0 > 0))
            throw config_error("contour requires positive q, slope, and segment width");
        // the straight segment {gamma - iq} must lie inside the analyticity
        // region for every real quadrature xi'
        for (double g : {-gamma0, 0.0, gamma0})
            if (!symbols::in_L2mu({cplx(0), cplx(0)}, cplx(g, -q_offset), mu))
                throw config_error("shifted eta segment escapes the analyticity region");
    }
};

using SymbolFn = std::function<cplx(double, double, cplx)>; // (xi1, xi2, eta)

// evaluates a family of symbols sharing per-node state; writes n_sym values
using SymbolBatchFn = std::function<void(double, double, cplx, cplx*)>;

struct KernelTarget {
    double dx1 = 0, dx2 = 0; // x' - y'
    double dt = 0;           // t - s
};

namespace detail {

struct Panel {
    double a, b;
    int nodes;
};

// subdivide [a,b] until the phase estimate per panel fits the cap
inline void split_panels(double a, double b, const std::function<double(double, double)>& phase,
                         double cap, std::vector<Panel>& out, int nodes) {
    if (phase(a, b) <= cap || (b - a) < 1e-12) {
        out.push_back({a, b, nodes});
        return;
    }
    double mid = 0.5 * (a + b);
    split_panels(a, mid, phase, cap, out, nodes);
    split_panels(mid, b, phase, cap, out, nodes);
}

struct QuadratureNodes {
    std::vector<cplx> eta;   // contour points
    std::vector<cplx> eta_w; // weight including d eta / d gamma
    std::vector<double> xi;  // shared 1-D xi nodes
    std::vector<double> xi_w;
};

} // namespace detail

class IlftEngine {
  public:
    IlftEngine(ContourSpec spec, double mu = 0.25) : spec_(spec) { spec_.validated(mu); }

    // evaluates a symbol batch at all targets on a shared quadrature grid;
    // rho_scale bounds the exponential decay rate baked into the symbols
    // (max |x3| + |y3|), which drives the oscillation estimate
    std::vector<std::vector<cplx>> evaluate_batch(size_t n_sym, const SymbolBatchFn& batch,
                                                  const std::vector<KernelTarget>& targets,
                                                  double rho_scale) const {
        std::vector<std::vector<cplx>> out(targets.size(), std::vector<cplx>(n_sym, cplx(0)));
        std::vector<size_t> pos, neg;
        for (size_t i = 0; i < targets.size(); ++i)
            (targets[i].dt > 0 ? pos : neg).push_back(i);
        if (!pos.empty()) evaluate_group(n_sym, batch, targets, pos, rho_scale, +1, out);
        for (size_t i : neg) // causal side: one cheap deep-contour pass each
            evaluate_group(n_sym, batch, targets, {i}, rho_scale, -1, out);
        return out;
    }

    std::vector<std::vector<cplx>> evaluate(const std::vector<SymbolFn>& symbols,
                                            const std::vector<KernelTarget>& targets,
                                            double rho_scale) const {
        SymbolBatchFn batch = [&symbols](double xi1, double xi2, cplx eta, cplx* out) {
            for (size_t s = 0; s < symbols.size(); ++s) out[s] = symbols[s](xi1, xi2, eta);
        };
        return evaluate_batch(symbols.size(), batch, targets, rho_scale);
    }

    cplx evaluate_one(const SymbolFn& symbol, const KernelTarget& target,
                      double rho_scale) const {
        return evaluate({symbol}, {target}, rho_scale)[0][0];
    }

  private:
    ContourSpec spec_;

    void evaluate_group(size_t n_sym, const SymbolBatchFn& batch,
                        const std::vector<KernelTarget>& targets,
                        const std::vector<size_t>& idx, double rho_scale, int dir,
                        std::vector<std::vector<cplx>>& out) const {
        double tmin = std::numeric_limits<double>::infinity();
        double tmax = 0.0, xmax = 0.0;
        for (size_t i : idx) {
            tmin = std::min(tmin, std::abs(targets[i].dt));
            tmax = std::max(tmax, std::abs(targets[i].dt));
            xmax = std::max(xmax, std::hypot(targets[i].dx1, targets[i].dx2));
        }
        tmin = std::max(tmin, 1e-6);

        double q = spec_.q_offset;
        if (dir < 0) q = std::max(q, 34.0 / tmin); // e^{-34} suppression below the axis

        detail::QuadratureNodes nodes = build_nodes(tmin, tmax, xmax, rho_scale, q, dir);
        const size_t n_eta = nodes.eta.size();
        const size_t n_xi = nodes.xi.size();
        const size_t n_tgt = idx.size();

        // per-target phase tables
        std::vector<std::vector<cplx>> et(n_tgt, std::vector<cplx>(n_eta));
        std::vector<std::vector<cplx>> ex1(n_tgt, std::vector<cplx>(n_xi));
        std::vector<std::vector<cplx>> ex2(n_tgt, std::vector<cplx>(n_xi));
        for (size_t t = 0; t < n_tgt; ++t) {
            const KernelTarget& tg = targets[idx[t]];
            for (size_t l = 0; l < n_eta; ++l)
                et[t][l] = std::exp(cplx(0, 1) * tg.dt * nodes.eta[l]) * nodes.eta_w[l];
            for (size_t i = 0; i < n_xi; ++i) {
                ex1[t][i] = std::exp(cplx(0, 1) * tg.dx1 * nodes.xi[i]);
                ex2[t][i] = std::exp(cplx(0, 1) * tg.dx2 * nodes.xi[i]);
            }
        }

        std::vector<std::vector<cplx>> acc(n_tgt, std::vector<cplx>(n_sym, cplx(0)));
        std::vector<cplx> g(n_sym * n_eta);
        std::vector<cplx> vals(n_sym);
        std::vector<cplx> inner(n_sym * n_tgt);

        for (size_t i = 0; i < n_xi; ++i) {
            for (size_t j = 0; j < n_xi; ++j) {
                double xi1 = nodes.xi[i], xi2 = nodes.xi[j];
                for (size_t l = 0; l < n_eta; ++l) {
                    batch(xi1, xi2, nodes.eta[l], vals.data());
                    for (size_t s = 0; s < n_sym; ++s) {
                        if (!std::isfinite(vals[s].real()) || !std::isfinite(vals[s].imag()))
                            throw grid_error("non-finite symbol sample on the contour");
                        g[s * n_eta + l] = vals[s];
                    }
                }
                for (size_t t = 0; t < n_tgt; ++t)
                    for (size_t s = 0; s < n_sym; ++s) {
                        cplx sum = 0.0;
                        const cplx* gs = &g[s * n_eta];
                        const cplx* etp = et[t].data();
                        for (size_t l = 0; l < n_eta; ++l) sum += gs[l] * etp[l];
                        inner[t * n_sym + s] = sum;
                    }
                double wxi = nodes.xi_w[i] * nodes.xi_w[j];
                for (size_t t = 0; t < n_tgt; ++t) {
                    cplx ph = wxi * ex1[t][i] * ex2[t][j];
                    for (size_t s = 0; s < n_sym; ++s) acc[t][s] += ph * inner[t * n_sym + s];
                }
            }
        }
        const double norm = 1.0 / std::pow(2.0 * pi, 3);
        for (size_t t = 0; t < n_tgt; ++t)
            for (size_t s = 0; s < n_sym; ++s) out[idx[t]][s] = norm * acc[t][s];
    }

    detail::QuadratureNodes build_nodes(double tmin, double tmax, double xmax,
                                        double rho_scale, double q, int dir) const {
        detail::QuadratureNodes nodes;
        const double m = spec_.wedge_slope;
        const double g0 = spec_.gamma0;
        double log_tail = std::log(1.0 / spec_.tail_tol);

        double gamma_max = spec_.eta_truncation > 0
                               ? spec_.eta_truncation
                               : g0 + log_tail / (tmin * m);
        double cap = spec_.phase_cap / spec_.refine;
        int npp = int(spec_.nodes_per_panel * std::sqrt(spec_.refine) + 0.5);

        // |eta| along the arm ~ gamma sqrt(1+m^2); the oscillation comes from
        // e^{i dt eta} and from the sqrt(|eta|) rate inside the symbols
        auto eta_abs = [&](double gamma) {
            return std::hypot(gamma, q + m * std::max(0.0, std::abs(gamma) - g0));
        };
        // distance-to-origin term forces dyadic panels near the square-root
        // branch points, whose scale the shifted contour cannot see in the
        // oscillation alone
        // hard length cap near the origin: panels must not dwarf their
        // distance to the square-root branch points
        auto near_term = [cap](double a, double b, double scale) {
            double dist = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
            return (b - a) > 4.0 * (scale + dist) ? 10.0 * cap : 0.0;
        };
        auto eta_phase = [&](double a, double b) {
            return tmax * (b - a) +
                   rho_scale * std::abs(std::sqrt(eta_abs(b)) - std::sqrt(eta_abs(a))) +
                   near_term(a, b, spec_.eta_near_scale);
        };

        std::vector<detail::Panel> eta_panels;
        detail::split_panels(-g0, g0, eta_phase, cap, eta_panels, npp);
        double a = g0;
        while (a < gamma_max) {
            double b = std::min(gamma_max, a * 2.0);
            detail::split_panels(a, b, eta_phase, cap, eta_panels, npp);
            detail::split_panels(-b, -a, eta_phase, cap, eta_panels, npp);
            a = b;
        }

        std::vector<double> gx, gw;
        for (const auto& p : eta_panels) {
            gauss_legendre(p.nodes, gx, gw);
            for (int n = 0; n < p.nodes; ++n) {
                double gamma = 0.5 * (p.a + p.b) + 0.5 * (p.b - p.a) * gx[n];
                double w = 0.5 * (p.b - p.a) * gw[n];
                double arm = std::max(0.0, std::abs(gamma) - g0);
                double im = dir > 0 ? (m * arm - q) : (-m * arm - q);
                cplx deta(1.0, dir > 0 ? (gamma >= 0 ? m : -m) : (gamma >= 0 ? -m : m));
                if (arm == 0.0) deta = cplx(1.0, 0.0);
                nodes.eta.push_back(cplx(gamma, im));
                nodes.eta_w.push_back(w * deta);
            }
        }

        // xi truncation: the eta integral supplies e^{-|xi|^2 dt} decay
        double xi_max = spec_.xi_truncation > 0 ? spec_.xi_truncation
                                                : std::sqrt(log_tail / tmin) + 1.0;
        auto xi_phase = [&](double u, double v) {
            return (xmax + rho_scale) * (v - u) + near_term(u, v, spec_.xi_near_scale);
        };
        std::vector<detail::Panel> xi_panels;
        double b0 = std::min(xi_max, 4.0);
        detail::split_panels(-b0, b0, xi_phase, cap, xi_panels, npp);
        a = b0;
        while (a < xi_max) {
            double b = std::min(xi_max, a * 2.0);
            detail::split_panels(a, b, xi_phase, cap, xi_panels, npp);
            detail::split_panels(-b, -a, xi_phase, cap, xi_panels, npp);
            a = b;
        }
        for (const auto& p : xi_panels) {
            gauss_legendre(p.nodes, gx, gw);
            for (int n = 0; n < p.nodes; ++n) {
                nodes.xi.push_back(0.5 * (p.a + p.b) + 0.5 * (p.b - p.a) * gx[n]);
                nodes.xi_w.push_back(0.5 * (p.b - p.a) * gw[n]);
            }
        }
        return nodes;
    }
};

// ---------------------------------------------------------------------------
// closed-form references
// ---------------------------------------------------------------------------

inline double heat_kernel3(double dist2, double dt, double kappa = 1.0) {
    if (dt <= 0.0) return 0.0;
    return std::pow(4.0 * pi * kappa * dt, -1.5) * std::exp(-dist2 / (4.0 * kappa * dt));
}

// ---------------------------------------------------------------------------
// leading kernels from the order -1 amplitudes
// ---------------------------------------------------------------------------

// metric data frozen at the chart reference point; x3/y3 only enter the
// branch exponents
struct FrozenCoeffs {
    Mat3 M0, M1;
    double J_y = 1.0;
    double k = 2.0;
};

enum class GradComponent { none, d_x1, d_x2, d_x3 };

struct BranchRequest {
    int ell = 1;
    symbols::Family fam = symbols::Family::a;
    symbols::Branch br = symbols::Branch::LmLm;
    double x3 = 0.0, y3 = 0.0;
    GradComponent grad = GradComponent::none;
};

// order -1 coefficient carried by (family, branch) in column ell; zero when
// the branch is inactive in that column
inline cplx branch_coefficient(int ell, symbols::Family fam, symbols::Branch br,
                               const symbols::FirstOrderCoefficients& c) {
    using symbols::Branch;
    using symbols::Family;
    const bool col1 = (ell == 1);
    switch (fam) {
        case Family::a:
        case Family::b:
            if (br == Branch::LpLm) return col1 ? -c.A1 + c.A2 : cplx(0);
            if (br == Branch::LpMm) return col1 ? cplx(0) : c.B1 + c.B2;
            if (br == Branch::LmLm && fam == Family::a) return col1 ? c.A1 : cplx(0);
            if (br == Branch::LpLp && fam == Family::b) return col1 ? c.A1 : cplx(0);
            return cplx(0);
        case Family::d:
        case Family::e:
            if (br == Branch::MpLm) return col1 ? c.A2 : cplx(0);
            if (br == Branch::MpMm) return col1 ? cplx(0) : c.B2;
            if (br == Branch::MmMm && fam == symbols::Family::d)
                return col1 ? cplx(0) : c.B1;
            if (br == Branch::MpMp && fam == symbols::Family::e)
                return col1 ? cplx(0) : c.B1;
            return cplx(0);
    }
    return cplx(0);
}

// natural side of each kernel family
inline int family_side(symbols::Family f) {
    return (f == symbols::Family::a || f == symbols::Family::d) ? +1 : -1;
}

// all requested branch kernels at all targets, sharing one quadrature and
// one root/coefficient evaluation per node
inline std::vector<std::vector<cplx>>
leading_kernel_batch(const FrozenCoeffs& fc, const std::vector<BranchRequest>& reqs,
                     const std::vector<KernelTarget>& targets, const ContourSpec& spec) {
    double rho_scale = 0.0;
    for (const auto& r : reqs) rho_scale = std::max(rho_scale, std::abs(r.x3) + std::abs(r.y3));
    const geometry::Contrast contrast(fc.k);

    SymbolBatchFn batch = [&](double xi1, double xi2, cplx eta, cplx* out) {
        symbols::AmplitudeInputs in;
        in.M0 = fc.M0;
        in.M1 = fc.M1;
        in.J_y = fc.J_y;
        in.xi_t = {cplx(xi1), cplx(xi2)};
        in.tau = cplx(0, 1) * eta;
        in.k = fc.k;
        symbols::CharRoots roots = symbols::char_roots(fc.M1, in.xi_t, in.tau, contrast);
        symbols::FirstOrderCoefficients co = symbols::first_order_coefficients(in, roots);
        for (size_t r = 0; r < reqs.size(); ++r) {
            const BranchRequest& rq = reqs[r];
            cplx coeff = branch_coefficient(rq.ell, rq.fam, rq.br, co);
            if (coeff == cplx(0)) {
                out[r] = 0;
                continue;
            }
            cplx beta = symbols::x3_rate(roots, rq.br);
            cplx delta = symbols::y3_rate(roots, rq.br);
            cplx v = coeff * std::exp(beta * rq.x3 - delta * rq.y3);
            switch (rq.grad) {
                case GradComponent::d_x1: v *= cplx(0, 1) * xi1; break;
                case GradComponent::d_x2: v *= cplx(0, 1) * xi2; break;
                case GradComponent::d_x3: v *= beta; break;
                default: break;
            }
            out[r] = v;
        }
    };
    IlftEngine engine(spec, spec.mu_cone);
    return engine.evaluate_batch(reqs.size(), batch, targets, rho_scale);
}

// single-point convenience wrapper
struct FrozenSetup {
    Mat3 M0, M1;
    double J_y = 1.0;
    double k = 2.0;
    double x3 = 0.0, y3 = 0.0;
};

inline cplx leading_kernel(int ell, symbols::Family fam, symbols::Branch br,
                           const FrozenSetup& fs, const Vec2& x_t, double t, const Vec2& y_t,
                           double s, const ContourSpec& spec,
                           GradComponent grad = GradComponent::none) {
    double side = fs.x3 - fs.y3;
    if (side != 0.0 && side * family_side(fam) < 0.0)
        throw config_error("kernel family does not match the sign of x3 - y3");
    FrozenCoeffs fc{fs.M0, fs.M1, fs.J_y, fs.k};
    BranchRequest rq{ell, fam, br, fs.x3, fs.y3, grad};
    KernelTarget target{x_t[0] - y_t[0], x_t[1] - y_t[1], t - s};
    return leading_kernel_batch(fc, {rq}, {target}, spec)[0][0];
}

// ---------------------------------------------------------------------------
// sampled kernels and Gaussian-envelope fitting
// ---------------------------------------------------------------------------

struct KernelSample {
    double x1 = 0, x2 = 0, x3 = 0, t = 0;
    double y1 = 0, y2 = 0, y3 = 0, s = 0;
    cplx K{0.0, 0.0};
};

struct SpaceTimeKernel {
    std::vector<KernelSample> samples;
    bool causal_support = true;

    void enforce_support() {
        if (!causal_support) return;
        for (auto& smp : samples)
            if (smp.t < smp.s) smp.K = 0.0;
    }
};

enum class DistanceMode { direct, reflected };

inline double distance2(const KernelSample& s, DistanceMode mode) {
    double lat = (s.x1 - s.y1) * (s.x1 - s.y1) + (s.x2 - s.y2) * (s.x2 - s.y2);
    double normal = mode == DistanceMode::direct ? (s.x3 - s.y3) : (s.x3 + s.y3);
    return lat + normal * normal;
}

struct GaussianFit {
    double c1 = 0.0;
    double c2 = 0.0;
    double p = 1.5;
    double max_violation = 0.0;
    double rms_residual = 0.0;
    bool degenerate = false; // all-zero kernel
};

// least-squares fit of log|K| <= log c1 - p log(dt) - c2 d^2/dt; c1 is then
// lifted to cover the grid, so max_violation <= 0 certifies the bound there
inline GaussianFit gaussian_bound_fit(const SpaceTimeKernel& kernel, double p,
                                      DistanceMode mode) {
    std::vector<double> u, z;
    double kmax = 0.0;
    for (const auto& s : kernel.samples) {
        if (s.t <= s.s) throw grid_error("gaussian fit requires samples at t > s");
        kmax = std::max(kmax, std::abs(s.K));
    }
    if (kernel.samples.empty()) throw grid_error("gaussian fit on an empty grid");
    GaussianFit fit;
    fit.p = p;
    if (kmax == 0.0) {
        fit.degenerate = true;
        return fit;
    }
    for (const auto& s : kernel.samples) {
        double a = std::abs(s.K);
        if (a < 1e-14 * kmax) continue; // cannot violate an upper bound
        double dt = s.t - s.s;
        u.push_back(distance2(s, mode) / dt);
        z.push_back(std::log(a) + p * std::log(dt));
    }
    size_t n = u.size();
    if (n < 2) throw grid_error("gaussian fit needs at least two usable samples");
    double su = 0, sz = 0, suu = 0, suz = 0;
    for (size_t i = 0; i < n; ++i) {
        su += u[i];
        sz += z[i];
        suu += u[i] * u[i];
        suz += u[i] * z[i];
    }
    double det = double(n) * suu - su * su;
    double slope = det != 0.0 ? (double(n) * suz - su * sz) / det : 0.0;
    double inter = (sz - slope * su) / double(n);
    fit.c2 = -slope;
    double shift = -std::numeric_limits<double>::infinity();
    double rss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double r = z[i] - (inter + slope * u[i]);
        shift = std::max(shift, r);
        rss += r * r;
    }
    fit.rms_residual = std::sqrt(rss / double(n));
    fit.c1 = std::exp(inter + shift);
    if (fit.c2 <= 0.0) {
        fit.max_violation = 1.0; // no Gaussian envelope with decay found
        return fit;
    }
    double viol = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i)
        viol = std::max(viol, z[i] - (std::log(fit.c1) - fit.c2 * u[i]));
    fit.max_violation = viol - 1e-12; // rounding slack on the covering shift
    return fit;
}

// ---------------------------------------------------------------------------
// truncation-error scaling probe
// ---------------------------------------------------------------------------

// Applies the exact variable-coefficient operator to the amplitude expansion
// truncated at `levels` (1 or 2) and measures the (t-s) power of the
// resulting kernel on the spatial diagonal.
struct TruncationReport {
    bool vacuous = false; // flat metric: residual identically zero
    double slope_levels[3] = {0, 0, 0}; // index by level count
    double gap() const { return slope_levels[2] - slope_levels[1]; }
};

namespace detail {

// value, d/du, d2/du2 of an exponential-polynomial branch at u = x3 - y3
struct PolyEval {
    cplx p{0}, dp{0}, d2p{0};
};

inline PolyEval eval_poly(const cplx* poly, size_t n, double u) {
    PolyEval e;
    cplx xp = 1.0;
    for (size_t l = 0; l < n; ++l) {
        e.p += poly[l] * xp;
        if (l + 1 < n) e.dp += double(l + 1) * poly[l + 1] * xp;
        if (l + 2 < n) e.d2p += double((l + 2) * (l + 1)) * poly[l + 2] * xp;
        xp *= u;
    }
    return e;
}

// frozen coefficients of the exact operator at a fixed height
struct TrueOpCoeffs {
    double m33;
    double m31, m32; // rows entering R1
    double q11, q12, q22;
    cplx c1;               // first-order d/dx3 coefficient
    double w1, w2, dm31, dm32; // pieces of the zeroth-order part
};

inline TrueOpCoeffs true_op_coeffs(const geometry::MetricField& metric, const Vec2& x_t,
                                   double x3) {
    Mat3 M = metric.M(x_t, x3);
    Mat3 dM = metric.dM_dx3(x_t, x3);
    double jfac = metric.dJ_dx3(x_t, x3) / metric.J_det(x_t, x3);
    TrueOpCoeffs c;
    c.m33 = M[2][2];
    c.m31 = M[2][0];
    c.m32 = M[2][1];
    c.q11 = M[0][0];
    c.q12 = M[0][1];
    c.q22 = M[1][1];
    c.c1 = dM[2][2] + jfac * M[2][2];
    c.dm31 = dM[2][0];
    c.dm32 = dM[2][1];
    c.w1 = jfac * M[0][2];
    c.w2 = jfac * M[1][2];
    return c;
}

inline cplx apply_true_operator(const TrueOpCoeffs& c, double gamma_k, cplx tau,
                                double xi1, double xi2, const PolyEval& e, cplx beta) {
    cplx R1 = c.m31 * xi1 + c.m32 * xi2;
    cplx Q = c.q11 * xi1 * xi1 + 2.0 * c.q12 * xi1 * xi2 + c.q22 * xi2 * xi2;
    cplx c0 = cplx(0, 1) * ((c.dm31 + c.w1) * xi1 + (c.dm32 + c.w2) * xi2);
    cplx v2 = e.d2p + 2.0 * beta * e.dp + beta * beta * e.p;
    cplx v1 = e.dp + beta * e.p;
    return gamma_k * (c.m33 * v2 + 2.0 * cplx(0, 1) * R1 * v1 - Q * e.p + c.c1 * v1 +
                      c0 * e.p) -
           tau * e.p;
}

} // namespace detail

// The residual kernel is sampled at the self-similar offsets
// x3 - y3 = c sqrt(dt): a fixed offset would be cut off by the Gaussian
// envelope, while the exact diagonal can sit on an odd-symmetry zero of the
// leading residual term.
inline TruncationReport truncation_error_probe(const geometry::MetricField& metric,
                                               double k, double y3,
                                               const std::vector<double>& dts,
                                               const ContourSpec& spec,
                                               double similarity_offset = 0.5) {
    if (dts.empty()) throw grid_error("truncation probe needs a t > s grid");
    for (double dt : dts)
        if (dt <= 0) throw grid_error("truncation probe needs t > s");
    TruncationReport rep;
    if (metric.kind == geometry::MetricKind::flat) {
        rep.vacuous = true;
        return rep;
    }

    const Vec2 x_t{0.0, 0.0};
    const geometry::Contrast contrast(k);
    const Mat3 M1 = metric.M(x_t, y3);
    const Mat3 M0 = metric.M(x_t, 0.0);
    const double J_y = metric.J_det(x_t, y3);
    const symbols::MetricDerivs md = symbols::metric_derivs(metric, x_t, y3);

    std::vector<double> heights;
    std::vector<detail::TrueOpCoeffs> op_coeffs;
    for (double dt : dts) {
        double x3 = std::min(0.0, y3 + similarity_offset * std::sqrt(dt));
        heights.push_back(x3);
        op_coeffs.push_back(detail::true_op_coeffs(metric, x_t, x3));
    }

    for (int levels : {1, 2}) {
        SymbolBatchFn batch = [&](double xi1, double xi2, cplx eta, cplx* out) {
            symbols::AmplitudeInputs in;
            in.M1 = M1;
            in.M0 = M0;
            in.J_y = J_y;
            in.xi_t = {cplx(xi1), cplx(xi2)};
            in.tau = cplx(0, 1) * eta;
            in.k = k;
            in.y3 = y3;
            symbols::CharRoots r = symbols::char_roots(M1, in.xi_t, in.tau, contrast);
            symbols::FirstOrderCoefficients fo = symbols::first_order_coefficients(in, r);
            symbols::L2SystemSolution sol;
            if (levels >= 2) sol = symbols::second_order_system(in, r, fo, md);

            // column 1, upper-side family: branches (LpLm, LmLm)
            const cplx beta_p = r.lambda_plus, beta_m = r.lambda_minus;
            const cplx delta = r.lambda_minus;
            for (size_t i = 0; i < heights.size(); ++i) {
                double x3 = heights[i];
                double u = x3 - y3;
                cplx total = 0.0;
                {
                    cplx poly1[3] = {-fo.A1 + fo.A2, sol.F[1][1], sol.F[2][1]};
                    cplx poly3[3] = {fo.A1, sol.F[1][3], sol.F[2][3]};
                    size_t n = levels >= 2 ? 3 : 1;
                    if (levels >= 2) {
                        poly1[0] += sol.C[1];
                        poly3[0] += sol.C[3];
                    }
                    total += detail::apply_true_operator(op_coeffs[i], 1.0, in.tau, xi1,
                                                         xi2, detail::eval_poly(poly1, n, u),
                                                         beta_p) *
                             std::exp(beta_p * x3 - delta * y3);
                    total += detail::apply_true_operator(op_coeffs[i], 1.0, in.tau, xi1,
                                                         xi2, detail::eval_poly(poly3, n, u),
                                                         beta_m) *
                             std::exp(beta_m * x3 - delta * y3);
                }
                out[i] = total;
            }
        };

        IlftEngine engine(spec, spec.mu_cone);
        std::vector<KernelTarget> targets;
        for (double dt : dts) targets.push_back({0.0, 0.0, dt});
        auto vals = engine.evaluate_batch(dts.size(), batch, targets, 2.0 * std::abs(y3));

        // log-log slope on the matched diagonal; the power law is an
        // asymptotic statement, so the grid should stay at small dt
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < dts.size(); ++i) {
            double lx = std::log(dts[i]);
            double ly = std::log(std::abs(vals[i][i]) + 1e-300);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        }
        double n = double(dts.size());
        rep.slope_levels[levels] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return rep;
}

} // namespace itpg::kernels
