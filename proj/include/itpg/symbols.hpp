#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "itpg/geometry.hpp"

// Symbol-level construction of the transmission parametrix: characteristic
// roots of the two frozen-coefficient quadratics, the Lopatinskii
// denominator of the coupled boundary system, and the exponential-polynomial
// amplitudes at orders -1 and -2 together with algebraic residual checks.

namespace itpg::symbols {

using geometry::Mat3;
using geometry::MetricField;
using geometry::Vec2;

using Vec2c = std::array<cplx, 2>;

inline cplx dotc(const Vec2c& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

// bracket <xi', tau>^2 = 1 + |xi'|^2 + |tau|
inline double bracket(const Vec2c& xi_t, cplx tau) {
    double n2 = std::norm(xi_t[0]) + std::norm(xi_t[1]);
    return std::sqrt(1.0 + n2 + std::abs(tau));
}

// point of the (xi', tau) frequency domain; mu_cone is the opening constant
// of the complex region used for contour deformation
struct FrequencyPoint {
    Vec2c xi_t{cplx(0), cplx(0)};
    cplx tau{1.0, 0.0};
    double mu_cone = 0.25;
};

// membership in the complex region L^2_mu:
//   Im eta < mu (|Re eta| + |Re xi'|^2) - mu^{-1} |Im xi'|^2
inline bool in_L2mu(const Vec2c& xi_t, cplx eta, double mu) {
    if (!(mu > 0.0)) throw config_error("in_L2mu requires mu > 0");
    double re2 = std::pow(xi_t[0].real(), 2) + std::pow(xi_t[1].real(), 2);
    double im2 = std::pow(xi_t[0].imag(), 2) + std::pow(xi_t[1].imag(), 2);
    return eta.imag() < mu * (std::abs(eta.real()) + re2) - im2 / mu;
}

// principal square root flipped onto Re > 0; a vanishing real part means the
// branch contract cannot be met
inline cplx sqrt_re_positive(cplx z) {
    cplx s = std::sqrt(z);
    if (s.real() < 0.0) s = -s;
    if (s.real() == 0.0 && std::abs(s) > 0.0)
        throw branch_failure_error("square root falls on the branch contract boundary");
    return s;
}

// ---------------------------------------------------------------------------
// characteristic roots
// ---------------------------------------------------------------------------

struct CharRoots {
    cplx lambda_plus, lambda_minus; // roots for the unit-diffusivity operator
    cplx mu_plus, mu_minus;         // roots for the k-diffusivity operator
    cplx S_lambda, S_mu;            // the square-root terms themselves
};

// scalar combinations of the frozen metric M1 = M|_{x3=y3}
struct FrozenSymbols {
    double m33;
    cplx R1; // sum_j m^1_{3j} xi_j
    cplx Q;  // sum_{j,l<=2} m^1_{jl} xi_j xi_l
};

inline FrozenSymbols freeze(const Mat3& M1, const Vec2c& xi_t) {
    FrozenSymbols f;
    f.m33 = M1[2][2];
    f.R1 = M1[2][0] * xi_t[0] + M1[2][1] * xi_t[1];
    f.Q = M1[0][0] * xi_t[0] * xi_t[0] + 2.0 * M1[0][1] * xi_t[0] * xi_t[1] +
          M1[1][1] * xi_t[1] * xi_t[1];
    return f;
}

// roots of m33 r^2 + 2 i R1 r - (Q + tau) = 0 and of the k-scaled variant
inline CharRoots char_roots(const Mat3& M1, const Vec2c& xi_t, cplx tau,
                            const geometry::Contrast& k) {
    if (!(M1[2][2] > 0.0)) throw invalid_metric_error("char_roots requires m33 > 0");
    FrozenSymbols f = freeze(M1, xi_t);
    CharRoots r;
    r.S_lambda = sqrt_re_positive(f.m33 * (f.Q + tau) - f.R1 * f.R1);
    r.S_mu = sqrt_re_positive(f.m33 * (f.Q + tau / k.k) - f.R1 * f.R1);
    cplx c = cplx(0, -1) * f.R1;
    r.lambda_plus = (c + r.S_lambda) / f.m33;
    r.lambda_minus = (c - r.S_lambda) / f.m33;
    r.mu_plus = (c + r.S_mu) / f.m33;
    r.mu_minus = (c - r.S_mu) / f.m33;
    return r;
}

// k (i R0 + mu_+ m^0_33) - (i R0 + lambda_+ m^0_33) with R0 = sum m^0_{3j} xi_j
inline cplx lopatinskii_denominator(const Mat3& M0, const Mat3& M1, const Vec2c& xi_t,
                                    cplx tau, const geometry::Contrast& k) {
    CharRoots r = char_roots(M1, xi_t, tau, k);
    cplx R0 = M0[2][0] * xi_t[0] + M0[2][1] * xi_t[1];
    cplx iR0(0, 0);
    iR0 = cplx(0, 1) * R0;
    return k.k * (iR0 + r.mu_plus * M0[2][2]) - (iR0 + r.lambda_plus * M0[2][2]);
}

inline bool lopatinskii_degenerate(cplx den, const Vec2c& xi_t, cplx tau) {
    return std::abs(den) < 1e-10 * bracket(xi_t, tau);
}

// ---------------------------------------------------------------------------
// amplitude representation
// ---------------------------------------------------------------------------

// the eight exponential branches exp(beta x3 - delta y3); beta/delta are
// drawn from the characteristic roots
enum class Branch : int {
    LpLm = 1, // lambda_+ x3 - lambda_- y3
    LpMm = 2, // lambda_+ x3 - mu_-     y3
    LmLm = 3, // lambda_- x3 - lambda_- y3
    LpLp = 4, // lambda_+ x3 - lambda_+ y3
    MpLm = 5, // mu_+     x3 - lambda_- y3
    MpMm = 6, // mu_+     x3 - mu_-     y3
    MmMm = 7, // mu_-     x3 - mu_-     y3
    MpMp = 8, // mu_+     x3 - mu_+     y3
};

inline cplx x3_rate(const CharRoots& r, Branch b) {
    switch (b) {
        case Branch::LpLm: case Branch::LpMm: case Branch::LpLp: return r.lambda_plus;
        case Branch::LmLm: return r.lambda_minus;
        case Branch::MpLm: case Branch::MpMm: case Branch::MpMp: return r.mu_plus;
        case Branch::MmMm: return r.mu_minus;
    }
    return 0.0;
}
inline cplx y3_rate(const CharRoots& r, Branch b) {
    switch (b) {
        case Branch::LpLm: case Branch::LmLm: case Branch::MpLm: return r.lambda_minus;
        case Branch::LpMm: case Branch::MpMm: case Branch::MmMm: return r.mu_minus;
        case Branch::LpLp: return r.lambda_plus;
        case Branch::MpMp: return r.mu_plus;
    }
    return 0.0;
}

struct BranchTerm {
    Branch branch;
    std::vector<cplx> poly;  // f_l on powers (x3-y3)^l
    std::vector<int> order;  // order label l - L per coefficient
};

enum class Family { a, b, d, e }; // kernels G^+, G^-, H^+, H^-

// amplitudes of one order level L (symbol order -L); the common factor
// exp(-tau s - i y'.xi') is kept separately in `phase`
struct AmplitudeSet {
    int ell = 1;   // column index, 1 or 2
    int level = 1; // L
    CharRoots roots;
    cplx phase{1.0, 0.0};
    double y3 = 0.0;
    std::vector<BranchTerm> a, b, d, e;

    const std::vector<BranchTerm>& family(Family f) const {
        switch (f) {
            case Family::a: return a;
            case Family::b: return b;
            case Family::d: return d;
            default: return e;
        }
    }

    // value at x3 (phase included)
    cplx eval(Family f, double x3) const {
        cplx s = 0.0;
        for (const auto& t : family(f)) {
            cplx expo = std::exp(x3_rate(roots, t.branch) * x3 - y3_rate(roots, t.branch) * y3);
            cplx p = 0.0, xp = 1.0;
            for (size_t l = 0; l < t.poly.size(); ++l) {
                p += t.poly[l] * xp;
                xp *= (x3 - y3);
            }
            s += p * expo;
        }
        return s * phase;
    }

    // d/dx3 at x3 (phase included)
    cplx eval_dx3(Family f, double x3) const {
        cplx s = 0.0;
        for (const auto& t : family(f)) {
            cplx beta = x3_rate(roots, t.branch);
            cplx expo = std::exp(beta * x3 - y3_rate(roots, t.branch) * y3);
            cplx p = 0.0, dp = 0.0, xp = 1.0;
            for (size_t l = 0; l < t.poly.size(); ++l) {
                p += t.poly[l] * xp;
                if (l + 1 < t.poly.size()) dp += double(l + 1) * t.poly[l + 1] * xp;
                xp *= (x3 - y3);
            }
            s += (dp + beta * p) * expo;
        }
        return s * phase;
    }

    const BranchTerm* find(Family f, Branch b) const {
        for (const auto& t : family(f))
            if (t.branch == b) return &t;
        return nullptr;
    }
};

// first-order boundary-system constants
struct FirstOrderCoefficients {
    cplx A1, B1, A2, B2;
    cplx denominator; // the Lopatinskii denominator they divide by
};

struct AmplitudeInputs {
    Mat3 M0, M1;
    double J_y = 1.0;
    Vec2c xi_t{cplx(0), cplx(0)};
    cplx tau{1.0, 0.0};
    double k = 2.0;
    double y3 = 0.0;
    double s = 0.0;
    Vec2 y_t{0.0, 0.0};
};

inline cplx phase_factor(const AmplitudeInputs& in) {
    return std::exp(-in.tau * in.s - cplx(0, 1) * dotc(in.xi_t, in.y_t));
}

inline FirstOrderCoefficients first_order_coefficients(const AmplitudeInputs& in,
                                                       const CharRoots& r) {
    FirstOrderCoefficients c;
    double m33_1 = in.M1[2][2], m33_0 = in.M0[2][2];
    cplx iR0 = cplx(0, 1) * (in.M0[2][0] * in.xi_t[0] + in.M0[2][1] * in.xi_t[1]);
    c.denominator = in.k * (iR0 + r.mu_plus * m33_0) - (iR0 + r.lambda_plus * m33_0);
    if (lopatinskii_degenerate(c.denominator, in.xi_t, in.tau))
        throw degeneracy_error("Lopatinskii denominator below tolerance");
    cplx dl = r.lambda_plus - r.lambda_minus;
    cplx dm = r.mu_plus - r.mu_minus;
    if (std::abs(dl) < 1e-12 * bracket(in.xi_t, in.tau) ||
        std::abs(dm) < 1e-12 * bracket(in.xi_t, in.tau))
        throw degeneracy_error("coincident characteristic roots");
    c.A1 = (1.0 / in.J_y) / (m33_1 * dl);
    c.B1 = (1.0 / in.J_y) / (in.k * m33_1 * dm);
    c.A2 = (r.lambda_minus - r.lambda_plus) * m33_0 * c.A1 / c.denominator;
    c.B2 = ((iR0 + r.lambda_plus * m33_0) - in.k * (iR0 + r.mu_minus * m33_0)) * c.B1 /
           c.denominator;
    return c;
}

// order -1 amplitudes of the four kernels for column ell
inline AmplitudeSet first_order_amplitudes(int ell, const AmplitudeInputs& in) {
    if (ell != 1 && ell != 2) throw config_error("column index must be 1 or 2");
    CharRoots r = char_roots(in.M1, in.xi_t, in.tau, geometry::Contrast(in.k));
    FirstOrderCoefficients c = first_order_coefficients(in, r);

    AmplitudeSet amp;
    amp.ell = ell;
    amp.level = 1;
    amp.roots = r;
    amp.phase = phase_factor(in);
    amp.y3 = in.y3;

    auto term = [](Branch b, cplx f0) {
        return BranchTerm{b, {f0}, {0 - 1}};
    };
    if (ell == 1) {
        amp.a = {term(Branch::LpLm, -c.A1 + c.A2), term(Branch::LmLm, c.A1)};
        amp.b = {term(Branch::LpLm, -c.A1 + c.A2), term(Branch::LpLp, c.A1)};
        amp.d = {term(Branch::MpLm, c.A2)};
        amp.e = {term(Branch::MpLm, c.A2)};
    } else {
        amp.a = {term(Branch::LpMm, c.B1 + c.B2)};
        amp.b = {term(Branch::LpMm, c.B1 + c.B2)};
        amp.d = {term(Branch::MpMm, c.B2), term(Branch::MmMm, c.B1)};
        amp.e = {term(Branch::MpMm, c.B2), term(Branch::MpMp, c.B1)};
    }
    return amp;
}

// ---------------------------------------------------------------------------
// order -2 amplitudes (layered or otherwise x'-independent metrics)
// ---------------------------------------------------------------------------

struct L2SystemSolution {
    // right-hand-side polynomial data of the lowered-order equations, per
    // branch j = 1..8 (index 0 unused)
    std::array<std::array<cplx, 9>, 2> E{}; // E[l][j], l = 0,1
    std::array<std::array<cplx, 9>, 3> F{}; // F[l][j], l = 1,2 (row 0 unused)
    cplx A3{}, B3{}, A4{}, B4{}, A5{}, B5{}, A6{}, B6{}, A7{}, B7{};
    std::array<cplx, 13> C{}; // C[1..12]
};

namespace detail {

// branch data used when building the order -2 right-hand sides
struct BranchSeed {
    Branch branch;
    cplx coeff;   // order -1 coefficient on this branch
    double gamma; // 1 for the unit operator, k for the k-scaled one
};

} // namespace detail

// x3-derivative data of an x'-independent metric at the source depth
struct MetricDerivs {
    Mat3 dM{};
    double jfac = 0.0; // (d Jdet / dx3) / Jdet
};

inline MetricDerivs metric_derivs(const MetricField& metric, const Vec2& x_t, double x3) {
    MetricDerivs d;
    d.dM = metric.dM_dx3(x_t, x3);
    d.jfac = metric.dJ_dx3(x_t, x3) / metric.J_det(x_t, x3);
    return d;
}

// allocation-free core of the order -2 construction
inline L2SystemSolution second_order_system(const AmplitudeInputs& in, const CharRoots& r,
                                            const FirstOrderCoefficients& fo,
                                            const MetricDerivs& md) {
    double m33_1 = in.M1[2][2], m33_0 = in.M0[2][2];
    cplx R1 = in.M1[2][0] * in.xi_t[0] + in.M1[2][1] * in.xi_t[1];
    cplx iR0 = cplx(0, 1) * (in.M0[2][0] * in.xi_t[0] + in.M0[2][1] * in.xi_t[1]);

    double m33p = md.dM[2][2];
    cplx R1p = md.dM[2][0] * in.xi_t[0] + md.dM[2][1] * in.xi_t[1];
    cplx Qp = md.dM[0][0] * in.xi_t[0] * in.xi_t[0] +
              2.0 * md.dM[0][1] * in.xi_t[0] * in.xi_t[1] +
              md.dM[1][1] * in.xi_t[1] * in.xi_t[1];
    // W = Jdet^{-1} M grad(Jdet); layered fields have grad = (0,0,d/dx3)
    double w3 = md.jfac * in.M1[2][2];
    cplx wsum = md.jfac * (in.M1[0][2] * in.xi_t[0] + in.M1[1][2] * in.xi_t[1]);

    // the first-order part of the operator frozen at y3, applied to a pure
    // exponential of rate beta:  (m33' + w3) beta + i (R1' + wsum)
    auto theta_coeffs = [&](cplx coeff, cplx beta, double gamma, cplx& E0, cplx& E1) {
        E1 = -coeff * gamma * (m33p * beta * beta + 2.0 * cplx(0, 1) * R1p * beta - Qp);
        E0 = -coeff * gamma * ((m33p + w3) * beta + cplx(0, 1) * (R1p + wsum));
    };

    L2SystemSolution sol;
    const std::array<detail::BranchSeed, 8> seeds = {{
        {Branch::LpLm, -fo.A1 + fo.A2, 1.0},
        {Branch::LpMm, fo.B1 + fo.B2, 1.0},
        {Branch::LmLm, fo.A1, 1.0},
        {Branch::LpLp, fo.A1, 1.0},
        {Branch::MpLm, fo.A2, in.k},
        {Branch::MpMm, fo.B2, in.k},
        {Branch::MmMm, fo.B1, in.k},
        {Branch::MpMp, fo.B1, in.k},
    }};

    // particular polynomial coefficients per branch:
    //   F2 = E1 / (4 gamma (beta m33 + i R1))
    //   F1 = (E0 - 2 gamma m33 F2) / (2 gamma (beta m33 + i R1))
    for (int j = 1; j <= 8; ++j) {
        const auto& sd = seeds[j - 1];
        cplx beta = x3_rate(r, sd.branch);
        theta_coeffs(sd.coeff, beta, sd.gamma, sol.E[0][j], sol.E[1][j]);
        cplx den = sd.gamma * (beta * m33_1 + cplx(0, 1) * R1);
        if (std::abs(den) < 1e-14 * bracket(in.xi_t, in.tau))
            throw degeneracy_error("vanishing particular-solution denominator");
        sol.F[2][j] = sol.E[1][j] / (4.0 * den);
        sol.F[1][j] = (sol.E[0][j] - 2.0 * sd.gamma * m33_1 * sol.F[2][j]) / (2.0 * den);
    }

    const auto& F = sol.F;
    cplx dl = r.lambda_plus - r.lambda_minus;
    cplx dm = r.mu_plus - r.mu_minus;
    sol.C[3] = (F[1][3] - F[1][4]) / dl;
    sol.C[9] = (F[1][7] - F[1][8]) / dm;
    sol.C[6] = sol.C[3];
    sol.C[12] = sol.C[9];

    auto pow_my3 = [&](int l) { return std::pow(-in.y3, l); };

    // boundary matching right-hand sides assembled from the polynomial parts
    sol.A3 = 0.0; sol.B3 = 0.0;
    for (int l = 1; l <= 2; ++l) {
        sol.A3 -= (F[l][1] + F[l][3] - F[l][5]) * pow_my3(l);
        sol.B3 -= (F[l][2] - F[l][6] - F[l][7]) * pow_my3(l);
    }

    sol.A4 = 0.0; sol.B4 = 0.0;
    for (int l = 1; l <= 2; ++l) {
        sol.A4 -= iR0 * (F[l][1] + F[l][3]) * pow_my3(l);
        sol.A4 -= m33_0 * (double(l) * (F[l][1] + F[l][3]) * pow_my3(l - 1) +
                           (r.lambda_plus * F[l][1] + r.lambda_minus * F[l][3]) * pow_my3(l));
        sol.A4 += in.k * iR0 * F[l][5] * pow_my3(l);
        sol.A4 += in.k * m33_0 *
                  (double(l) * F[l][5] * pow_my3(l - 1) + r.mu_plus * F[l][5] * pow_my3(l));

        sol.B4 -= iR0 * F[l][2] * pow_my3(l);
        sol.B4 -= m33_0 * (double(l) * F[l][2] * pow_my3(l - 1) +
                           r.lambda_plus * F[l][2] * pow_my3(l));
        sol.B4 += in.k * iR0 * (F[l][6] + F[l][7]) * pow_my3(l);
        sol.B4 += in.k * m33_0 *
                  (double(l) * (F[l][6] + F[l][7]) * pow_my3(l - 1) +
                   (r.mu_plus * F[l][6] + r.mu_minus * F[l][7]) * pow_my3(l));
    }

    sol.A5 = sol.A3 - sol.C[3];
    sol.B5 = sol.B3 + sol.C[9];
    sol.A6 = sol.A4 - (iR0 + r.lambda_minus * m33_0) * sol.C[3];
    sol.B6 = sol.B4 + in.k * (iR0 + r.mu_minus * m33_0) * sol.C[9];

    sol.A7 = ((iR0 + r.lambda_plus * m33_0) * sol.A5 - sol.A6) / fo.denominator;
    sol.B7 = ((iR0 + r.lambda_plus * m33_0) * sol.B5 - sol.B6) / fo.denominator;

    sol.C[1] = sol.C[4] = sol.A5 + sol.A7;
    sol.C[2] = sol.C[5] = sol.B5 + sol.B7;
    sol.C[7] = sol.C[10] = sol.A7;
    sol.C[8] = sol.C[11] = sol.B7;
    return sol;
}

// Builds the order -2 amplitudes for metrics whose coefficients do not
// depend on x' (flat or layered).  Returns the amplitude set together with
// the full constant-system solution for inspection.
inline std::pair<AmplitudeSet, L2SystemSolution>
second_order_amplitudes(int ell, const MetricField& metric, const AmplitudeInputs& in) {
    if (ell != 1 && ell != 2) throw config_error("column index must be 1 or 2");
    if (!metric.x_prime_independent())
        throw config_error("order -2 amplitudes need an x'-independent metric");
    if (!metric.has_x3_derivatives())
        throw config_error("order -2 amplitudes need analytic x3 derivatives of the metric");

    CharRoots r = char_roots(in.M1, in.xi_t, in.tau, geometry::Contrast(in.k));
    FirstOrderCoefficients fo = first_order_coefficients(in, r);
    L2SystemSolution sol = second_order_system(in, r, fo, metric_derivs(metric, in.y_t, in.y3));
    const auto& F = sol.F;

    AmplitudeSet amp;
    amp.ell = ell;
    amp.level = 2;
    amp.roots = r;
    amp.phase = phase_factor(in);
    amp.y3 = in.y3;

    auto term = [&](Branch b, int j, cplx c0) {
        return BranchTerm{b, {c0, F[1][j], F[2][j]}, {-2, -1, 0}};
    };
    if (ell == 1) {
        amp.a = {term(Branch::LpLm, 1, sol.C[1]), term(Branch::LmLm, 3, sol.C[3])};
        amp.b = {term(Branch::LpLm, 1, sol.C[4]), term(Branch::LpLp, 4, sol.C[6])};
        amp.d = {term(Branch::MpLm, 5, sol.C[7])};
        amp.e = {term(Branch::MpLm, 5, sol.C[10])};
    } else {
        amp.a = {term(Branch::LpMm, 2, sol.C[2])};
        amp.b = {term(Branch::LpMm, 2, sol.C[5])};
        amp.d = {term(Branch::MpMm, 6, sol.C[8]), term(Branch::MmMm, 7, sol.C[9])};
        amp.e = {term(Branch::MpMm, 6, sol.C[11]), term(Branch::MpMp, 8, sol.C[12])};
    }
    return {amp, sol};
}

// ---------------------------------------------------------------------------
// residuals of the transmission/boundary system (diagnostic)
// ---------------------------------------------------------------------------

// Evaluates the six matching conditions of the amplitude construction on a
// given set: continuity and flux jump across x3 = y3 for both operator
// families, then continuity and the contrast-weighted flux balance at
// x3 = 0.  Residuals are normalized by the magnitude of the participating
// terms, so a correctly built set returns values at rounding level.
inline std::array<double, 6> verify_transmission_system(const AmplitudeSet& amp,
                                                        const AmplitudeInputs& in) {
    const double y3 = amp.y3;
    cplx R1 = in.M1[2][0] * in.xi_t[0] + in.M1[2][1] * in.xi_t[1];
    cplx R0 = in.M0[2][0] * in.xi_t[0] + in.M0[2][1] * in.xi_t[1];
    double m33_1 = in.M1[2][2], m33_0 = in.M0[2][2];

    cplx a_y = amp.eval(Family::a, y3), b_y = amp.eval(Family::b, y3);
    cplx d_y = amp.eval(Family::d, y3), e_y = amp.eval(Family::e, y3);
    cplx da_y = amp.eval_dx3(Family::a, y3), db_y = amp.eval_dx3(Family::b, y3);
    cplx dd_y = amp.eval_dx3(Family::d, y3), de_y = amp.eval_dx3(Family::e, y3);
    cplx a_0 = amp.eval(Family::a, 0.0), d_0 = amp.eval(Family::d, 0.0);
    cplx da_0 = amp.eval_dx3(Family::a, 0.0), dd_0 = amp.eval_dx3(Family::d, 0.0);

    // delta jumps appear only at the leading order
    cplx jump_a = 0.0, jump_d = 0.0;
    if (amp.level == 1) {
        cplx ph = amp.phase / in.J_y;
        jump_a = double(2 - amp.ell) * ph;
        jump_d = double(amp.ell - 1) * ph;
    }

    auto rel = [](cplx resid, std::initializer_list<cplx> terms) {
        double scale = 0.0;
        for (cplx t : terms) scale += std::abs(t);
        if (scale < 1e-300) scale = 1.0;
        return std::abs(resid) / scale;
    };

    std::array<double, 6> res{};
    // continuity across x3 = y3
    res[0] = rel(a_y - b_y, {a_y, b_y});
    res[2] = rel(d_y - e_y, {d_y, e_y});
    // flux jumps across x3 = y3 (the tangential part cancels with continuity)
    cplx f_ab = m33_1 * (da_y - db_y) + cplx(0, 1) * R1 * (a_y - b_y);
    res[1] = rel(f_ab + jump_a, {m33_1 * da_y, m33_1 * db_y, jump_a});
    cplx f_de = in.k * (m33_1 * (dd_y - de_y) + cplx(0, 1) * R1 * (d_y - e_y));
    res[3] = rel(f_de + jump_d, {in.k * m33_1 * dd_y, in.k * m33_1 * de_y, jump_d});
    // boundary matching at x3 = 0
    res[4] = rel(a_0 - d_0, {a_0, d_0});
    cplx flux_a = cplx(0, 1) * R0 * a_0 + m33_0 * da_0;
    cplx flux_d = cplx(0, 1) * R0 * d_0 + m33_0 * dd_0;
    res[5] = rel(flux_a - in.k * flux_d, {flux_a, in.k * flux_d});
    return res;
}

// residual of the frozen second-order operator applied to the order -2
// amplitudes against the lowered-order right-hand side, sampled in x3
inline double ode_residual(const AmplitudeSet& amp2, const L2SystemSolution& sol,
                           const AmplitudeInputs& in, int n_samples = 9) {
    CharRoots r = amp2.roots;
    double m33 = in.M1[2][2];
    cplx R1 = in.M1[2][0] * in.xi_t[0] + in.M1[2][1] * in.xi_t[1];
    cplx Q = in.M1[0][0] * in.xi_t[0] * in.xi_t[0] +
             2.0 * in.M1[0][1] * in.xi_t[0] * in.xi_t[1] +
             in.M1[1][1] * in.xi_t[1] * in.xi_t[1];

    struct Case { Family f; double gamma; };
    const std::array<Case, 4> cases = {{{Family::a, 1.0}, {Family::b, 1.0},
                                        {Family::d, in.k}, {Family::e, in.k}}};

    double worst = 0.0;
    for (const auto& cs : cases) {
        const auto& terms = amp2.family(cs.f);
        for (int m = 0; m < n_samples; ++m) {
            double x3 = in.y3 * (double(m) / std::max(1, n_samples - 1));
            // apply gamma*(m33 d2 + 2 i R1 d - Q) - tau frozen at y3
            cplx lhs = 0.0, rhs = 0.0;
            double scale = 0.0;
            for (const auto& t : terms) {
                cplx beta = x3_rate(r, t.branch);
                cplx expo = std::exp(beta * x3 - y3_rate(r, t.branch) * amp2.y3);
                cplx p = 0, dp = 0, d2p = 0, xp = 1;
                double u = x3 - amp2.y3;
                for (size_t l = 0; l < t.poly.size(); ++l) {
                    p += t.poly[l] * xp;
                    if (l + 1 < t.poly.size()) dp += double(l + 1) * t.poly[l + 1] * xp;
                    if (l + 2 < t.poly.size())
                        d2p += double((l + 2) * (l + 1)) * t.poly[l + 2] * xp;
                    xp *= u;
                }
                cplx v2 = d2p + 2.0 * beta * dp + beta * beta * p;
                cplx v1 = dp + beta * p;
                lhs += (cs.gamma * (m33 * v2 + 2.0 * cplx(0, 1) * R1 * v1 - Q * p) -
                        in.tau * p) * expo;
                // matching branch of the right-hand side
                int j = 0;
                switch (t.branch) {
                    case Branch::LpLm: j = 1; break;
                    case Branch::LpMm: j = 2; break;
                    case Branch::LmLm: j = 3; break;
                    case Branch::LpLp: j = 4; break;
                    case Branch::MpLm: j = 5; break;
                    case Branch::MpMm: j = 6; break;
                    case Branch::MmMm: j = 7; break;
                    case Branch::MpMp: j = 8; break;
                }
                rhs += (sol.E[0][j] + sol.E[1][j] * u) * expo;
                scale += std::abs(sol.E[0][j] * expo) + std::abs(sol.E[1][j] * u * expo) +
                         std::abs(cs.gamma * m33 * v2 * expo);
            }
            if (scale < 1e-300) continue;
            worst = std::max(worst, std::abs(lhs - rhs) / scale);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// diagnostics over the complex frequency region
// ---------------------------------------------------------------------------

struct Claim31Report {
    size_t samples = 0;
    size_t violations = 0;
    double min_distance = std::numeric_limits<double>::infinity();
};

inline double distance_to_ray(cplx z) {
    // distance from z to [0, inf)
    if (z.real() >= 0.0) return std::abs(z.imag());
    return std::abs(z);
}

// checks that p1^2 - 4 p0 p2 + 4 p0 i eta stays away from [0,inf) for
// sampled (xi', eta) in L^2_mu; p's are the frozen normal-direction
// quadratic coefficients
inline Claim31Report claim31_check(const Mat3& M, double mu, size_t n_samples, Rng& rng) {
    Claim31Report rep;
    double p0 = -M[2][2];
    while (rep.samples < n_samples) {
        Vec2c xi{cplx(rng.uniform(-6, 6), rng.uniform(-1.5, 1.5)),
                 cplx(rng.uniform(-6, 6), rng.uniform(-1.5, 1.5))};
        double re2 = std::pow(xi[0].real(), 2) + std::pow(xi[1].real(), 2);
        double im2 = std::pow(xi[0].imag(), 2) + std::pow(xi[1].imag(), 2);
        double eta_re = rng.uniform(-40, 40);
        double upper = mu * (std::abs(eta_re) + re2) - im2 / mu;
        double eta_im = upper - std::exp(rng.uniform(-6.0, 3.0)); // strictly below
        cplx eta(eta_re, eta_im);
        if (!in_L2mu(xi, eta, mu)) continue;
        ++rep.samples;
        cplx p1 = -2.0 * (M[2][0] * xi[0] + M[2][1] * xi[1]);
        cplx p2 = -(M[0][0] * xi[0] * xi[0] + 2.0 * M[0][1] * xi[0] * xi[1] +
                    M[1][1] * xi[1] * xi[1]);
        cplx val = p1 * p1 - 4.0 * p0 * p2 + 4.0 * p0 * cplx(0, 1) * eta;
        double d = distance_to_ray(val);
        rep.min_distance = std::min(rep.min_distance, d);
        if (!(d > 0.0)) ++rep.violations;
    }
    return rep;
}

struct OrderProbeReport {
    double sup_ratio = 0.0;       // sup |a| <xi',tau>^{-m} over the grid
    double ratio_at_largest = 0.0; // ratio at the largest bracket sampled
    bool bounded(double cap) const { return sup_ratio <= cap; }
};

// empirical check of the symbol-order bound |a| <= C <xi',tau>^m over a
// log-spaced real-regime grid
template <typename SymbolFn>
OrderProbeReport symbol_order_probe(SymbolFn&& symbol, double claimed_order,
                                    double tau_min = 1.0, double tau_max = 1e6,
                                    int n_tau = 25, int n_xi = 9) {
    OrderProbeReport rep;
    double largest_bracket = 0.0;
    for (int i = 0; i < n_tau; ++i) {
        double tau = tau_min * std::pow(tau_max / tau_min, double(i) / (n_tau - 1));
        for (int j = 0; j < n_xi; ++j) {
            double xi = (j == 0) ? 0.0 : std::pow(10.0, -1.0 + 4.0 * (j - 1) / (n_xi - 2));
            Vec2c xi_t{cplx(xi, 0), cplx(0, 0)};
            cplx tc(tau, 0.0);
            double br = bracket(xi_t, tc);
            double ratio = std::abs(symbol(xi_t, tc)) * std::pow(br, -claimed_order);
            rep.sup_ratio = std::max(rep.sup_ratio, ratio);
            if (br > largest_bracket) {
                largest_bracket = br;
                rep.ratio_at_largest = ratio;
            }
        }
    }
    return rep;
}

} // namespace itpg::symbols
