#pragma once

#include <vector>

#include "itpg/geometry.hpp"

// Smooth cutoffs built from the exp(-1/x) glue, and partitions of unity on
// an interval with the support-separation property needed by the patched
// parametrix: each companion cutoff equals one on the support of its
// partition function, so the commutator terms live at a positive distance
// from the sources they multiply.

namespace itpg::partition {

// C-infinity step: 0 for r <= 0, 1 for r >= 1, with analytic derivatives
inline double smooth_step(double r) {
    if (r <= 0.0) return 0.0;
    if (r >= 1.0) return 1.0;
    double a = std::exp(-1.0 / r);
    double b = std::exp(-1.0 / (1.0 - r));
    return a / (a + b);
}

inline double smooth_step_d1(double r) {
    if (r <= 0.0 || r >= 1.0) return 0.0;
    double a = std::exp(-1.0 / r);
    double b = std::exp(-1.0 / (1.0 - r));
    double ap = a / (r * r);
    double u = 1.0 - r;
    double bp = -b / (u * u);
    double s = a + b;
    return (ap * b - a * bp) / (s * s);
}

inline double smooth_step_d2(double r) {
    if (r <= 0.0 || r >= 1.0) return 0.0;
    double a = std::exp(-1.0 / r);
    double b = std::exp(-1.0 / (1.0 - r));
    double ap = a / (r * r);
    double app = a * (1.0 / (r * r * r * r) - 2.0 / (r * r * r));
    double u = 1.0 - r;
    double bp = -b / (u * u);
    double bpp = b * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
    double s = a + b;
    return (app * b - a * bpp) / (s * s) -
           2.0 * (ap * b - a * bp) * (ap + bp) / (s * s * s);
}

// piecewise description: 1 on [plateau_lo, plateau_hi], smooth transitions of
// widths wl / wr outside, 0 beyond
struct Cutoff {
    double plateau_lo, plateau_hi;
    double wl, wr; // transition widths (0 = hard one-sided plateau to the domain edge)

    double value(double x) const {
        if (x < plateau_lo) {
            if (wl <= 0.0) return x < plateau_lo ? 0.0 : 1.0;
            return smooth_step(1.0 - (plateau_lo - x) / wl);
        }
        if (x > plateau_hi) {
            if (wr <= 0.0) return 0.0;
            return smooth_step(1.0 - (x - plateau_hi) / wr);
        }
        return 1.0;
    }
    double d1(double x) const {
        if (x < plateau_lo && wl > 0.0) return smooth_step_d1(1.0 - (plateau_lo - x) / wl) / wl;
        if (x > plateau_hi && wr > 0.0) return -smooth_step_d1(1.0 - (x - plateau_hi) / wr) / wr;
        return 0.0;
    }
    double d2(double x) const {
        if (x < plateau_lo && wl > 0.0)
            return smooth_step_d2(1.0 - (plateau_lo - x) / wl) / (wl * wl);
        if (x > plateau_hi && wr > 0.0)
            return smooth_step_d2(1.0 - (x - plateau_hi) / wr) / (wr * wr);
        return 0.0;
    }
    double supp_lo() const { return wl > 0.0 ? plateau_lo - wl : -1e300; }
    double supp_hi() const { return wr > 0.0 ? plateau_hi + wr : 1e300; }
};

// three-chart partition of unity on [a, b]: left collar, interior, right
// collar, with companions separated from the partition supports
struct IntervalPartition {
    double a, b;
    Cutoff phi_left, phi_right;  // boundary-chart weights
    Cutoff psi_left, psi_right;  // companions (one on the phi supports)
    Cutoff psi_mid;              // companion of phi_mid = 1 - phi_left - phi_right

    double phi_mid(double x) const {
        return 1.0 - phi_left.value(x) - phi_right.value(x);
    }

    // layout fractions are relative to the interval length
    static IntervalPartition build(double a, double b, double collar = 0.28,
                                   double trans = 0.12, double gap = 0.05) {
        double L = b - a;
        if (collar + trans >= 0.5)
            throw config_error("interval partition collars overlap in the middle");
        IntervalPartition p;
        p.a = a;
        p.b = b;
        double c = collar * L, w = trans * L, g = gap * L;
        p.phi_left = {a, a + c, 0.0, w};
        p.phi_right = {b - c, b, w, 0.0};
        // companions: one on the closed supports, decaying behind a gap
        p.psi_left = {a, a + c + w + g, 0.0, w};
        p.psi_right = {b - c - w - g, b, w, 0.0};
        // interior weight is 1 - phi_L - phi_R, supported on [a+c, b-c];
        // its companion is one there and vanishes before the endpoints
        double inner_lo = a + c, inner_hi = b - c;
        double m_lo = inner_lo - g, m_hi = inner_hi + g;
        double w0 = std::min(w, m_lo - a - 0.02 * L);
        if (w0 <= 0.0) throw config_error("interior companion has no room to decay");
        p.psi_mid = {m_lo, m_hi, w0, w0};
        return p;
    }

    // checks: sum of weights is one, companions sit on the supports, and the
    // companion transition zones avoid the partition supports
    void validate(int n_grid = 2048) const {
        for (int i = 0; i <= n_grid; ++i) {
            double x = a + (b - a) * double(i) / n_grid;
            double s = phi_left.value(x) + phi_right.value(x) + phi_mid(x);
            if (std::abs(s - 1.0) > 1e-12)
                throw config_error("interval partition does not sum to one");
            if (phi_left.value(x) > 0.0 && psi_left.value(x) != 1.0)
                throw config_error("left companion not one on its chart weight");
            if (phi_right.value(x) > 0.0 && psi_right.value(x) != 1.0)
                throw config_error("right companion not one on its chart weight");
            if (phi_mid(x) > 1e-14 && psi_mid.value(x) != 1.0)
                throw config_error("interior companion not one on its chart weight");
        }
    }
};

} // namespace itpg::partition
