#pragma once

#include <array>
#include <functional>
#include <iostream>

#include "itpg/common.hpp"

namespace itpg::geometry {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec2 = std::array<double, 2>;

inline Mat3 identity3() {
    return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
}

// smallest eigenvalue of a symmetric 3x3 via characteristic cubic
inline double min_eigenvalue_sym3(const Mat3& m) {
    double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if (p1 == 0.0) return std::min({m[0][0], m[1][1], m[2][2]});
    double p2 = 0.0;
    for (int i = 0; i < 3; ++i) p2 += (m[i][i] - q) * (m[i][i] - q);
    p2 += 2.0 * p1;
    double p = std::sqrt(p2 / 6.0);
    Mat3 b;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
    double detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                  b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                  b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    double r = std::clamp(detb / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    // eigenvalues q + 2p cos(phi + 2k pi/3); the k=2 shift gives the smallest
    return q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
}

inline double det3(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// ---------------------------------------------------------------------------
// diffusion contrast k (inclusion vs background)
// ---------------------------------------------------------------------------

struct Contrast {
    double k = 2.0;

    explicit Contrast(double k_) : k(k_) {
        if (!(k > 0.0)) throw config_error("contrast k must be positive");
        if (k == 1.0)
            throw config_error("contrast k = 1 is degenerate (boundary system loses rank)");
        if (k < 1.0)
            std::cerr << "[itpg] warning: contrast k = " << k
                      << " < 1 accepted; the construction only needs k != 1\n";
    }
};

// ---------------------------------------------------------------------------
// point on the interior side of the flattened boundary {x3 = 0}
// ---------------------------------------------------------------------------

struct HalfSpacePoint {
    Vec2 x_t{0.0, 0.0};
    double x3 = 0.0;

    HalfSpacePoint() = default;
    HalfSpacePoint(Vec2 xt, double x3_) : x_t(xt), x3(x3_) {
        if (x3 > 0.0) throw config_error("half-space point requires x3 <= 0");
    }
};

// ---------------------------------------------------------------------------
// coefficient field of the flattened operator: M(x) = J J^T and the
// Jacobian determinant factor.  Supplied as analytic closures; layered
// fields also carry their x3 derivatives (needed by the order -2 symbols).
// ---------------------------------------------------------------------------

enum class MetricKind { flat, layered, chart };

class MetricField {
  public:
    using MatFn = std::function<Mat3(const Vec2&, double)>;   // (x', x3) -> M
    using ScalFn = std::function<double(const Vec2&, double)>; // (x', x3) -> scalar

    MetricKind kind = MetricKind::flat;

    MetricField() = default;

    Mat3 M(const Vec2& xt, double x3) const {
        Mat3 m = m_ ? m_(xt, x3) : identity3();
        validate(m, xt, x3);
        return m;
    }
    double J_det(const Vec2& xt, double x3) const {
        double j = jdet_ ? jdet_(xt, x3) : 1.0;
        if (!(j > 0.0)) throw invalid_metric_error("Jacobian determinant must be positive");
        return j;
    }

    bool has_x3_derivatives() const { return bool(dm_dx3_); }
    // x'-independent fields (flat, layered) are the ones the order -2
    // construction accepts; chart metrics generally depend on x'.
    bool x_prime_independent() const { return kind != MetricKind::chart; }

    Mat3 dM_dx3(const Vec2& xt, double x3) const {
        if (!dm_dx3_)
            throw config_error("metric does not supply x3 derivatives of its coefficients");
        return dm_dx3_(xt, x3);
    }
    double dJ_dx3(const Vec2& xt, double x3) const {
        if (!djdet_dx3_)
            throw config_error("metric does not supply the x3 derivative of its Jacobian factor");
        return djdet_dx3_(xt, x3);
    }

    static MetricField flat_field() {
        MetricField f;
        f.kind = MetricKind::flat;
        f.dm_dx3_ = [](const Vec2&, double) { return Mat3{{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}}; };
        f.djdet_dx3_ = [](const Vec2&, double) { return 0.0; };
        return f;
    }

    static MetricField layered_field(std::function<Mat3(double)> m,
                                     std::function<Mat3(double)> dm,
                                     std::function<double(double)> j,
                                     std::function<double(double)> dj) {
        MetricField f;
        f.kind = MetricKind::layered;
        f.m_ = [m](const Vec2&, double x3) { return m(x3); };
        f.dm_dx3_ = [dm](const Vec2&, double x3) { return dm(x3); };
        f.jdet_ = [j](const Vec2&, double x3) { return j(x3); };
        f.djdet_dx3_ = [dj](const Vec2&, double x3) { return dj(x3); };
        return f;
    }

    // metric induced by flattening the graph boundary x3 = eta(x') through
    // (x', x3) |-> (x', x3 - eta(x')); volume preserving, so Jdet = 1
    static MetricField graph_chart_field(std::function<double(const Vec2&)> eta_grad1,
                                         std::function<double(const Vec2&)> eta_grad2) {
        MetricField f;
        f.kind = MetricKind::chart;
        f.m_ = [eta_grad1, eta_grad2](const Vec2& xt, double) {
            double g1 = eta_grad1(xt), g2 = eta_grad2(xt);
            // J = [[1,0,0],[0,1,0],[-g1,-g2,1]], M = J J^T
            Mat3 m = identity3();
            m[0][2] = m[2][0] = -g1;
            m[1][2] = m[2][1] = -g2;
            m[2][2] = 1.0 + g1 * g1 + g2 * g2;
            return m;
        };
        f.dm_dx3_ = [](const Vec2&, double) { return Mat3{{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}}; };
        f.djdet_dx3_ = [](const Vec2&, double) { return 0.0; };
        return f;
    }

  private:
    MatFn m_;
    MatFn dm_dx3_;
    ScalFn jdet_;
    ScalFn djdet_dx3_;

    static void validate(const Mat3& m, const Vec2& xt, double x3) {
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                if (std::abs(m[i][j] - m[j][i]) > 1e-12 * (1.0 + std::abs(m[i][j])))
                    throw invalid_metric_error("metric matrix is not symmetric");
        if (min_eigenvalue_sym3(m) <= 0.0) {
            throw invalid_metric_error("metric matrix not positive definite at (" +
                                       std::to_string(xt[0]) + "," + std::to_string(xt[1]) +
                                       "," + std::to_string(x3) + ")");
        }
    }
};

inline MetricField flat_metric() { return MetricField::flat_field(); }

// layered field with m33(x3) = 1 + profile(x3) type perturbations of the
// identity; caller supplies the six independent entries and derivatives
struct LayeredProfile {
    // entry functions of x3 for (11,22,33,12,13,23); defaults give identity
    std::function<double(double)> m11 = [](double) { return 1.0; };
    std::function<double(double)> m22 = [](double) { return 1.0; };
    std::function<double(double)> m33 = [](double) { return 1.0; };
    std::function<double(double)> m12 = [](double) { return 0.0; };
    std::function<double(double)> m13 = [](double) { return 0.0; };
    std::function<double(double)> m23 = [](double) { return 0.0; };
    std::function<double(double)> d11 = [](double) { return 0.0; };
    std::function<double(double)> d22 = [](double) { return 0.0; };
    std::function<double(double)> d33 = [](double) { return 0.0; };
    std::function<double(double)> d12 = [](double) { return 0.0; };
    std::function<double(double)> d13 = [](double) { return 0.0; };
    std::function<double(double)> d23 = [](double) { return 0.0; };
    std::function<double(double)> jdet = [](double) { return 1.0; };
    std::function<double(double)> djdet = [](double) { return 0.0; };
};

inline MetricField layered_metric(const LayeredProfile& p) {
    auto m = [p](double x3) {
        Mat3 mm;
        mm[0][0] = p.m11(x3); mm[1][1] = p.m22(x3); mm[2][2] = p.m33(x3);
        mm[0][1] = mm[1][0] = p.m12(x3);
        mm[0][2] = mm[2][0] = p.m13(x3);
        mm[1][2] = mm[2][1] = p.m23(x3);
        return mm;
    };
    auto dm = [p](double x3) {
        Mat3 mm;
        mm[0][0] = p.d11(x3); mm[1][1] = p.d22(x3); mm[2][2] = p.d33(x3);
        mm[0][1] = mm[1][0] = p.d12(x3);
        mm[0][2] = mm[2][0] = p.d13(x3);
        mm[1][2] = mm[2][1] = p.d23(x3);
        return mm;
    };
    return MetricField::layered_field(m, dm, p.jdet, p.djdet);
}

// ---------------------------------------------------------------------------
// model slab used for the patched parametrix
// ---------------------------------------------------------------------------

struct SlabDomain {
    double depth = 1.0;          // slab occupies x3 in [-depth, 0]
    double lateral_extent = 2.0; // x' in [0, lateral_extent]^2
    int n_lateral = 16;
    int n_depth = 16;

    SlabDomain() = default;
    SlabDomain(double d, double lx, int nl, int nd)
        : depth(d), lateral_extent(lx), n_lateral(nl), n_depth(nd) {
        if (!(depth > 0) || !(lateral_extent > 0))
            throw config_error("slab extents must be positive");
        if (nl < 2 || nd < 2) throw config_error("slab grid too coarse");
    }

    double h_lateral() const { return lateral_extent / (n_lateral - 1); }
    double h_depth() const { return depth / (n_depth - 1); }
};

// restriction of the metric to the source depth and to the boundary:
// M1 = M(x', y3), M0 = M(x', 0), plus the Jacobian factor at the source
struct RestrictedMetric {
    Mat3 M1;
    Mat3 M0;
    double J_y;
};

inline RestrictedMetric restrict_metric(const MetricField& metric, double y3, const Vec2& x_t) {
    if (y3 > 0.0) throw config_error("restrict: source depth must satisfy y3 <= 0");
    RestrictedMetric r;
    r.M1 = metric.M(x_t, y3);
    r.M0 = metric.M(x_t, 0.0);
    r.J_y = metric.J_det(x_t, y3);
    return r;
}

} // namespace itpg::geometry
