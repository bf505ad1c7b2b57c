#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itpg/symbols.hpp"

using namespace itpg;
using namespace itpg::geometry;
using namespace itpg::symbols;

namespace {

AmplitudeInputs flat_inputs(cplx tau, double k, Vec2c xi = {cplx(0), cplx(0)},
                            double y3 = -0.5) {
    AmplitudeInputs in;
    in.M0 = identity3();
    in.M1 = identity3();
    in.J_y = 1.0;
    in.xi_t = xi;
    in.tau = tau;
    in.k = k;
    in.y3 = y3;
    return in;
}

// random layered field with smooth, SPD-preserving perturbations
MetricField random_layered(Rng& rng, LayeredProfile* out = nullptr) {
    double a = rng.uniform(-0.25, 0.25);
    double b = rng.uniform(-0.25, 0.25);
    double c = rng.uniform(-0.15, 0.15);
    double w = rng.uniform(0.5, 2.0);
    LayeredProfile p;
    p.m11 = [a, w](double x3) { return 1.0 + a * std::sin(w * x3); };
    p.d11 = [a, w](double x3) { return a * w * std::cos(w * x3); };
    p.m22 = [b](double x3) { return 1.0 + b * x3 * x3; };
    p.d22 = [b](double x3) { return 2.0 * b * x3; };
    p.m33 = [a, w](double x3) { return 1.3 + a * std::cos(w * x3); };
    p.d33 = [a, w](double x3) { return -a * w * std::sin(w * x3); };
    p.m13 = [c](double x3) { return c * x3; };
    p.d13 = [c](double) { return c; };
    p.jdet = [b](double x3) { return 1.0 + 0.2 * b * std::sin(x3); };
    p.djdet = [b](double x3) { return 0.2 * b * std::cos(x3); };
    if (out) *out = p;
    return layered_metric(p);
}

} // namespace

TEST_CASE("characteristic roots on the flat metric") {
    Contrast k(4.0);
    CharRoots r = char_roots(identity3(), {cplx(0), cplx(0)}, 4.0, k);
    CHECK(std::abs(r.lambda_plus - 2.0) < 1e-14);
    CHECK(std::abs(r.lambda_minus + 2.0) < 1e-14);
    CHECK(std::abs(r.mu_plus - 1.0) < 1e-14);
    CHECK(std::abs(r.mu_minus + 1.0) < 1e-14);

    CharRoots r2 = char_roots(identity3(), {cplx(3), cplx(4)}, 11.0, k);
    CHECK(r2.lambda_plus.real() == doctest::Approx(6.0));
    CHECK(r2.lambda_plus.imag() == doctest::Approx(0.0));
}

TEST_CASE("degenerate m33 rejected") {
    Mat3 m = identity3();
    m[2][2] = 0.0;
    CHECK_THROWS_AS(char_roots(m, {cplx(0), cplx(0)}, 1.0, Contrast(4.0)), invalid_metric_error);
}

TEST_CASE("roots satisfy their quadratics and the Vieta identities") {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        MetricField f = random_layered(rng);
        double y3 = rng.uniform(-1.5, -0.01);
        Mat3 M1 = f.M({0, 0}, y3);
        Vec2c xi{cplx(rng.uniform(-5, 5)), cplx(rng.uniform(-5, 5))};
        cplx tau(rng.uniform(0.3, 30.0), rng.uniform(-10.0, 10.0));
        double kk = rng.uniform(1.5, 8.0);
        CharRoots r = char_roots(M1, xi, tau, Contrast(kk));
        FrozenSymbols fz = freeze(M1, xi);
        double scale = std::abs(tau) + std::norm(xi[0]) + std::norm(xi[1]) + 1.0;

        auto quad = [&](cplx root, cplx tk) {
            return fz.m33 * root * root + 2.0 * cplx(0, 1) * fz.R1 * root - (fz.Q + tk);
        };
        CHECK(std::abs(quad(r.lambda_plus, tau)) / scale < 1e-12);
        CHECK(std::abs(quad(r.lambda_minus, tau)) / scale < 1e-12);
        CHECK(std::abs(quad(r.mu_plus, tau / kk)) / scale < 1e-12);
        CHECK(std::abs(quad(r.mu_minus, tau / kk)) / scale < 1e-12);

        // Vieta: sum of each pair is -2 i R1 / m33
        cplx vieta = -2.0 * cplx(0, 1) * fz.R1 / fz.m33;
        CHECK(std::abs(r.lambda_plus + r.lambda_minus - vieta) / std::sqrt(scale) < 1e-12);
        CHECK(std::abs(r.mu_plus + r.mu_minus - vieta) / std::sqrt(scale) < 1e-12);
        // branch contract
        CHECK(r.S_lambda.real() > 0.0);
        CHECK(r.S_mu.real() > 0.0);
    }
}

TEST_CASE("Lopatinskii denominator values") {
    Contrast k4(4.0);
    cplx den = lopatinskii_denominator(identity3(), identity3(), {cplx(0), cplx(0)}, 4.0, k4);
    CHECK(den.real() == doctest::Approx(2.0));
    CHECK(den.imag() == doctest::Approx(0.0));

    cplx den2 = lopatinskii_denominator(identity3(), identity3(), {cplx(0), cplx(0)}, 1.0, k4);
    CHECK(den2.real() == doctest::Approx(1.0));

    // k -> 1 collapses the denominator; the degeneracy signal must fire
    Mat3 I = identity3();
    Vec2c xi{cplx(0), cplx(0)};
    cplx tau = 4.0;
    CharRoots r = char_roots(I, xi, tau, Contrast(1.0 + 1e-13));
    cplx den3 = (1.0 + 1e-13) * (r.mu_plus) - (r.lambda_plus);
    CHECK(lopatinskii_degenerate(den3, xi, tau));
}

TEST_CASE("first-order coefficients at the reference point") {
    AmplitudeInputs in = flat_inputs(4.0, 4.0);
    CharRoots r = char_roots(in.M1, in.xi_t, in.tau, Contrast(in.k));
    FirstOrderCoefficients c = first_order_coefficients(in, r);
    CHECK(c.A1.real() == doctest::Approx(0.25));
    CHECK(c.B1.real() == doctest::Approx(0.125));
    CHECK(c.A2.real() == doctest::Approx(-0.5));
    CHECK(c.B2.real() == doctest::Approx(0.375));
}

TEST_CASE("order -1 amplitude branches carry the expected coefficients") {
    AmplitudeInputs in = flat_inputs(4.0, 4.0);

    AmplitudeSet a1 = first_order_amplitudes(1, in);
    const BranchTerm* refl = a1.find(Family::a, Branch::LpLm);
    const BranchTerm* free = a1.find(Family::a, Branch::LmLm);
    REQUIRE(refl != nullptr);
    REQUIRE(free != nullptr);
    CHECK(refl->poly[0].real() == doctest::Approx(-0.75));
    CHECK(free->poly[0].real() == doctest::Approx(0.25));
    CHECK(a1.find(Family::a, Branch::LpMm) == nullptr); // column-2 branch absent

    AmplitudeSet a2 = first_order_amplitudes(2, in);
    const BranchTerm* d_refl = a2.find(Family::d, Branch::MpMm);
    const BranchTerm* d_free = a2.find(Family::d, Branch::MmMm);
    REQUIRE(d_refl != nullptr);
    REQUIRE(d_free != nullptr);
    CHECK(d_refl->poly[0].real() == doctest::Approx(0.375));
    CHECK(d_free->poly[0].real() == doctest::Approx(0.125));

    // free-space terms coincide with standalone A1/B1 (principal parts)
    CharRoots r = char_roots(in.M1, in.xi_t, in.tau, Contrast(in.k));
    FirstOrderCoefficients c = first_order_coefficients(in, r);
    CHECK(std::abs(free->poly[0] - c.A1) == 0.0);
    const BranchTerm* e_free = a2.find(Family::e, Branch::MpMp);
    REQUIRE(e_free != nullptr);
    CHECK(std::abs(e_free->poly[0] - c.B1) == 0.0);
}

TEST_CASE("transmission residuals vanish for constructed order -1 sets") {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        MetricField f = random_layered(rng);
        double y3 = rng.uniform(-1.0, -0.05);
        AmplitudeInputs in;
        in.M1 = f.M({0, 0}, y3);
        in.M0 = f.M({0, 0}, 0.0);
        in.J_y = f.J_det({0, 0}, y3);
        in.xi_t = {cplx(rng.uniform(-4, 4)), cplx(rng.uniform(-4, 4))};
        in.tau = cplx(rng.uniform(0.5, 20.0), rng.uniform(-8.0, 8.0));
        in.k = rng.uniform(1.3, 6.0);
        in.y3 = y3;
        in.s = rng.uniform(0.0, 0.4);
        in.y_t = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (int ell : {1, 2}) {
            AmplitudeSet amp = first_order_amplitudes(ell, in);
            auto res = verify_transmission_system(amp, in);
            for (double r : res) CHECK(r < 1e-12);
        }
    }
}

TEST_CASE("perturbed coefficients are detected by the residual check") {
    AmplitudeInputs in = flat_inputs(4.0, 4.0);
    AmplitudeSet amp = first_order_amplitudes(1, in);
    // corrupt A2's contribution on the reflected branch by 10%
    for (auto& t : amp.a)
        if (t.branch == Branch::LpLm) t.poly[0] *= 1.1;
    for (auto& t : amp.b)
        if (t.branch == Branch::LpLm) t.poly[0] *= 1.1;
    auto res = verify_transmission_system(amp, in);
    CHECK(res[4] > 1e-3); // boundary continuity broken
    CHECK(res[5] > 1e-3); // boundary flux broken
}

TEST_CASE("order -2 amplitudes vanish identically on the flat metric") {
    MetricField f = flat_metric();
    AmplitudeInputs in = flat_inputs(5.0, 3.0, {cplx(1.0), cplx(-0.5)});
    auto [amp, sol] = second_order_amplitudes(1, f, in);
    for (const auto& fam : {Family::a, Family::b, Family::d, Family::e})
        for (double x3 : {-0.9, -0.5, -0.1, 0.0})
            CHECK(std::abs(amp.eval(fam, x3)) < 1e-15);
    for (int j = 1; j <= 8; ++j) {
        CHECK(std::abs(sol.E[0][j]) == 0.0);
        CHECK(std::abs(sol.E[1][j]) == 0.0);
    }
}

TEST_CASE("order -2 construction passes residual and ODE checks on layered metrics") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        MetricField f = random_layered(rng);
        double y3 = rng.uniform(-1.0, -0.05);
        AmplitudeInputs in;
        in.M1 = f.M({0, 0}, y3);
        in.M0 = f.M({0, 0}, 0.0);
        in.J_y = f.J_det({0, 0}, y3);
        in.xi_t = {cplx(rng.uniform(-3, 3)), cplx(rng.uniform(-3, 3))};
        in.tau = cplx(rng.uniform(0.5, 15.0), rng.uniform(-5.0, 5.0));
        in.k = rng.uniform(1.3, 6.0);
        in.y3 = y3;
        for (int ell : {1, 2}) {
            auto [amp, sol] = second_order_amplitudes(ell, f, in);
            auto res = verify_transmission_system(amp, in);
            for (double r : res) CHECK(r < 1e-10);
            CHECK(ode_residual(amp, sol, in) < 1e-10);
            // constant-system invariants
            cplx dl = amp.roots.lambda_plus - amp.roots.lambda_minus;
            cplx dm = amp.roots.mu_plus - amp.roots.mu_minus;
            CHECK(std::abs(sol.C[3] - (sol.F[1][3] - sol.F[1][4]) / dl) == 0.0);
            CHECK(std::abs(sol.C[9] - (sol.F[1][7] - sol.F[1][8]) / dm) == 0.0);
        }
    }
}

TEST_CASE("order -2 coefficients scale linearly in the layer slope") {
    auto make = [](double eps) {
        LayeredProfile p;
        p.m33 = [eps](double x3) { return 1.0 + eps * x3; };
        p.d33 = [eps](double) { return eps; };
        return layered_metric(p);
    };
    AmplitudeInputs in = flat_inputs(3.0, 4.0, {cplx(0.7), cplx(-0.3)}, -0.4);
    double norm3 = 0.0, norm4 = 0.0;
    for (double eps : {1e-3, 1e-4}) {
        MetricField f = make(eps);
        in.M1 = f.M({0, 0}, in.y3);
        in.M0 = f.M({0, 0}, 0.0);
        auto [amp, sol] = second_order_amplitudes(1, f, in);
        double n = 0.0;
        for (const auto& t : amp.a)
            for (cplx c : t.poly) n += std::abs(c);
        (eps == 1e-3 ? norm3 : norm4) = n;
    }
    CHECK(norm3 / norm4 == doctest::Approx(10.0).epsilon(1e-2));
}

TEST_CASE("order -2 requires derivative data and x'-independence") {
    MetricField chart = MetricField::graph_chart_field(
        [](const Vec2& xt) { return 0.1 * xt[1]; }, [](const Vec2& xt) { return 0.1 * xt[0]; });
    AmplitudeInputs in = flat_inputs(2.0, 4.0);
    in.M1 = chart.M({0, 0}, in.y3);
    in.M0 = chart.M({0, 0}, 0.0);
    CHECK_THROWS_AS(second_order_amplitudes(1, chart, in), config_error);
}

TEST_CASE("order bookkeeping labels equal l - L") {
    AmplitudeInputs in = flat_inputs(4.0, 4.0);
    AmplitudeSet a1 = first_order_amplitudes(1, in);
    for (const auto& t : a1.a)
        for (size_t l = 0; l < t.order.size(); ++l) CHECK(t.order[l] == int(l) - 1);

    LayeredProfile p;
    p.m33 = [](double x3) { return 1.0 + 0.1 * x3; };
    p.d33 = [](double) { return 0.1; };
    MetricField f = layered_metric(p);
    in.M1 = f.M({0, 0}, in.y3);
    in.M0 = f.M({0, 0}, 0.0);
    auto [a2, sol] = second_order_amplitudes(2, f, in);
    for (const auto& t : a2.d)
        for (size_t l = 0; l < t.order.size(); ++l) CHECK(t.order[l] == int(l) - 2);
}

TEST_CASE("L2mu membership") {
    // Im eta < 0 is always inside for real xi'
    CHECK(in_L2mu({cplx(1.0), cplx(2.0)}, cplx(1.0, -1.0), 0.5));
    // boundary point is excluded (strict inequality)
    double mu = 0.7;
    Vec2c xi{cplx(1.2), cplx(0)};
    double bound = mu * (std::abs(3.0) + 1.2 * 1.2);
    CHECK_FALSE(in_L2mu(xi, cplx(3.0, bound), mu));
    CHECK(in_L2mu(xi, cplx(3.0, bound - 1e-9), mu));
    // purely imaginary xi' pushes the admissible region down
    CHECK_FALSE(in_L2mu({cplx(0, 1), cplx(0)}, cplx(0.0, 0.0), 1.0));
    CHECK_THROWS_AS(in_L2mu(xi, cplx(0), -1.0), config_error);
}

TEST_CASE("claim check: flat-metric discriminant avoids the positive ray") {
    // flat: value = -4|xi'|^2 - 4 i eta
    Vec2c xi{cplx(1.5), cplx(0)};
    cplx val = -4.0 * (1.5 * 1.5) - 4.0 * cplx(0, 1) * cplx(0.0, 0.0);
    CHECK(val.real() < 0.0);
    CHECK(distance_to_ray(val) > 0.0);
    // real eta != 0 gives a nonzero imaginary part
    cplx val2 = -4.0 * (1.5 * 1.5) - 4.0 * cplx(0, 1) * cplx(2.0, 0.0);
    CHECK(std::abs(val2.imag()) > 0.0);

    Rng rng(3);
    auto rep = claim31_check(identity3(), 0.25, 2000, rng);
    CHECK(rep.samples == 2000);
    CHECK(rep.violations == 0);
    CHECK(rep.min_distance > 0.0);

    auto empty = claim31_check(identity3(), 0.25, 0, rng);
    CHECK(empty.samples == 0);
    CHECK(empty.violations == 0);
}

TEST_CASE("symbol order probe") {
    Contrast k(4.0);
    auto A1_flat = [&](const Vec2c& xi, cplx tau) {
        CharRoots r = char_roots(identity3(), xi, tau, k);
        return 1.0 / (r.lambda_plus - r.lambda_minus);
    };
    auto rep = symbol_order_probe(A1_flat, -1.0);
    // sup of <xi,tau>/(2 sqrt(|xi|^2+tau)) over tau >= 1 is sqrt(2)/2,
    // attained at the grid corner; the large-parameter limit is 1/2
    CHECK(rep.bounded(0.7072));
    CHECK(rep.sup_ratio == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-6));
    CHECK(rep.ratio_at_largest == doctest::Approx(0.5).epsilon(1e-3));

    // wrong claimed order is reported as unbounded growth
    auto one = [](const Vec2c&, cplx) { return cplx(1.0); };
    auto bad = symbol_order_probe(one, -1.0);
    CHECK(bad.sup_ratio > 100.0);

    // products add orders: A1 * B1-like decay probes bounded at -2
    auto prod = [&](const Vec2c& xi, cplx tau) {
        CharRoots r = char_roots(identity3(), xi, tau, k);
        return 1.0 / ((r.lambda_plus - r.lambda_minus) * (r.mu_plus - r.mu_minus));
    };
    CHECK(symbol_order_probe(prod, -2.0).bounded(1.01));
}

TEST_CASE("order -1 amplitude components stay bounded at order -1") {
    AmplitudeInputs base = flat_inputs(1.0, 4.0);
    auto coeff = [&](int which) {
        return [&, which](const Vec2c& xi, cplx tau) {
            AmplitudeInputs in = base;
            in.xi_t = xi;
            in.tau = tau;
            CharRoots r = char_roots(in.M1, xi, tau, Contrast(in.k));
            FirstOrderCoefficients c = first_order_coefficients(in, r);
            switch (which) {
                case 0: return c.A1;
                case 1: return c.B1;
                case 2: return c.A2;
                default: return c.B2;
            }
        };
    };
    for (int which = 0; which < 4; ++which) {
        auto rep = symbol_order_probe(coeff(which), -1.0);
        CHECK(rep.sup_ratio < 2.0);
    }
}
