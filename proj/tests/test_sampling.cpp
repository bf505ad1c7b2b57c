#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itpg/sampling.hpp"

using namespace itpg;
using namespace itpg::sampling;

TEST_CASE("conductor solver: validation, zero flux, mass balance") {
    CHECK_THROWS_AS(OmegaSolver(100, 1e-3, 0.1, 4.0, -0.1, 0.5), config_error);
    CHECK_THROWS_AS(OmegaSolver(100, 1e-3, 0.1, 1.0, 0.3, 0.6), config_error);

    std::vector<double> g(2 * 40, 0.0);
    auto trace = forward_nd(100, 2.5e-3, 0.1, 4.0, 0.4, 0.7, g);
    for (double v : trace) CHECK(v == 0.0);

    // constant influx raises the mass linearly
    OmegaSolver solver(100, 2.5e-3, 0.1);
    std::vector<double> u(solver.n_nodes(), 0.0);
    for (int m = 0; m < 40; ++m) solver.step(u, 1.0, 1.0);
    CHECK(solver.mass(u) == doctest::Approx(2.0 * 0.1).epsilon(1e-10));
}

TEST_CASE("flux map is causal: the response ignores future inputs") {
    NDMap map = forward_nd_map(100, 5e-3, 0.2, 4.0, 0.4, 0.7);
    Rng rng(3);
    std::vector<double> g(map.dim());
    for (double& v : g) v = rng.normal();
    auto full = map.apply(g);
    // truncate inputs after level mcut: outputs before mcut are unchanged
    int mcut = map.n_t / 2;
    std::vector<double> gcut = g;
    for (int m = mcut; m < map.n_t; ++m) gcut[2 * m] = gcut[2 * m + 1] = 0.0;
    auto cut = map.apply(gcut);
    for (int m = 0; m < mcut; ++m) {
        CHECK(cut[2 * m] == full[2 * m]);
        CHECK(cut[2 * m + 1] == full[2 * m + 1]);
    }
}

TEST_CASE("gap operator equals the forward difference on arbitrary fluxes") {
    int nc = 80;
    double dt = 5e-3, T = 0.2, k = 4.0;
    NDMap lam_d = forward_nd_map(nc, dt, T, k, 0.4, 0.7);
    NDMap lam_0 = forward_nd_map(nc, dt, T, 1.0, 0.0, 0.0);
    GapOperator gap = GapOperator::build(lam_d, lam_0);
    Rng rng(7);
    std::vector<double> g(lam_d.dim());
    for (double& v : g) v = rng.normal();
    auto d1 = forward_nd(nc, dt, T, k, 0.4, 0.7, g);
    auto d0 = forward_nd(nc, dt, T, 1.0, 0.0, 0.0, g);
    auto viaop = lam_d.apply(g);
    for (int i = 0; i < lam_d.dim(); ++i) {
        CHECK(viaop[i] == doctest::Approx(d1[i]).epsilon(1e-9));
        double want = d1[i] - d0[i];
        double got = 0.0;
        for (int j = 0; j < lam_d.dim(); ++j) got += gap.A[i][j] * g[j];
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("contrast continuity: the inclusion map approaches the background as k -> 1") {
    int nc = 80;
    double dt = 5e-3, T = 0.2;
    std::vector<double> g(2 * 40, 0.0);
    for (int m = 0; m < 40; ++m) g[2 * m] = 1.0; // steady left flux
    auto base = forward_nd(nc, dt, T, 1.0, 0.0, 0.0, g);
    double prev = 1e300;
    for (double k : {1.5, 1.1, 1.01}) {
        auto tr = forward_nd(nc, dt, T, k, 0.4, 0.7, g);
        double dev = 0.0;
        for (size_t i = 0; i < tr.size(); ++i) dev = std::max(dev, std::abs(tr[i] - base[i]));
        CHECK(dev < prev);
        prev = dev;
    }
    CHECK(prev < 5e-3);
}

TEST_CASE("background source: causality, short-time kernel limit, conservation") {
    int nc = 200;
    double dt = 1e-3, T = 0.15, y = 0.45, s = 0.1, eps = 0.05;
    OmegaGreen og = green_omega(nc, dt, T, y, s, eps, true);
    int m_start = int(std::round(s / dt));
    for (int m = 0; m + 1 < m_start; ++m) {
        CHECK(og.trace[2 * m] == 0.0);
        CHECK(og.trace[2 * m + 1] == 0.0);
    }
    // mass conservation after release
    OmegaSolver solver(nc, dt, T);
    CHECK(solver.mass(og.field.back()) == doctest::Approx(1.0).epsilon(1e-8));
    // short-time interior match to the free kernel smeared by the mollifier
    int m_probe = m_start + 6;
    double lag = (m_probe + 1) * dt - s;
    double sig2 = 2.0 * lag + eps * eps;
    double worst = 0.0;
    for (int i = 0; i < solver.n_nodes(); ++i) {
        double xx = solver.x(i);
        if (std::abs(xx - y) > 0.06) continue;
        double ref = std::exp(-0.5 * (xx - y) * (xx - y) / sig2) /
                     std::sqrt(2.0 * pi * sig2);
        worst = std::max(worst, std::abs(og.field[m_probe][i] - ref) / ref);
    }
    CHECK(worst < 0.05);
}

TEST_CASE("gap solve: zero data, zero operator, regularization path") {
    int nc = 80;
    double dt = 1e-2, T = 0.3, k = 4.0;
    NDMap lam_d = forward_nd_map(nc, dt, T, k, 0.4, 0.7);
    NDMap lam_0 = forward_nd_map(nc, dt, T, 1.0, 0.0, 0.0);
    GapSolver solver(GapOperator::build(lam_d, lam_0));

    std::vector<double> zero(lam_d.dim(), 0.0);
    GapSolution s0 = solver.solve(zero, 1e-6);
    CHECK(s0.g_norm == 0.0);
    CHECK_THROWS_AS(solver.solve(zero, 0.0), config_error);

    // empty inclusion: zero operator leaves the full data residual
    GapSolver trivial(GapOperator::build(lam_0, lam_0));
    OmegaGreen rhs = green_omega(nc, dt, T, 0.5, 0.1, 0.03);
    GapSolution st = trivial.solve(rhs.trace, 1e-8);
    CHECK(st.g_norm < 1e-12);
    double bnorm = 0.0;
    for (double v : rhs.trace) bnorm += v * v;
    CHECK(st.residual == doctest::Approx(std::sqrt(bnorm)).epsilon(1e-10));

    // probe inside the inclusion: residual decreases along the alpha path
    OmegaGreen in_rhs = green_omega(nc, dt, T, 0.55, 0.1, 0.03);
    double prev_res = 1e300;
    for (double alpha : {1e-2, 1e-4, 1e-6, 1e-8}) {
        GapSolution s = solver.solve(in_rhs.trace, alpha);
        CHECK(s.residual < prev_res);
        prev_res = s.residual;
    }
}

TEST_CASE("indicator scan recovers the inclusion on a reduced setup") {
    SamplingSetup su;
    su.n_cells = 100;
    su.dt = 1e-2;
    su.T = 0.6;
    su.alphas = {1e-4, 1e-8, 1e-12};
    std::vector<double> probes;
    for (double y = 0.16; y <= 0.85; y += 0.03) probes.push_back(y);
    IndicatorField field = indicator_scan(su, probes);
    CHECK(field.median_outside > 3.0 * field.median_inside);
    CHECK(std::abs(field.est_d1 - su.d1) < 0.06);
    CHECK(std::abs(field.est_d2 - su.d2) < 0.06);
}
