#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itpg/kernels.hpp"

using namespace itpg;
using namespace itpg::geometry;
using namespace itpg::symbols;
using namespace itpg::kernels;

namespace {

FrozenSetup flat_setup(double k, double x3, double y3) {
    FrozenSetup fs;
    fs.M0 = identity3();
    fs.M1 = identity3();
    fs.J_y = 1.0;
    fs.k = k;
    fs.x3 = x3;
    fs.y3 = y3;
    return fs;
}

} // namespace

TEST_CASE("contour spec validation") {
    ContourSpec spec;
    CHECK_NOTHROW(spec.validated(0.25));
    spec.q_offset = -1.0;
    CHECK_THROWS_AS(spec.validated(0.25), config_error);
}

TEST_CASE("zero symbol transforms to zero") {
    ContourSpec spec;
    IlftEngine engine(spec);
    auto zero = [](double, double, cplx) { return cplx(0); };
    CHECK(std::abs(engine.evaluate_one(zero, {0.3, -0.2, 0.2}, 1.0)) == 0.0);
}

TEST_CASE("free branch reproduces the heat kernel, including the unit point value") {
    ContourSpec spec;
    double k = 4.0;

    // x = y at dt = 1/(4 pi): closed form gives exactly 1
    {
        FrozenSetup fs = flat_setup(k, -0.5, -0.5);
        cplx v = leading_kernel(1, Family::a, Branch::LmLm, fs, {0, 0}, 1.0 / (4.0 * pi),
                                {0, 0}, 0.0, spec);
        CHECK(std::abs(v - 1.0) < 1e-4);
        CHECK(std::abs(v.imag()) < 1e-6);
    }

    // scaled grid of offsets and times, evaluated in per-time batches
    FrozenCoeffs fc{identity3(), identity3(), 1.0, k};
    for (double dt : {0.01, 0.08, 0.4}) {
        double w = std::sqrt(4.0 * dt);
        std::vector<BranchRequest> reqs;
        for (double ar : {0.0, 0.6, 1.2})
            reqs.push_back({1, Family::a, Branch::LmLm, -0.2, -0.2 - ar * w});
        std::vector<KernelTarget> tgts;
        for (double ax : {0.0, 0.7, 1.4}) tgts.push_back({ax * w, 0.1 * w, dt});
        auto vals = leading_kernel_batch(fc, reqs, tgts, spec);
        for (size_t r = 0; r < reqs.size(); ++r)
            for (size_t t = 0; t < tgts.size(); ++t) {
                double rho = reqs[r].x3 - reqs[r].y3;
                double d2 = tgts[t].dx1 * tgts[t].dx1 + tgts[t].dx2 * tgts[t].dx2 + rho * rho;
                double ref = heat_kernel3(d2, dt);
                CHECK(std::abs(vals[t][r] - ref) <= 1e-3 * ref);
            }
    }
}

TEST_CASE("k-diffusivity free branch matches the scaled heat kernel") {
    ContourSpec spec;
    double k = 4.0;
    FrozenCoeffs fc{identity3(), identity3(), 1.0, k};
    std::vector<BranchRequest> reqs;
    for (double rho : {0.0, 0.4})
        reqs.push_back({2, Family::e, Branch::MpMp, -0.3 - rho, -0.3}); // x3 < y3
    std::vector<KernelTarget> tgts{{0.2, 0.0, 0.05}, {0.2, 0.0, 0.3}};
    auto vals = leading_kernel_batch(fc, reqs, tgts, spec);
    for (size_t r = 0; r < reqs.size(); ++r)
        for (size_t t = 0; t < tgts.size(); ++t) {
            double rho = reqs[r].y3 - reqs[r].x3;
            double ref = heat_kernel3(0.04 + rho * rho, tgts[t].dt, k);
            CHECK(std::abs(vals[t][r] - ref) <= 2e-3 * ref);
        }
}

TEST_CASE("causality: kernels vanish for t < s") {
    ContourSpec spec;
    FrozenCoeffs fc{identity3(), identity3(), 1.0, 4.0};
    std::vector<BranchRequest> reqs{{1, Family::a, Branch::LmLm, -0.4, -0.6},
                                    {1, Family::a, Branch::LpLm, -0.4, -0.6}};
    std::vector<KernelTarget> tgts;
    for (double dt : {0.05, 0.2, 0.6, -0.05, -0.15, -0.5}) tgts.push_back({0.1, 0.0, dt});
    auto vals = leading_kernel_batch(fc, reqs, tgts, spec);
    for (size_t r = 0; r < reqs.size(); ++r) {
        double sup_pos = 0.0, sup_neg = 0.0;
        for (size_t t = 0; t < tgts.size(); ++t)
            (tgts[t].dt > 0 ? sup_pos : sup_neg) =
                std::max(tgts[t].dt > 0 ? sup_pos : sup_neg, std::abs(vals[t][r]));
        CHECK(sup_neg < 1e-6 * sup_pos);
    }
}

TEST_CASE("family side consistency is enforced") {
    ContourSpec spec;
    FrozenSetup fs = flat_setup(4.0, -0.8, -0.2); // x3 < y3
    CHECK_THROWS_AS(leading_kernel(1, Family::a, Branch::LmLm, fs, {0, 0}, 0.1, {0, 0}, 0.0,
                                   spec),
                    config_error);
}

TEST_CASE("quadrature is converged: refinement changes results below 1e-4") {
    ContourSpec spec, fine = spec;
    fine.refine = 2.0;
    FrozenSetup fs = flat_setup(3.0, -0.1, -0.45);
    for (double dt : {0.02, 0.3}) {
        cplx a = leading_kernel(1, Family::a, Branch::LpLm, fs, {0.4, -0.2}, dt, {0, 0}, 0.0,
                                spec);
        cplx b = leading_kernel(1, Family::a, Branch::LpLm, fs, {0.4, -0.2}, dt, {0, 0}, 0.0,
                                fine);
        CHECK(std::abs(a - b) <= 1e-4 * std::abs(b));
    }
}

TEST_CASE("gaussian bound fit: exact heat kernel gives c2 = 1/4") {
    SpaceTimeKernel kern;
    for (double dt : {0.02, 0.05, 0.1, 0.3, 0.8})
        for (double d : {0.0, 0.2, 0.5, 0.9}) {
            KernelSample s;
            s.x3 = -d;
            s.y3 = 0.0;
            s.t = dt;
            s.K = heat_kernel3(d * d, dt);
            kern.samples.push_back(s);
        }
    GaussianFit fit = gaussian_bound_fit(kern, 1.5, DistanceMode::direct);
    CHECK(fit.c2 == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(fit.max_violation <= 0.0);
    CHECK(fit.rms_residual < 1e-10);
    CHECK(fit.c1 == doctest::Approx(std::pow(4.0 * pi, -1.5)).epsilon(1e-6));
}

TEST_CASE("gaussian bound fit: degenerate and error cases") {
    SpaceTimeKernel zero;
    for (double dt : {0.1, 0.2}) {
        KernelSample s;
        s.t = dt;
        zero.samples.push_back(s);
    }
    GaussianFit fit = gaussian_bound_fit(zero, 1.5, DistanceMode::direct);
    CHECK(fit.degenerate);
    CHECK(fit.max_violation == 0.0);

    SpaceTimeKernel empty;
    CHECK_THROWS_AS(gaussian_bound_fit(empty, 1.5, DistanceMode::direct), grid_error);

    SpaceTimeKernel acausal;
    KernelSample s;
    s.t = -0.1;
    s.K = 1.0;
    acausal.samples.push_back(s);
    CHECK_THROWS_AS(gaussian_bound_fit(acausal, 1.5, DistanceMode::direct), grid_error);
}

TEST_CASE("gaussian fit flags a wrong time exponent through the residual") {
    SpaceTimeKernel kern;
    for (double dt : {0.01, 0.03, 0.1, 0.3, 1.0})
        for (double d : {0.0, 0.3, 0.6}) {
            KernelSample s;
            s.x3 = -d;
            s.t = dt;
            s.K = heat_kernel3(d * d, dt);
            kern.samples.push_back(s);
        }
    GaussianFit good = gaussian_bound_fit(kern, 1.5, DistanceMode::direct);
    GaussianFit bad = gaussian_bound_fit(kern, 0.5, DistanceMode::direct);
    CHECK(good.rms_residual < 1e-10);
    CHECK(bad.rms_residual > 0.5);
}

TEST_CASE("all four leading branches obey Gaussian envelopes") {
    ContourSpec spec;
    double k = 4.0;
    FrozenCoeffs fc{identity3(), identity3(), 1.0, k};
    struct Case {
        int ell;
        Family fam;
        Branch br;
        DistanceMode mode;
    };
    std::vector<Case> cases = {{1, Family::a, Branch::LmLm, DistanceMode::direct},
                               {1, Family::a, Branch::LpLm, DistanceMode::reflected},
                               {2, Family::e, Branch::MpMp, DistanceMode::direct},
                               {2, Family::d, Branch::MpMm, DistanceMode::reflected}};
    for (const auto& c : cases) {
        std::vector<BranchRequest> reqs;
        for (double gap : {0.08, 0.3, 0.6}) {
            double x3 = -0.1 - (family_side(c.fam) > 0 ? 0.0 : gap);
            double y3 = family_side(c.fam) > 0 ? x3 - gap : x3 + gap;
            for (auto g : {GradComponent::none, GradComponent::d_x1, GradComponent::d_x3})
                reqs.push_back({c.ell, c.fam, c.br, x3, y3, g});
        }
        std::vector<KernelTarget> tgts;
        for (double dt : {0.03, 0.1, 0.4})
            for (double ax : {0.0, 0.5, 1.0}) tgts.push_back({ax, 0.0, dt});
        auto vals = leading_kernel_batch(fc, reqs, tgts, spec);

        SpaceTimeKernel kern, grad;
        for (size_t r = 0; r + 2 < reqs.size(); r += 3)
            for (size_t t = 0; t < tgts.size(); ++t) {
                KernelSample s;
                s.x1 = tgts[t].dx1;
                s.x3 = reqs[r].x3;
                s.y3 = reqs[r].y3;
                s.t = tgts[t].dt;
                s.K = vals[t][r];
                kern.samples.push_back(s);
                KernelSample g = s;
                g.K = std::sqrt(std::norm(vals[t][r + 1]) + std::norm(vals[t][r + 2]));
                grad.samples.push_back(g);
            }
        GaussianFit fk = gaussian_bound_fit(kern, 1.5, c.mode);
        CHECK(fk.c2 > 0.0);
        CHECK(fk.max_violation <= 0.0);
        GaussianFit fg = gaussian_bound_fit(grad, 2.0, c.mode);
        CHECK(fg.c2 > 0.0);
        CHECK(fg.max_violation <= 0.0);
    }
}

TEST_CASE("x3-gradient of the free branch matches the differentiated heat kernel") {
    ContourSpec spec;
    FrozenSetup fs = flat_setup(4.0, -0.2, -0.6);
    double rho = fs.x3 - fs.y3, dt = 0.1;
    cplx g3 = leading_kernel(1, Family::a, Branch::LmLm, fs, {0.0, 0.0}, dt, {0, 0}, 0.0,
                             spec, GradComponent::d_x3);
    double ref = -rho / (2.0 * dt) * heat_kernel3(rho * rho, dt);
    CHECK(std::abs(g3 - ref) < 2e-3 * std::abs(ref));
}

TEST_CASE("truncation probe: flat metric is vacuous, layered scaling gap >= 0.4") {
    ContourSpec spec;
    spec.tail_tol = 1e-8;
    CHECK_THROWS_AS(truncation_error_probe(flat_metric(), 4.0, -0.5, {}, spec), grid_error);
    CHECK_THROWS_AS(truncation_error_probe(flat_metric(), 4.0, -0.5, {-0.1}, spec),
                    grid_error);
    CHECK(truncation_error_probe(flat_metric(), 4.0, -0.5, {0.1, 0.2}, spec).vacuous);

    LayeredProfile p;
    p.m33 = [](double x3) { return 1.0 + 0.2 * x3; };
    p.d33 = [](double) { return 0.2; };
    p.m11 = [](double x3) { return 1.0 + 0.1 * x3; };
    p.d11 = [](double) { return 0.1; };
    MetricField f = layered_metric(p);
    TruncationReport rep = truncation_error_probe(f, 4.0, -0.5, {0.005, 0.01, 0.02}, spec);
    CHECK_FALSE(rep.vacuous);
    CHECK(rep.gap() >= 0.4);
    CHECK(rep.slope_levels[1] < -1.9); // one level: residual kernel ~ dt^{-2}
}
