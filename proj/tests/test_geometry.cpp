#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "itpg/geometry.hpp"

using namespace itpg;
using namespace itpg::geometry;

TEST_CASE("contrast validation") {
    CHECK_NOTHROW(Contrast(4.0));
    CHECK_NOTHROW(Contrast(0.5)); // accepted with a warning
    CHECK_THROWS_AS(Contrast(1.0), config_error);
    CHECK_THROWS_AS(Contrast(0.0), config_error);
    CHECK_THROWS_AS(Contrast(-2.0), config_error);
}

TEST_CASE("flat metric is the identity everywhere") {
    MetricField f = flat_metric();
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        Vec2 xt{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        double x3 = rng.uniform(-2, 0);
        Mat3 m = f.M(xt, x3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) CHECK(m[r][c] == (r == c ? 1.0 : 0.0));
        CHECK(f.J_det(xt, x3) == 1.0);
    }
}

TEST_CASE("restrict on the flat metric is trivial and idempotent") {
    MetricField f = flat_metric();
    auto r1 = restrict_metric(f, -0.7, {0.1, 0.2});
    auto r2 = restrict_metric(f, -1.9, {3.0, -2.0});
    CHECK(r1.J_y == 1.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(r1.M1[i][j] == r2.M1[i][j]);
            CHECK(r1.M0[i][j] == (i == j ? 1.0 : 0.0));
        }
}

TEST_CASE("layered profile m33 = 1 + x3^2 restricts as expected") {
    LayeredProfile p;
    p.m33 = [](double x3) { return 1.0 + x3 * x3; };
    p.d33 = [](double x3) { return 2.0 * x3; };
    MetricField f = layered_metric(p);
    auto r = restrict_metric(f, -1.0, {0.0, 0.0});
    CHECK(r.M1[2][2] == doctest::Approx(2.0));
    CHECK(r.M0[2][2] == doctest::Approx(1.0));
}

TEST_CASE("degenerate metric is rejected") {
    LayeredProfile p;
    p.m33 = [](double) { return 0.0; }; // zero determinant
    MetricField f = layered_metric(p);
    CHECK_THROWS_AS(restrict_metric(f, -0.5, {0.0, 0.0}), invalid_metric_error);
}

TEST_CASE("SPD and positive Jacobian at random interior points") {
    LayeredProfile p;
    p.m11 = [](double x3) { return 1.0 + 0.3 * std::sin(x3); };
    p.d11 = [](double x3) { return 0.3 * std::cos(x3); };
    p.m33 = [](double x3) { return 1.2 + 0.2 * x3 * x3; };
    p.d33 = [](double x3) { return 0.4 * x3; };
    p.m13 = [](double x3) { return 0.15 * x3; };
    p.d13 = [](double) { return 0.15; };
    p.jdet = [](double x3) { return 1.0 + 0.1 * std::exp(x3); };
    p.djdet = [](double x3) { return 0.1 * std::exp(x3); };

    std::vector<MetricField> fields = {flat_metric(), layered_metric(p),
                                       MetricField::graph_chart_field(
                                           [](const Vec2& xt) { return 0.2 * xt[1]; },
                                           [](const Vec2& xt) { return 0.2 * xt[0]; })};
    Rng rng(42);
    for (const auto& f : fields) {
        for (int i = 0; i < 1000; ++i) {
            Vec2 xt{rng.uniform(-2, 2), rng.uniform(-2, 2)};
            double x3 = rng.uniform(-2, 0);
            CHECK(min_eigenvalue_sym3(f.M(xt, x3)) > 0.0);
            CHECK(f.J_det(xt, x3) > 0.0);
        }
    }
}

TEST_CASE("half-space point and slab validation") {
    CHECK_NOTHROW(HalfSpacePoint({0.0, 0.0}, -1.0));
    CHECK_THROWS_AS(HalfSpacePoint({0.0, 0.0}, 0.5), config_error);
    CHECK_THROWS_AS(SlabDomain(-1.0, 2.0, 8, 8), config_error);
    CHECK_THROWS_AS(SlabDomain(1.0, 2.0, 1, 8), config_error);
}
