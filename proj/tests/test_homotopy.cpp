#include <gtest/gtest.h>

#include <numbers>

#include "psc/homotopy.hpp"
#include "test_support.hpp"

namespace psc {
namespace {

MetricField round_sphere(int m, double r) { return stereographic_sphere_metric(m, r, Box::cube(m, -1.0, 1.0)); }

MetricField scaled(const MetricField& g, double c) {
    return MetricField{g.dim, g.domain, [g, c](const Vector& x) { return (c * g(x)).eval(); }};
}

// g^t = (1 + c t) g0 on the round S^m(1).
MetricHomotopy conformal_family(int m, double c) { return linear_homotopy(round_sphere(m, 1.0), scaled(round_sphere(m, 1.0), 1.0 + c)); }

double grid_min_stretched(const MetricHomotopy& h, double a, const HomotopyGrid& grid) {
    return verify_positive_scalar(h, a, grid).measured;
}

TEST(LinearHomotopy, Endpoints) {
    const MetricField a = round_sphere(2, 1.0);
    const MetricField b = scaled(round_sphere(2, 1.0), 3.0);
    const MetricHomotopy h = linear_homotopy(a, b);
    const Vector x = (Vector(2) << 0.3, -0.2).finished();
    EXPECT_EQ(h(x, 0.0), a(x));
    EXPECT_EQ(h(x, 1.0), b(x));
}

TEST(LinearHomotopy, StaysPositiveDefinite) {
    const ModelManifold m = perturbed_tube_model(4, 1, 0.2, 0.1);
    const MetricHomotopy h = h1_homotopy(m, 0.1);
    test::Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        EXPECT_GT(min_eigenvalue(h(rng.point(end_sample_box(m)), rng.uniform(0.0, 1.0))), 0.0);
    }
}

TEST(LinearHomotopy, ConstantHasZeroVelocity) {
    const MetricHomotopy h = constant_homotopy(round_sphere(3, 0.5));
    const Vector x = Vector::Constant(3, 0.1);
    EXPECT_EQ(h.dt_field(x, 0.4).norm(), 0.0);
    EXPECT_EQ(b_term(h, x, 0.4), 0.0);
}

TEST(LinearHomotopy, DimensionMismatch) {
    EXPECT_THROW(linear_homotopy(round_sphere(2, 1.0), round_sphere(3, 1.0)), Error);
    const MetricField wide = stereographic_sphere_metric(2, 1.0, Box::cube(2, -2.0, 2.0));
    EXPECT_THROW(linear_homotopy(round_sphere(2, 1.0), wide), Error);
}

TEST(BTerm, ConformalClosedForm) {
    for (int m : {2, 3, 4, 5}) {
        const double c = 2.0;
        const MetricHomotopy h = conformal_family(m, c);
        for (double t : {0.0, 0.3, 1.0}) {
            const double want = c * c * m * (3.0 - m) / (4.0 * std::pow(1.0 + c * t, 2));
            EXPECT_NEAR(b_term(h, Vector::Constant(m, 0.2), t), want, 1e-12) << "m = " << m << ", t = " << t;
        }
    }
}

TEST(BTerm, ChartInvariance) {
    // g^t = flat + t df^2 with f = |x|^2, written in Cartesian and in polar coordinates.
    const MetricField cart0 = flat_metric(2, Box::cube(2, -1.0, 1.0));
    const MetricField cart1{2, cart0.domain, [](const Vector& x) { return (Matrix::Identity(2, 2) + 4.0 * x * x.transpose()).eval(); }};
    const Box polar_box((Vector(2) << 0.1, 0.0).finished(), (Vector(2) << 1.0, 2 * std::numbers::pi).finished());
    const MetricField pol0{2, polar_box, [](const Vector& p) {
                               Matrix g = Matrix::Identity(2, 2);
                               g(1, 1) = p[0] * p[0];
                               return g;
                           }};
    const MetricField pol1{2, polar_box, [](const Vector& p) {
                               Matrix g = Matrix::Identity(2, 2);
                               g(0, 0) += 4.0 * p[0] * p[0];
                               g(1, 1) = p[0] * p[0];
                               return g;
                           }};
    const MetricHomotopy hc = linear_homotopy(cart0, cart1);
    const MetricHomotopy hp = linear_homotopy(pol0, pol1);
    test::Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const double r = rng.uniform(0.2, 0.7);
        const double phi = rng.uniform(0.0, 6.0);
        const double t = rng.uniform(0.0, 1.0);
        const Vector xc = (Vector(2) << r * std::cos(phi), r * std::sin(phi)).finished();
        const Vector xp = (Vector(2) << r, phi).finished();
        EXPECT_NEAR(b_term(hc, xc, t), b_term(hp, xp, t), 1e-8);
    }
}

TEST(BTerm, AffineReparametrizationScalesByBetaSquared) {
    const MetricHomotopy h = h2_homotopy(perturbed_tube_model(4, 1, 0.2, 0.1), 0.05,
                                         scaled(flat_metric(1, Box::cube(1, 0.0, 2 * std::numbers::pi)), 2.0), 0.025);
    const double alpha = 0.2;
    const double beta = 0.6;
    const MetricHomotopy r = affine_reparametrization(h, alpha, beta);
    test::Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const Vector x = rng.point(end_sample_box(perturbed_tube_model(4, 1, 0.2, 0.1)));
        const double t = rng.uniform(0.0, 1.0);
        EXPECT_NEAR(b_term(r, x, t), beta * beta * b_term(h, x, alpha + beta * t), 1e-8);
    }
}

TEST(BTerm, LinearFamilyDependsOnlyOnEndpoints) {
    const MetricHomotopy h = conformal_family(3, 1.5);
    const Vector x = Vector::Constant(3, 0.1);
    const MetricHomotopy again = linear_homotopy(h.at(0.0), h.at(1.0));
    EXPECT_EQ(b_term(h, x, 0.7), b_term(again, x, 0.7));
}

TEST(HomotopyStats, ConstantRoundSphere) {
    const MetricHomotopy h = constant_homotopy(round_sphere(2, 1.0));
    const HomotopyStats st = homotopy_stats(h, make_grid(Box::cube(2, -0.8, 0.8), 64, 5));
    EXPECT_NEAR(st.s_min, 2.0, 1e-3);
    EXPECT_EQ(st.B_max, 0.0);
    EXPECT_EQ(st.a_star, 0.0);
    EXPECT_EQ(default_stretch(st), 1.0);
    EXPECT_EQ(st.samples, 64u * 5u);
}

TEST(HomotopyStats, PerturbedH1Regression) {
    const ModelManifold m = perturbed_tube_model(4, 1, 0.2, 0.1);
    const double delta = 0.05;
    const HomotopyStats st = homotopy_stats(h1_homotopy(m, delta), make_grid(end_sample_box(m), 512, 9));
    EXPECT_GT(st.s_min * delta * delta, 1.9);
    EXPECT_NEAR(st.s_min * delta * delta, 1.99974, 1e-3);
}

TEST(HomotopyStats, FlatFamilyIsAnError) {
    const MetricHomotopy h = constant_homotopy(flat_metric(3, Box::cube(3, -1.0, 1.0)));
    try {
        homotopy_stats(h, make_grid(Box::cube(3, -0.5, 0.5), 27, 3));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
    }
}

TEST(StretchedMetric, ConstantFamilyIsProduct) {
    const MetricHomotopy h = constant_homotopy(round_sphere(2, 0.5));
    const StretchedMetric g = stretched_metric(h, 3.0);
    EXPECT_NEAR(scalar_curvature(g.field, (Vector(3) << 0.1, 0.2, 1.5).finished()), 8.0, 1e-3);
    EXPECT_DOUBLE_EQ(g.field.domain.upper[2], 3.0);
}

TEST(StretchedMetric, UnitStretchIsUnstretchedProduct) {
    const MetricHomotopy h = conformal_family(3, 1.0);
    const StretchedMetric g = stretched_metric(h, 1.0);
    const MetricField pulled = pulled_back_metric(h, 1.0);
    const Vector p = (Vector(4) << 0.1, -0.2, 0.3, 0.4).finished();
    EXPECT_EQ(g.field(p), pulled(p));
    EXPECT_EQ(g.field(p).topLeftCorner(3, 3), h(p.head(3), 0.4));
}

TEST(StretchedMetric, NonPositiveStretch) {
    const MetricHomotopy h = conformal_family(3, 1.0);
    EXPECT_THROW(stretched_metric(h, 0.0), Error);
    EXPECT_THROW(pulled_back_metric(h, -1.0), Error);
    EXPECT_THROW(homotopy_volume_bound(h, 0.0, {0.0, 1.0}, {4, 4, 4}), Error);
}

TEST(StretchedMetric, FormulaMatchesDirectOracleOnPerturbedH1) {
    const ModelManifold m = perturbed_tube_model(4, 1, 0.2, 0.1);
    const MetricHomotopy h = h1_homotopy(m, 0.1);
    test::Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const Vector x = rng.point(end_sample_box(m));
        const double t = rng.uniform(0.05, 0.95);
        const double a = rng.uniform(0.2, 3.0);
        Vector p(x.size() + 1);
        p << x, t;
        const double direct = scalar_curvature(pulled_back_metric(h, a), p);
        const double formula = stretched_scalar_formula(h, x, t, a);
        EXPECT_LE(std::abs(direct - formula), 1e-3 * (1.0 + std::abs(direct)));
    }
}

TEST(VerifyPositive, ConstantFamilyPassesWithMarginSMin) {
    const MetricHomotopy h = constant_homotopy(round_sphere(3, 1.0));
    const HomotopyGrid grid = make_grid(Box::cube(3, -0.8, 0.8), 125, 3);
    for (double a : {0.1, 1.0, 10.0}) {
        const CertificateReport rep = verify_positive_scalar(h, a, grid);
        EXPECT_TRUE(rep.passed);
        EXPECT_NEAR(rep.margin, 6.0, 1e-3);
    }
}

TEST(VerifyPositive, H2WithDoubledFlatFactor) {
    const ModelManifold m = flat_torus_model(4, 1, 0.2);
    const double delta = 0.05;
    const MetricHomotopy h = h2_homotopy(m, delta, scaled(m.w_metric, 2.0), delta / 2);
    const HomotopyGrid grid = make_grid(end_sample_box(m), 1000, 9);
    const HomotopyStats st = homotopy_stats(h, grid);
    EXPECT_TRUE(verify_positive_scalar(h, default_stretch(st), grid).passed);
}

TEST(VerifyPositive, UnderstretchedControlFails) {
    // Conformal growth on S^4 has B = -c^2 / (1 + c t)^2, far below -s at t = 0.
    const MetricHomotopy h = conformal_family(4, 10.0);
    const HomotopyGrid grid = make_grid(Box::cube(4, -0.5, 0.5), 81, 9);
    const HomotopyStats st = homotopy_stats(h, grid);
    ASSERT_GT(st.a_star, 1.0);
    EXPECT_TRUE(verify_positive_scalar(h, 1.1 * st.a_star, grid).passed);
    const CertificateReport rep = verify_positive_scalar(h, 0.1 * st.a_star, grid);
    EXPECT_FALSE(rep.passed);
    EXPECT_EQ(rep.witness.at("t"), 0.0);
}

TEST(VerifyPositive, MaxRuleUndershootsOnShrinkingFamily) {
    const MetricHomotopy h = conformal_family(4, 10.0);
    const HomotopyGrid grid = make_grid(Box::cube(4, -0.5, 0.5), 81, 9);
    const HomotopyStats st = homotopy_stats(h, grid);
    EXPECT_LE(st.B_max, 0.0);
    EXPECT_EQ(st.a_star_max_rule, 0.0);
    EXPECT_LT(grid_min_stretched(h, 1.0, grid), 0.0);
}

TEST(ProductVolume, ConstantFamilyEquality) {
    const MetricHomotopy h = constant_homotopy(round_sphere(2, 1.0));
    const ProductVolume v = homotopy_volume_bound(h, 2.5, {0.0, 0.5, 1.0}, {16, 16}, 4);
    EXPECT_NEAR(v.quadrature, v.bound, 1e-3);
    EXPECT_NEAR(v.bound, 2.5 * v.sup_volume, 1e-12);
    EXPECT_TRUE(v.passed);
}

TEST(ProductVolume, LinearFamilyUsesLargerEnd) {
    const MetricHomotopy h = conformal_family(2, 1.0);
    const ProductVolume v = homotopy_volume_bound(h, 1.0, {0.0, 0.25, 0.5, 0.75, 1.0}, {16, 16}, 8);
    const double v0 = volume(h.at(0.0), h.domain, {16, 16}).value;
    const double v1 = volume(h.at(1.0), h.domain, {16, 16}).value;
    EXPECT_LT(v0, v1);
    EXPECT_EQ(v.sup_t, 1.0);
    EXPECT_NEAR(v.sup_volume, v1, 1e-12);
    EXPECT_TRUE(v.passed);
}

TEST(ProductVolume, H1BoundShrinksWithDelta) {
    const ModelManifold m = perturbed_tube_model(4, 1, 0.2, 0.1);
    double prev = std::numeric_limits<double>::infinity();
    for (double delta : {0.1, 0.05, 0.025}) {
        const MetricHomotopy h = h1_homotopy(m, delta, AngularChart::Hyperspherical);
        const ProductVolume v = homotopy_volume_bound(h, 1.0, {0.0, 0.5, 1.0}, {8, 8, 8}, 4);
        EXPECT_TRUE(v.passed);
        EXPECT_LT(v.bound, prev);
        prev = v.bound;
    }
}

TEST(EndHomotopies, H2ConnectsTheEnds) {
    const ModelManifold m = perturbed_tube_model(4, 1, 0.2, 0.1);
    const MetricField h_w = scaled(m.w_metric, 2.0);
    const MetricHomotopy h1 = h1_homotopy(m, 0.05);
    const MetricHomotopy h2 = h2_homotopy(m, 0.05, h_w, 0.01);
    const MetricField target = target_end_metric(h_w, 2, 0.01, AngularChart::StereoNorth);
    test::Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const Vector x = rng.point(end_sample_box(m));
        EXPECT_EQ(h1(x, 1.0), h2(x, 0.0));
        EXPECT_LT((h2(x, 1.0) - target(x)).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_THROW(h2_homotopy(m, 0.05, round_sphere(2, 1.0), 0.01), Error);
    EXPECT_THROW(h2_homotopy(m, 0.05, h_w, 0.0), Error);
}

}  // namespace
}  // namespace psc
