#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "projsuper/catalog.hpp"
#include "projsuper/metrization.hpp"
#include "projsuper/parse.hpp"

using namespace projsuper;
using projsuper::testing::max_abs_at;

namespace {

Metric2 flat() { return Metric2(Sym2{Expr(1.0), Expr(0.0), Expr(1.0)}, Domain(0.5, 2.0, 0.5, 2.0)); }

double rel_dev(const Num2& a, const Num2& b) {
    return std::sqrt((a.a11 - b.a11) * (a.a11 - b.a11) + 2 * (a.a12 - b.a12) * (a.a12 - b.a12) +
                     (a.a22 - b.a22) * (a.a22 - b.a22)) /
           b.norm();
}

std::vector<WeightedTensor> generators() {
    return {catalog::generator_beta(1), catalog::generator_beta(2), catalog::generator_beta(3)};
}

double max_residual(const WeightedTensor& b, const ProjectiveConnection& f, const std::vector<Point2>& pts,
                    const Bindings& params = {}) {
    double m = 0.0;
    for (const auto& r : metrizability_residuals(b, f)) m = std::max(m, max_abs_at(r, pts, params));
    return m;
}

}  // namespace

TEST(Beta, FlatIsIdentity) {
    const auto b = beta_of_metric(flat());
    const Num2 v = eval(b.b, Bindings(0.7, 1.2));
    EXPECT_DOUBLE_EQ(v.a11, 1.0);
    EXPECT_DOUBLE_EQ(v.a12, 0.0);
    EXPECT_DOUBLE_EQ(v.a22, 1.0);
    EXPECT_EQ(b.weight, kBetaWeight);
}

TEST(Beta, G1) {
    const auto b = beta_of_metric(catalog::generator_metric(1));
    for (auto [x, y] : {std::pair{1.0, 1.0}, {2.5, 0.6}, {0.7, 1.9}}) {
        const Num2 v = eval(b.b, Bindings(x, y));
        EXPECT_NEAR(v.a11, 0.0, 1e-15);
        EXPECT_NEAR(v.a22, 0.0, 1e-15);
        EXPECT_NEAR(v.a12, std::cbrt(2.0) * std::pow(x + y * y, -1.0 / 3.0), 1e-14);
    }
}

TEST(Beta, Homogeneity) {
    const Metric2 g = catalog::generator_metric(2);
    const auto pts = sample_points(g.domain, 30, 2);
    for (double lam : {2.0, 5.0}) {
        const auto b = beta_of_metric(g), bl = beta_of_metric(g.scaled(Expr(lam)));
        for (const auto& p : pts) {
            const Bindings at(p.x, p.y);
            const Num2 u = eval(bl.b, at), v = eval(b.b, at);
            const double s = std::pow(lam, -1.0 / 3.0);
            EXPECT_LT(rel_dev(u, Num2{s * v.a11, s * v.a12, s * v.a22}), 1e-13);
        }
    }
}

TEST(Sigma, FlatAndScaling) {
    const Num2 v = eval(sigma_of_metric(flat()).b, Bindings(1.0, 1.0));
    EXPECT_DOUBLE_EQ(v.a11, 1.0);
    EXPECT_DOUBLE_EQ(v.a22, 1.0);
    EXPECT_EQ(sigma_of_metric(flat()).weight, kSigmaWeight);
    const Metric2 g = catalog::generator_metric(2);
    const Bindings at(1.2, 0.9);
    const Num2 a = eval(sigma_of_metric(g.scaled(Expr(2.0))).b, at), b = eval(sigma_of_metric(g).b, at);
    const double s = std::pow(2.0, -1.0 / 3.0);
    EXPECT_LT(rel_dev(a, Num2{s * b.a11, s * b.a12, s * b.a22}), 1e-13);
}

TEST(Sigma, MatrixDualOfBeta) {
    const Metric2 g = catalog::generator_metric(1);
    const auto s = sigma_of_metric(g), b = beta_of_metric(g);
    for (const auto& p : sample_points(g.domain, 50, 6)) {
        const Bindings at(p.x, p.y);
        const Num2 sv = eval(s.b, at), ad = eval(b.b.adj(), at);
        const double sign = eval(g.det(), at) > 0 ? 1.0 : -1.0;
        EXPECT_NEAR(sv.a11, sign * ad.a11, 1e-12);
        EXPECT_NEAR(sv.a12, sign * ad.a12, 1e-12);
        EXPECT_NEAR(sv.a22, sign * ad.a22, 1e-12);
    }
}

TEST(MetricOfBeta, IdentityGivesFlat) {
    const WeightedTensor id{Sym2{Expr(1.0), Expr(0.0), Expr(1.0)}, kBetaWeight};
    const Num2 g = eval(metric_of_beta(id).g, Bindings(0.3, -2.0));
    EXPECT_DOUBLE_EQ(g.a11, 1.0);
    EXPECT_DOUBLE_EQ(g.a12, 0.0);
    EXPECT_DOUBLE_EQ(g.a22, 1.0);
}

TEST(MetricOfBeta, RoundTripG3) {
    const Metric2 g = catalog::generator_metric(3);
    const Metric2 back = metric_of_beta(beta_of_metric(g));
    double worst = 0.0;
    for (const auto& p : sample_points(g.domain, 50, 12)) {
        const Bindings at(p.x, p.y);
        worst = std::max(worst, rel_dev(eval(back.g, at), eval(g.g, at)));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(MetricOfBeta, RoundTripCatalog) {
    for (const auto& name : catalog::names()) {
        const CatalogEntry e = catalog::load(name);
        const Bindings params = e.bindings();
        const Metric2 back = metric_of_beta(beta_of_metric(e.metric));
        for (const auto& p : sample_points(e.metric.domain, 40, 13, params)) {
            Bindings at = params;
            at.set_point(p.x, p.y);
            EXPECT_LT(rel_dev(eval(back.g, at), eval(e.metric.g, at)), 1e-12) << name;
        }
    }
}

TEST(MetricOfBeta, GeneratorSumIsAMetricOffItsDeterminantLocus) {
    const auto b = pencil({catalog::generator_beta(1), catalog::generator_beta(2)}, {1.0, 1.0});
    const Metric2 g = metric_of_beta(b, catalog::g1_class_window());
    const auto pts = sample_points(g.domain, 60, 4);
    ASSERT_EQ(pts.size(), 60u);
    for (const auto& p : pts) EXPECT_NE(eval(g.det(), Bindings(p.x, p.y)), 0.0);
    EXPECT_LT(max_residual(b, projective_connection(catalog::generator_metric(1)), pts), 1e-10);
}

TEST(MetricOfBeta, Errors) {
    const WeightedTensor zero{Sym2{Expr(0.0), Expr(0.0), Expr(0.0)}, kBetaWeight};
    EXPECT_THROW(metric_of_beta(zero), NonMetrizablePointError);
    const WeightedTensor sig{Sym2{Expr(1.0), Expr(0.0), Expr(1.0)}, kSigmaWeight};
    EXPECT_THROW(metric_of_beta(sig), WeightMismatchError);
    const WeightedTensor rank1{Sym2{vars::x(), Expr(0.0), Expr(0.0)}, kBetaWeight};
    EXPECT_THROW(metric_of_beta_at(rank1, Bindings(1.0, 1.0)), NonMetrizablePointError);
}

TEST(Residuals, GeneratorsAgainstG1) {
    const auto f = projective_connection(catalog::generator_metric(1));
    const auto pts = sample_points(catalog::g1_class_window(), 100, 21);
    for (const auto& b : generators()) EXPECT_LT(max_residual(b, f, pts), 1e-10);
}

TEST(Residuals, BetaOfG2AgainstG1) {
    const auto f = projective_connection(catalog::generator_metric(1));
    const auto pts = sample_points(catalog::g1_class_window(), 100, 22);
    EXPECT_LT(max_residual(beta_of_metric(catalog::generator_metric(2)), f, pts), 1e-10);
}

TEST(Residuals, EveryCatalogMetricAgainstItsOwnConnection) {
    for (const auto& name : catalog::names()) {
        const CatalogEntry e = catalog::load(name);
        const Bindings params = e.bindings();
        const auto pts = sample_points(e.metric.domain, 100, 23, params);
        const Expr kappa = projsuper::testing::conditioning(e.metric);
        double m = 0.0;
        for (const auto& r : metrizability_residuals(beta_of_metric(e.metric), projective_connection(e.metric)))
            m = std::max(m, max_abs_at(r / kappa, pts, params));
        EXPECT_LT(m, 1e-10) << name;
    }
}

TEST(Residuals, ConformalMetricFailsFlatSystem) {
    const Expr w = parse("exp(2*x)");
    const Metric2 g(Sym2{w, Expr(0.0), w});
    const auto r = metrizability_residuals(beta_of_metric(g), projective_connection(flat()));
    double m = 0.0;
    for (const auto& e : r) m = std::max(m, std::fabs(eval(e, Bindings(0.0, 0.0))));
    EXPECT_GT(m, 0.1);
}

TEST(Residuals, WeightMismatch) {
    const auto s = sigma_of_metric(flat());
    EXPECT_THROW(metrizability_residuals(s, projective_connection(flat())), WeightMismatchError);
}

TEST(Pencil, SingleBasisIsIdentity) {
    const auto b = catalog::generator_beta(3);
    const auto p = pencil({b}, {1.0});
    for (const auto& q : sample_points(catalog::g1_class_window(), 10, 1)) {
        const Bindings at(q.x, q.y);
        EXPECT_LT(rel_dev(eval(p.b, at), eval(b.b, at)), 1e-15);
    }
}

TEST(Pencil, SphereCoefficientsGiveTheSphereFamily) {
    const double theta = 0.3, phi = 1.0;
    const auto b = pencil(generators(), {std::cos(theta) * std::sin(phi), std::cos(theta) * std::cos(phi), std::sin(theta)});
    const CatalogEntry e = catalog::sphere_system(theta, phi, catalog::SphereChart::Swapped);
    const Bindings params = e.bindings();
    for (const auto& q : sample_points(e.metric.domain, 20, 2, params)) {
        Bindings at = params;
        at.set_point(q.x, q.y);
        EXPECT_LT(rel_dev(eval(b.b, at), eval(e.beta->b, at)), 1e-13);
    }
}

TEST(Pencil, AnyPencilOfGeneratorsIsMetrizableForG1) {
    const auto f = projective_connection(catalog::generator_metric(1));
    const auto pts = sample_points(catalog::g1_class_window(), 100, 31);
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const std::vector<double> t{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        EXPECT_LT(max_residual(pencil(generators(), t), f, pts), 1e-10);
    }
}

TEST(Pencil, WeightMismatch) {
    EXPECT_THROW(pencil({beta_of_metric(flat()), sigma_of_metric(flat())}, {1.0, 1.0}), WeightMismatchError);
    EXPECT_THROW(pencil({beta_of_metric(flat())}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Property, ResidualsAreLinear) {
    // a connection outside the class, so the individual residuals are nonzero
    const Expr w = parse("exp(x*y)");
    const auto f = projective_connection(Metric2(Sym2{w, Expr(0.0), w}));
    const std::vector<double> t{0.7, -1.3, 0.4};
    const auto gens = generators();
    const auto rp = metrizability_residuals(pencil(gens, t), f);
    std::array<std::array<Expr, 4>, 3> ri;
    for (int i = 0; i < 3; ++i) ri[static_cast<std::size_t>(i)] = metrizability_residuals(gens[static_cast<std::size_t>(i)], f);
    for (const auto& p : sample_points(catalog::g1_class_window(), 50, 41)) {
        const Bindings at(p.x, p.y);
        for (std::size_t k = 0; k < 4; ++k) {
            double sum = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                const double v = t[i] * eval(ri[i][k], at);
                sum += v;
                scale = std::max(scale, std::fabs(v));
            }
            EXPECT_NEAR(eval(rp[k], at), sum, 1e-12 * std::max(1.0, scale));
        }
    }
}

TEST(Property, DegreeOfMobilityWitness) {
    const auto pts = sample_points(catalog::g1_class_window(), 10, 40);
    Eigen::MatrixXd m(3, 30);
    const auto gens = generators();
    for (int i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const Num2 v = eval(gens[static_cast<std::size_t>(i)].b, Bindings(pts[k].x, pts[k].y));
            m(i, static_cast<int>(3 * k)) = v.a11;
            m(i, static_cast<int>(3 * k + 1)) = v.a12;
            m(i, static_cast<int>(3 * k + 2)) = v.a22;
        }
    const Eigen::MatrixXd gram = m * m.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
    const auto s = svd.singularValues();
    EXPECT_GT(s(2) / s(0), 1e-6);
}

TEST(AdmissibleGrid, FindsRegionAndSamplesInsideIt) {
    const auto b = pencil({catalog::generator_beta(1), catalog::generator_beta(2)}, {1.0, 1.0});
    const AdmissibleGrid grid(b, catalog::g1_class_window(), 40, 40);
    EXPECT_GT(grid.admissible_fraction(), 0.1);
    for (const auto& p : grid.sample(50, 3)) {
        EXPECT_TRUE(grid.contains(p.x, p.y));
        EXPECT_NE(eval(b.det(), Bindings(p.x, p.y)), 0.0);
    }
    const WeightedTensor zero{Sym2{Expr(0.0), Expr(0.0), Expr(0.0)}, kBetaWeight};
    const AdmissibleGrid none(zero, catalog::g1_class_window(), 10, 10);
    EXPECT_EQ(none.admissible_cells(), 0u);
    EXPECT_THROW(none.sample(1, 1), EmptyDomainError);
}
