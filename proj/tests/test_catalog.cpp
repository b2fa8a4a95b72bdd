#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "helpers.hpp"
#include "projsuper/algebra.hpp"
#include "projsuper/catalog.hpp"
#include "projsuper/systems.hpp"

using namespace projsuper;
using projsuper::testing::max_abs_at;
using catalog::json;
using catalog::SystemFormatError;

namespace {

Expr P(const std::string& s) { return catalog::P(s); }

double max_bracket(const PhaseFunction& f, const PhaseFunction& g, const std::vector<PhasePoint>& pts,
                   const Bindings& params, const Expr& scale = Expr(1.0)) {
    const Program prog(std::vector<Expr>{poisson(f, g) / scale});
    std::vector<double> scratch, out(1);
    double m = 0.0;
    for (const auto& p : pts) {
        prog.run(p.bindings(params), scratch, out);
        m = std::max(m, std::fabs(out[0]));
    }
    return m;
}

std::vector<CatalogEntry> systems_with_integrals() {
    std::vector<CatalogEntry> out;
    for (const auto& n : catalog::names()) {
        CatalogEntry e = catalog::load(n);
        if (!e.integrals.empty()) out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

TEST(Registry, EveryNameLoads) {
    const auto names = catalog::names();
    EXPECT_GE(names.size(), 19u);
    for (const auto& n : names) {
        const CatalogEntry e = catalog::load(n);
        EXPECT_EQ(e.name, n);
        EXPECT_FALSE(e.summary.empty()) << n;
    }
    EXPECT_THROW(catalog::load("no-such-system"), UnknownSystemError);
    EXPECT_THROW(catalog::frobenius('z'), UnknownSystemError);
}

TEST(Registry, ExpectedTypes) {
    EXPECT_EQ(catalog::load("generator-1").expected_type.value_or(""), "(3,11)");
    EXPECT_EQ(catalog::load("generator-3").expected_type.value_or(""), "(3,11)");
    EXPECT_EQ(catalog::load("generator-1").projective_class, "g1");
    EXPECT_EQ(catalog::load("flat-generic").projective_class, catalog::load("curved-generic").projective_class);
}

TEST(Generators, G1AsListed) {
    const CatalogEntry e = catalog::generator_system(1);
    const Bindings at(1.3, 0.8);
    EXPECT_DOUBLE_EQ(eval(e.metric.g.a12, at), (1.3 + 0.64) / 2);
    EXPECT_DOUBLE_EQ(eval(e.metric.g.a11, at), 0.0);
    EXPECT_EQ(e.parameters.size(), 4u);
    EXPECT_THROW(catalog::generator_system(4), std::out_of_range);
}

TEST(Generators, ListedPotentialsParse) {
    for (int i = 1; i <= 3; ++i) {
        EXPECT_NO_THROW(P(catalog::generator_potential_listing1(i)));
        EXPECT_NO_THROW(P(catalog::generator_potential_listing2(i)));
    }
}

TEST(ProjectiveU, VanishesWithoutParameters) {
    const auto u = catalog::projective_U_general(std::vector<double>{0.0, 0.0, 0.0});
    const auto pts = sample_points(catalog::g1_class_window(), 20, 1);
    EXPECT_EQ(max_abs_at(u.u1, pts), 0.0);
    EXPECT_EQ(max_abs_at(u.u2, pts), 0.0);
}

TEST(ProjectiveU, MatchesG1UpToConstant) {
    const CatalogEntry e = catalog::generator_system(1);
    const auto pts = sample_points(e.domain(), 100, 2, e.bindings());
    const auto fit = fit_proportionality(projective_potential(e.metric, e.V), catalog::projective_U_general(), pts, e.bindings());
    EXPECT_LT(fit.relative_residual, 1e-8);
    EXPECT_NEAR(fit.lambda, 1.0, 1e-10);
}

TEST(Sphere, ExcludedPoints) {
    for (double phi : {0.0, 0.7, 2.0}) EXPECT_THROW(catalog::sphere_system(std::numbers::pi / 2, phi), ExcludedPointError);
    EXPECT_THROW(catalog::sphere_system(-std::numbers::pi / 2, 1.0), ExcludedPointError);
    EXPECT_NO_THROW(catalog::sphere_system(0.0, std::numbers::pi / 4));
    EXPECT_TRUE(catalog::is_homothetic_point(std::numbers::pi / 2, 0.3));
    EXPECT_FALSE(catalog::is_homothetic_point(0.3, 1.0));
}

TEST(Sphere, IntegralsCommuteWithH) {
    const CatalogEntry e = catalog::sphere_system(0.3, 1.0);
    const Bindings params = e.bindings();
    const auto pts = attach_momenta(sample_points(e.domain(), 100, 3, params), 3);
    const PhaseFunction h = e.hamiltonian();
    for (std::size_t i = 0; i < e.integrals.size(); ++i) EXPECT_LT(max_bracket(h, e.integral(i), pts, params), 1e-9) << i;
}

TEST(Sphere, ChartsAgreeUnderPhiReflection) {
    const auto a = catalog::sphere_coefficients(0.4, 0.9, catalog::SphereChart::Swapped);
    const auto b = catalog::sphere_coefficients(0.4, std::numbers::pi / 2 - 0.9, catalog::SphereChart::Standard);
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a.t[static_cast<std::size_t>(k)], b.t[static_cast<std::size_t>(k)]);
}

TEST(DarbouxKoenigs, Type4AsListed) {
    for (bool minus : {false, true}) {
        const CatalogEntry e = catalog::darboux_koenigs(4, minus);
        Bindings at = e.bindings();
        at.set_point(1.5, 0.7);
        EXPECT_DOUBLE_EQ(eval(e.metric.g.a11, at), 1.5);
        EXPECT_DOUBLE_EQ(eval(e.metric.g.a22, at), minus ? -1.5 : 1.5);
        EXPECT_DOUBLE_EQ(eval(e.V, at), 1.0 / 1.5 + 0.5);
    }
}

TEST(DarbouxKoenigs, Type3WithUnitA) {
    CatalogEntry e = catalog::darboux_koenigs(3);
    e.set_parameter("a", 1.0);
    Bindings at = e.bindings();
    at.set_point(0.8, 1.1);
    EXPECT_NEAR(eval(e.metric.g.a11, at), 1.0 / 0.64 + 1.0, 1e-15);
    EXPECT_NEAR(eval(e.V, at), 1.0 / (0.64 + 1.0) + 0.5, 1e-15);
}

TEST(DarbouxKoenigs, BryantFormsShareUUpToScale) {
    const CatalogEntry a = catalog::darboux_koenigs_bryant(1.0), b = catalog::darboux_koenigs_bryant(2.0);
    const auto pts = sample_points(a.domain(), 50, 4);
    std::vector<double> ua, ub;
    for (const auto& p : pts) {
        Bindings at = a.bindings(), bt = b.bindings();
        at.set_point(p.x, p.y);
        bt.set_point(p.x, p.y);
        const auto u = projective_potential(a.metric, a.V), v = projective_potential(b.metric, b.V);
        ua.push_back(eval(u.u1, at));
        ub.push_back(eval(v.u1, bt));
        EXPECT_EQ(eval(u.u2, at), 0.0);
    }
    const auto fit = fit_proportionality(ub, ua);
    EXPECT_LT(fit.relative_residual, 1e-12);
    EXPECT_NEAR(fit.lambda, std::pow(2.0, -2.0 / 3.0), 1e-12);
    EXPECT_THROW(catalog::darboux_koenigs_bryant(0.0), std::invalid_argument);
}

TEST(CurvaturePair, ScalarCurvatureOfTheCurvedEntry) {
    const auto [flat, curved] = catalog::curvature_pair();
    const auto pts = sample_points(curved.domain(), 20, 5);
    EXPECT_LT(max_abs_at(projsuper::testing::scalar_curvature(curved.metric) - 2.0, pts), 1e-9);
    EXPECT_LT(max_abs_at(projsuper::testing::scalar_curvature(flat.metric), pts), 1e-12);
}

TEST(CurvaturePair, DenominatorProducedByTheScalarRule) {
    // det g' = 2/(x^2+y^2+2)^3, so |det g'/det g|^{2/3} = 2^{2/3}/(x^2+y^2+2)^2
    const auto [flat, curved] = catalog::curvature_pair();
    const Sym2 k = flat.integrals.front().K;
    const Sym2 t = transport_killing_contravariant(flat.metric, k, curved.metric);
    const Expr f = std::pow(2.0, 2.0 / 3.0) / pow(P("x^2 + y^2 + 2"), 2.0);
    const auto pts = sample_points(curved.domain(), 20, 6);
    EXPECT_LT(max_abs_at(t.a11 - f * k.a11, pts), 1e-14);
    EXPECT_LT(max_abs_at(t.a12 - f * k.a12, pts), 1e-14);
}

TEST(Property, IntegralsCommuteWithHamiltonian) {
    for (const auto& e : systems_with_integrals()) {
        const Bindings params = e.bindings();
        const auto pts = attach_momenta(sample_points(e.domain(), 100, 7, params), 7);
        const PhaseFunction h = e.hamiltonian();
        const Expr kappa = projsuper::testing::conditioning(e.metric);
        for (std::size_t i = 0; i < e.integrals.size(); ++i)
            EXPECT_LT(max_bracket(h, e.integral(i), pts, params, kappa), 1e-9) << e.name << " " << e.integrals[i].label;
    }
}

TEST(Property, BertrandDarbouxOnEveryEntry) {
    for (const auto& e : systems_with_integrals()) {
        const Bindings params = e.bindings();
        const auto pts = sample_points(e.domain(), 100, 8, params);
        const Expr kappa = projsuper::testing::conditioning(e.metric);
        for (const auto& k : e.integrals)
            EXPECT_LT(max_abs_at(bertrand_darboux_residual_up(e.metric, k.K, e.V) / kappa, pts, params), 1e-10)
                << e.name << " " << k.label;
    }
}

TEST(Property, InverseMatchesMetric) {
    for (const auto& n : catalog::names()) {
        const CatalogEntry e = catalog::load(n);
        const Bindings params = e.bindings();
        const Sym2 inv = e.metric.inverse();
        const auto pts = sample_points(e.domain(), 20, 9, params);
        for (int i = 0; i < 2; ++i)
            for (int j = i; j < 2; ++j)
                EXPECT_LT(max_abs_at((e.inverse(i, j) - inv(i, j)) / (1.0 + abs(inv(i, j))), pts, params), 1e-9) << n;
    }
}

TEST(Property, FullTriplesAreIndependent) {
    for (const auto& e : systems_with_integrals()) {
        if (e.integrals.size() < 2) continue;
        const Bindings params = e.bindings();
        const PhaseFunction h = e.hamiltonian(), i1 = e.integral(0), i2 = e.integral(1);
        for (const auto& p : attach_momenta(sample_points(e.domain(), 5, 10, params), 10))
            EXPECT_EQ(functional_independence(h, i1, i2, p, params), 3) << e.name;
    }
}

TEST(Json, RoundTrip) {
    for (const auto& n : catalog::names()) {
        const CatalogEntry e = catalog::load(n);
        const CatalogEntry back = catalog::from_json(json::parse(catalog::to_json(e).dump()));
        EXPECT_EQ(back.name, e.name);
        EXPECT_EQ(back.integrals.size(), e.integrals.size());
        EXPECT_EQ(back.expected_type, e.expected_type);
        EXPECT_EQ(back.metric.signature, e.metric.signature);
        const Bindings params = e.bindings();
        const auto pts = sample_points(e.domain(), 10, 11, params);
        ASSERT_EQ(sample_points(back.domain(), 10, 11, back.bindings()).size(), pts.size());
        for (int i = 0; i < 2; ++i)
            for (int j = i; j < 2; ++j) {
                EXPECT_LT(max_abs_at((back.metric.g(i, j) - e.metric.g(i, j)) / (1.0 + abs(e.metric.g(i, j))), pts, params), 1e-13) << n;
                for (std::size_t k = 0; k < e.integrals.size(); ++k)
                    EXPECT_LT(max_abs_at(back.integrals[k].K(i, j) - e.integrals[k].K(i, j), pts, params),
                              1e-12 * (1.0 + max_abs_at(e.integrals[k].K(i, j), pts, params)))
                        << n;
            }
        EXPECT_LT(max_abs_at(back.V - e.V, pts, params), 1e-12 * (1.0 + max_abs_at(e.V, pts, params))) << n;
    }
}

TEST(Json, MissingWAndMalformedInput) {
    const json j = json::parse(R"({"name": "t", "metric": {"g11": "1", "g12": "0", "g22": "1"}, "potential": "x*y",
                                    "killing_tensors": [{"K11": "y^2", "K12": "-x*y", "K22": "x^2"}]})");
    const CatalogEntry e = catalog::from_json(j);
    ASSERT_EQ(e.integrals.size(), 1u);
    EXPECT_EQ(to_string(e.integrals[0].W), "__quadrature__");
    EXPECT_THROW(catalog::from_json(json::parse(R"({"name": "t"})")), SystemFormatError);
    EXPECT_THROW(catalog::from_json(json::parse(R"({"metric": {"g11": "1 +", "g12": "0", "g22": "1"}})")), ParseError);
    EXPECT_THROW(catalog::from_json(json::parse(R"({"metric": {"g11": "q", "g12": "0", "g22": "1"}})")), ParseError);
}

TEST(Json, FilesAndResolve) {
    const auto dir = std::filesystem::temp_directory_path() / "projsuper_catalog_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "flat.json").string();
    {
        std::ofstream out(path);
        out << catalog::to_json(catalog::flat_generic()).dump(2);
    }
    EXPECT_EQ(catalog::resolve(path).name, "flat-generic");
    EXPECT_EQ(catalog::resolve("flat-generic").name, "flat-generic");
    EXPECT_THROW(catalog::load_file((dir / "missing.json").string()), UnknownSystemError);
    const auto bad = (dir / "bad.json").string();
    {
        std::ofstream out(bad);
        out << "{ not json";
    }
    EXPECT_THROW(catalog::load_file(bad), SystemFormatError);
    std::filesystem::remove_all(dir);
}
