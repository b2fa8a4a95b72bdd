#pragma once

// Built-in systems: the three generators of the projective class of
// g1 = (x+y^2) dxdy, the two-sphere family they span, Darboux-Koenigs
// metrics, the flat/curved constant-curvature pair, and a few test metrics.
//
// Quadratic forms written "A dx^2 + B dxdy + C dy^2" store g12 = B/2.

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"
#include "projsuper/metrization.hpp"
#include "projsuper/parse.hpp"
#include "projsuper/phase.hpp"
#include "projsuper/systems.hpp"

namespace projsuper {

struct KnownIntegral {
    std::string label;
    Sym2 K;  // contravariant
    Expr W;
};

struct CatalogEntry {
    std::string name;
    std::string summary;
    Metric2 metric;  // domain is the working window
    Sym2 inverse;
    Expr V;
    std::vector<std::pair<std::string, double>> parameters;
    std::vector<KnownIntegral> integrals;
    std::optional<WeightedTensor> beta;
    std::optional<std::string> expected_type;
    std::string projective_class;
    std::vector<std::pair<std::string, std::string>> printed;
    Point2 basepoint{1.0, 1.0};

    Bindings bindings() const {
        Bindings b;
        for (const auto& [n, v] : parameters) b.set(n, v);
        return b;
    }
    const Domain& domain() const { return metric.domain; }
    PhaseFunction hamiltonian() const { return PhaseFunction::from(inverse, V); }
    // An integral stored without W carries dW = g K dV and is integrated numerically.
    PhaseFunction integral(std::size_t i) const {
        const KnownIntegral& k = integrals.at(i);
        if (scalar_part_unknown(i)) return PhaseFunction{k.K, killing_potential_oneform(metric, k.K, V), std::nullopt};
        return PhaseFunction::from(k.K, k.W);
    }
    bool scalar_part_unknown(std::size_t i) const {
        const Expr& w = integrals.at(i).W;
        return w.kind() == Kind::Param && w.name() == "__quadrature__";
    }
    void set_parameter(const std::string& n, double v) {
        for (auto& [name, val] : parameters)
            if (name == n) {
                val = v;
                return;
            }
        parameters.emplace_back(n, v);
    }
    std::optional<std::string> printed_form(const std::string& key) const {
        for (const auto& [k, v] : printed)
            if (k == key) return v;
        return std::nullopt;
    }
};

class UnknownSystemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ExcludedPointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace catalog {

inline Expr P(const std::string& text) {
    ParseOptions o;
    o.any_parameter = true;
    return parse(text, o);
}

inline const std::vector<std::pair<std::string, double>>& generic_c() {
    static const std::vector<std::pair<std::string, double>> c{{"c1", 1.0}, {"c2", 0.5}, {"c3", 1.0 / 3.0}, {"c4", 0.0}};
    return c;
}

inline Domain g1_class_window() {
    Domain d(0.5, 3.0, 0.5, 2.0);
    d.positive(P("x + y^2"));
    return d;
}

// ---------------------------------------------------------------------------
// Generators

inline Metric2 generator_metric(int i) {
    Domain d = g1_class_window();
    switch (i) {
        case 1: return Metric2::from_form(Expr(0.0), P("x + y^2"), Expr(0.0), d, Signature::Lorentzian);
        case 2:
            return Metric2::from_form(Expr(0.0), P("-2*(x + y^2)/y^3"), P("(x + y^2)^2/y^4"), d, Signature::Lorentzian);
        case 3: {
            d.nonzero(P("3*x - y^2"), 0.5);
            const Expr pre = P("(y^2 + x)/(3*x - y^2)^6");
            return Metric2::from_form(pre * P("9*(y^2 + x)"), pre * P("-4*y*(9*x + y^2)"), pre * P("12*x*(y^2 + x)"), d,
                                      Signature::Unspecified);
        }
        default: throw std::out_of_range("generator index must be 1, 2 or 3");
    }
}

// Closed forms of beta_i = |det g_i|^{-2/3} g_i on x + y^2 > 0.
inline WeightedTensor generator_beta(int i) {
    const Expr k = pow(P("x + y^2"), -1.0 / 3.0);
    switch (i) {
        case 1: return {Sym2{Expr(0.0), std::cbrt(2.0) * k, Expr(0.0)}, kBetaWeight};
        case 2: return {Sym2{Expr(0.0), -k * vars::y(), k * P("x + y^2")}, kBetaWeight};
        case 3: {
            const Expr s = std::pow(2.0, -4.0 / 3.0) * k;
            return {Sym2{s * P("9*(x + y^2)"), s * P("-2*y*(9*x + y^2)"), s * P("12*x*(x + y^2)")}, kBetaWeight};
        }
        default: throw std::out_of_range("generator index must be 1, 2 or 3");
    }
}

// Potentials with d V^(i) = beta_i U(c) exactly, U(c) the shared projective potential.
inline Expr generator_potential(int i) {
    switch (i) {
        case 1: return std::cbrt(2.0) * P("(c1 + c2*y - c3*y*(3*x + y^2))/(x + y^2)") + P("c4");
        case 2: return P("y*(-2*c1 - 2*c2*y + 3*c3*x*y - c3*y^3)/(2*(x + y^2)) + c4");
        case 3:
            return -std::pow(2.0, 2.0 / 3.0) *
                       P("(3*x - y^2)*(8*c1*y - 6*c2*x + 2*c2*y^2 + 9*c3*x^2 - 6*c3*x*y^2 + c3*y^4)/(8*(x + y^2))") +
                   P("c4");
        default: throw std::out_of_range("generator index must be 1, 2 or 3");
    }
}

// The potential families as first listed, each with its own parameter names.
inline std::string generator_potential_listing1(int i) {
    switch (i) {
        case 1: return "c1/(x + y^2) + c2*y/(x + y^2) + c3*y*(y^2 - 3*x)/(x + y^2) + c4";
        case 2: return "y/(x + y^2)*a1 + y^2/(x + y^2)*a2 - y^2*(y^2 - 3*x)/(x + y^2)*a3 + a4";
        case 3: return "y*(3*x - y^2)/(x + y^2)*b1 + (3*x - y^2)^2/(x + y^2)*b2 + (3*x - y^2)^3/(x + y^2)*b3 + b4";
        default: throw std::out_of_range("generator index must be 1, 2 or 3");
    }
}

// The potentials as listed together with U(c), sharing c1..c4.
inline std::string generator_potential_listing2(int i) {
    switch (i) {
        case 1: return "-(y^2 + 3*x)*y*c3/(y^2 + x) + y*c2/(y^2 + x) + c1/(y^2 + x) + c4";
        case 2:
            return "-2^(2/3)/4*((y^2 - 3*x)*y^2*c3/(y^2 + x) + 2*y^2*c2/(y^2 + x) + 2*y*c1/(y^2 + x) + c4)";
        case 3:
            return "2^(1/3)/8*((y^2 - 3*x)^3*c3/(y^2 + x) + 2*(y^2 - 3*x)^2*c2/(y^2 + x) + 8*(y^2 - 3*x)*y*c1/(y^2 + x) - "
                   "8*c1 + c4)";
        default: throw std::out_of_range("generator index must be 1, 2 or 3");
    }
}

inline ProjectivePotential projective_U_general(const Expr& c1, const Expr& c2, const Expr& c3) {
    const Expr x = vars::x(), y = vars::y();
    const Expr den = pow(y * y + x, 5.0 / 3.0);
    return {-(c3 * (pow(y, 4.0) + 3.0 * x * x) + c2 * (y * y - x) + 2.0 * c1 * y) / den,
            -(2.0 * c3 * pow(y, 3.0) + c2 * y + c1) / den};
}

inline ProjectivePotential projective_U_general() { return projective_U_general(P("c1"), P("c2"), P("c3")); }

inline ProjectivePotential projective_U_general(const std::vector<double>& c) {
    return projective_U_general(Expr(c.at(0)), Expr(c.at(1)), Expr(c.at(2)));
}

// H, I1, I2 for beta = sum t_k beta_k with integrals from bbar = sum s_k beta_k
// and bhat = sum u_k beta_k. All parts are closed form:
//   g^{-1} = det(beta) adj(beta),  K = adj(beta) b adj(beta),  W = sum s_k V^(k).
struct PencilTriple {
    WeightedTensor beta;
    Sym2 inverse;
    Expr V;
    std::vector<KnownIntegral> integrals;
};

inline PencilTriple pencil_triple(const std::array<Expr, 3>& t, const std::array<Expr, 3>& s,
                                  const std::array<Expr, 3>& u) {
    std::array<WeightedTensor, 3> b{generator_beta(1), generator_beta(2), generator_beta(3)};
    std::array<Expr, 3> v{generator_potential(1), generator_potential(2), generator_potential(3)};
    auto combine_b = [&](const std::array<Expr, 3>& w) {
        Sym2 acc{Expr(0.0), Expr(0.0), Expr(0.0)};
        for (int k = 0; k < 3; ++k)
            if (!w[k].is_zero()) acc = acc + b[k].b.scaled(w[k]);
        return WeightedTensor{acc, kBetaWeight};
    };
    auto combine_v = [&](const std::array<Expr, 3>& w) {
        Expr acc(0.0);
        for (int k = 0; k < 3; ++k)
            if (!w[k].is_zero()) acc += w[k] * v[k];
        return acc;
    };
    PencilTriple out;
    out.beta = combine_b(t);
    out.inverse = inverse_metric_of_beta(out.beta);
    out.V = combine_v(t);
    out.integrals.push_back({"I1", killing_from_beta_pair(out.beta, combine_b(s)), combine_v(s)});
    out.integrals.push_back({"I2", killing_from_beta_pair(out.beta, combine_b(u)), combine_v(u)});
    return out;
}

inline CatalogEntry generator_system(int i) {
    if (i < 1 || i > 3) throw std::out_of_range("generator index must be 1, 2 or 3");
    std::array<Expr, 3> t{Expr(0.0), Expr(0.0), Expr(0.0)};
    t[static_cast<std::size_t>(i - 1)] = Expr(1.0);
    const int j = i % 3, k = (i + 1) % 3;  // the two other generators, zero based
    std::array<Expr, 3> s{Expr(0.0), Expr(0.0), Expr(0.0)}, u{Expr(0.0), Expr(0.0), Expr(0.0)};
    s[static_cast<std::size_t>(std::min(j, k))] = Expr(1.0);
    u[static_cast<std::size_t>(std::max(j, k))] = Expr(1.0);
    PencilTriple tri = pencil_triple(t, s, u);

    CatalogEntry e;
    e.name = "generator-" + std::to_string(i);
    e.summary = "generator metric g" + std::to_string(i) + " of the one-projective-symmetry class with its 4-parameter potential";
    e.metric = generator_metric(i);
    e.metric.domain.nonzero(tri.beta.det(), 1e-3);
    e.inverse = tri.inverse;
    e.V = tri.V;
    e.parameters = generic_c();
    e.integrals = std::move(tri.integrals);
    e.beta = generator_beta(i);
    if (i != 2) e.expected_type = "(3,11)";
    e.projective_class = "g1";
    e.printed = {{"potential_listing1", generator_potential_listing1(i)},
                 {"potential_listing2", generator_potential_listing2(i)}};
    return e;
}

// ---------------------------------------------------------------------------
// Two-sphere family

enum class SphereChart {
    // beta = cos(th)cos(ph) b1 + cos(th)sin(ph) b2 + sin(th) b3; degeneration
    // curve tan(th) = 2^{2/3}/108 sin^3(ph)/cos^2(ph).
    Standard,
    // beta = cos(th)sin(ph) b1 + cos(th)cos(ph) b2 + sin(th) b3.
    Swapped,
};

struct SphereCoefficients {
    std::array<double, 3> t, s, u;
};

inline SphereCoefficients sphere_coefficients(double theta, double phi, SphereChart chart = SphereChart::Standard) {
    if (chart == SphereChart::Swapped) phi = std::numbers::pi / 2 - phi;
    const double ct = std::cos(theta), st = std::sin(theta), cp = std::cos(phi), sp = std::sin(phi);
    return {{ct * cp, ct * sp, st}, {st * cp, st * sp, -ct}, {-sp, cp, 0.0}};
}

// Distance to the nearest of the six homothetic points +-beta_k, measured on the unit sphere of t.
inline double homothetic_distance(double theta, double phi, SphereChart chart = SphereChart::Standard) {
    const auto c = sphere_coefficients(theta, phi, chart);
    double best = 1e300;
    for (int k = 0; k < 3; ++k)
        for (double sgn : {1.0, -1.0}) {
            double d2 = 0.0;
            for (int m = 0; m < 3; ++m) {
                const double e = (m == k ? sgn : 0.0) - c.t[m];
                d2 += e * e;
            }
            best = std::min(best, std::sqrt(d2));
        }
    return best;
}

inline bool is_homothetic_point(double theta, double phi, SphereChart chart = SphereChart::Standard, double tol = 1e-9) {
    return homothetic_distance(theta, phi, chart) < tol;
}

// Parametric family in t1..t3, s1..s3, u1..u3 and c1..c4; a point of the
// sphere only sets parameter values.
inline const PencilTriple& sphere_family() {
    static const PencilTriple fam = pencil_triple({P("t1"), P("t2"), P("t3")}, {P("s1"), P("s2"), P("s3")},
                                                  {P("u1"), P("u2"), P("u3")});
    return fam;
}

inline void set_sphere_parameters(CatalogEntry& e, const SphereCoefficients& c) {
    const char* groups[3] = {"t", "s", "u"};
    const std::array<double, 3>* vals[3] = {&c.t, &c.s, &c.u};
    for (int g = 0; g < 3; ++g)
        for (int k = 0; k < 3; ++k) e.set_parameter(std::string(groups[g]) + std::to_string(k + 1), (*vals[g])[k]);
}

inline CatalogEntry sphere_system_unchecked(double theta, double phi, SphereChart chart = SphereChart::Standard) {
    const PencilTriple& fam = sphere_family();
    CatalogEntry e;
    e.name = "sphere";
    e.summary = "point of the two-sphere of metrics with one essential projective symmetry";
    Domain d = g1_class_window();
    d.nonzero(fam.beta.det(), 1e-3);
    e.metric = metric_of_beta(fam.beta, d);
    e.inverse = fam.inverse;
    e.V = fam.V;
    e.parameters = generic_c();
    set_sphere_parameters(e, sphere_coefficients(theta, phi, chart));
    e.set_parameter("theta", theta);
    e.set_parameter("phi", phi);
    e.integrals = fam.integrals;
    e.beta = fam.beta;
    e.projective_class = "g1";
    return e;
}

inline CatalogEntry sphere_system(double theta, double phi, SphereChart chart = SphereChart::Standard) {
    if (is_homothetic_point(theta, phi, chart, 1e-9))
        throw ExcludedPointError("excluded point: beta is a multiple of a single generator, where the projective "
                                 "symmetry becomes homothetic");
    return sphere_system_unchecked(theta, phi, chart);
}

// ---------------------------------------------------------------------------
// Darboux-Koenigs metrics lambda(x)(dx^2 +- dy^2) = h(x) g0 with g0 of constant
// curvature and lambda (V - c2) = c1 lambda0. Each quadratic integral is
// K0 - W0 (H - c2), K0 a Killing tensor of g0 compatible with h.

namespace detail {

struct DKData {
    std::string lambda, potential, lambda0, h;
    // two nontrivial (K0 components, W0) for "+" and "-"
    std::array<std::array<std::string, 4>, 2> plus, minus;
};

inline const DKData& dk_data(int i) {
    static const std::array<DKData, 4> data{{
        {"(a*cos(x) + b)/sin(x)^2",
         "c1/(a*cos(x) + b) + c2",
         "1/sin(x)^2",
         "a*cos(x) + b",
         {{{"0", "sin(x)*cosh_y/2", "cos(x)*sinh_y", "-a*sinh_y/2"}, {"0", "sin(x)*sinh_y/2", "cos(x)*cosh_y", "-a*cosh_y/2"}}},
         {{{"0", "sin(x)*cos(y)/2", "sin(y)*cos(x)", "a*sin(y)/2"}, {"0", "sin(x)*sin(y)/2", "-cos(x)*cos(y)", "-a*cos(y)/2"}}}},
        {"a*exp(-x) + b*exp(-2*x)",
         "c1/(a*exp(x) + b) + c2",
         "exp(-2*x)",
         "a*exp(x) + b",
         {{{"0", "-exp(x)*cos(y)/2", "-exp(x)*sin(y)", "-a*sin(y)/2"}, {"0", "-exp(x)*sin(y)/2", "exp(x)*cos(y)", "a*cos(y)/2"}}},
         {{{"0", "-exp(x)*cosh_y/2", "-exp(x)*sinh_y", "a*sinh_y/2"}, {"0", "exp(x)*sinh_y/2", "exp(x)*cosh_y", "-a*cosh_y/2"}}}},
        {"a/x^2 + 1",
         "c1/(x^2 + a) + c2",
         "1/x^2",
         "a + x^2",
         {{{"0", "x/2", "y", "y"}, {"0", "x*y", "y^2 - x^2", "y^2"}}},
         {{{"0", "x/2", "y", "-y"}, {"0", "x*y", "x^2 + y^2", "-y^2"}}}},
        {"x",
         "c1/x + c2",
         "1",
         "x",
         {{{"0", "1/2", "0", "y/2"}, {"0", "-y/2", "x", "-y^2/4"}}},
         {{{"0", "1/2", "0", "-y/2"}, {"0", "y/2", "x", "-y^2/4"}}}},
    }};
    return data.at(static_cast<std::size_t>(i - 1));
}

inline std::string expand_hyperbolic(std::string s) {
    auto replace = [&](const std::string& from, const std::string& to) {
        for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) s.replace(p, from.size(), to);
    };
    replace("cosh_y", "((exp(y) + exp(-y))/2)");
    replace("sinh_y", "((exp(y) - exp(-y))/2)");
    return s;
}

}  // namespace detail

inline CatalogEntry darboux_koenigs(int i, bool minus = false) {
    if (i < 1 || i > 4) throw std::out_of_range("Darboux-Koenigs index must be 1..4");
    const auto& d = detail::dk_data(i);
    const double sgn = minus ? -1.0 : 1.0;
    const Expr lambda = P(d.lambda);
    CatalogEntry e;
    e.name = "darboux-koenigs-" + std::to_string(i) + (minus ? "-minus" : "");
    e.summary = "Darboux-Koenigs metric " + std::to_string(i) + (minus ? " (dx^2 - dy^2)" : " (dx^2 + dy^2)") +
                " with its degenerate potential family";
    Domain dom(0.2, 2.0, 0.2, 1.5);
    dom.nonzero(lambda, 1e-3);
    e.metric = Metric2(Sym2{lambda, Expr(0.0), sgn * lambda}, dom, minus ? Signature::Lorentzian : Signature::Riemannian);
    e.inverse = Sym2{1.0 / lambda, Expr(0.0), sgn / lambda};
    e.V = P(d.potential);
    e.parameters = {{"a", 1.0}, {"b", 2.0}, {"c1", 1.0}, {"c2", 0.5}};
    e.integrals.push_back({"py^2", Sym2{Expr(0.0), Expr(0.0), Expr(1.0)}, Expr(0.0)});
    const auto& tensors = minus ? d.minus : d.plus;
    int n = 1;
    for (const auto& t : tensors) {
        const Sym2 k0{P(detail::expand_hyperbolic(t[0])), P(detail::expand_hyperbolic(t[1])),
                      P(detail::expand_hyperbolic(t[2]))};
        const Expr w0 = P(detail::expand_hyperbolic(t[3]));
        e.integrals.push_back({"K" + std::to_string(n++), k0 - e.inverse.scaled(w0), -(w0 * (e.V - P("c2")))});
    }
    e.projective_class = "darboux-koenigs";
    e.basepoint = {1.0, 1.0};
    e.printed = {{"metric", "(" + d.lambda + ")*(dx^2 " + (minus ? "-" : "+") + " dy^2)"}, {"potential", d.potential}};
    return e;
}

// H = 1/2 e^{3x} p_x^2 - D e^x p_y^2 + c1 e^x + c2: the quadratic part is the inverse metric.
inline CatalogEntry darboux_koenigs_bryant(double D) {
    if (D == 0.0) throw std::invalid_argument("D must be nonzero");
    CatalogEntry e;
    e.name = "darboux-koenigs-bryant";
    e.summary = "Darboux-Koenigs system in exponential normal form with parameter D";
    const Domain dom(0.2, 2.0, 0.2, 1.5);
    e.metric = Metric2(Sym2{P("2*exp(-3*x)"), Expr(0.0), -P("exp(-x)") / P("D")}, dom,
                       D > 0 ? Signature::Lorentzian : Signature::Riemannian);
    e.inverse = Sym2{P("exp(3*x)/2"), Expr(0.0), -P("D*exp(x)")};
    e.V = P("c1*exp(x) + c2");
    e.parameters = {{"D", D}, {"c1", 1.0}, {"c2", 0.5}};
    e.integrals.push_back({"py^2", Sym2{Expr(0.0), Expr(0.0), Expr(1.0)}, Expr(0.0)});
    e.projective_class = "darboux-koenigs";
    e.printed = {{"hamiltonian", "1/2*exp(3*x)*dx^2 - D*exp(x)*dy^2 + c1*exp(x) + c2"},
                 {"U", "2^(-1/3)*exp(4*x/3)*c1/abs(D)^(2/3) d_x"}};
    return e;
}

// Printed projective potential of the exponential normal form.
inline ProjectivePotential bryant_U_printed() {
    return {P("2^(-1/3)*exp(4*x/3)*c1/abs(D)^(2/3)"), Expr(0.0)};
}

// ---------------------------------------------------------------------------
// Constant curvature pair

inline Domain flat_window() { return Domain(0.5, 2.0, 0.5, 2.0); }

inline CatalogEntry flat_generic() {
    CatalogEntry e;
    e.name = "flat-generic";
    e.summary = "Euclidean plane with the generic potential";
    e.metric = Metric2(Sym2{Expr(1.0), Expr(0.0), Expr(1.0)}, flat_window(), Signature::Riemannian);
    e.inverse = e.metric.g;
    e.V = P("omega^2*(x^2 + y^2) + a/x^2 + b/y^2 + c");
    e.parameters = {{"omega", 1.0}, {"a", 0.5}, {"b", 1.0 / 3.0}, {"c", 0.0}};
    e.integrals.push_back({"J^2", Sym2{P("y^2"), P("-x*y"), P("x^2")}, P("a*y^2/x^2 + b*x^2/y^2")});
    e.integrals.push_back({"px^2", Sym2{Expr(1.0), Expr(0.0), Expr(0.0)}, P("omega^2*x^2 + a/x^2")});
    e.projective_class = "flat";
    e.printed = {{"killing", "C1*(y^2*dx^2 - 2*x*y*dxdy + x^2*dy^2) + C2*dx^2 + C3*dy^2"},
                 {"U", "-2*((a - omega^2*x^4)/x^3 d_x + (b - omega^2*y^4)/y^3 d_y)"}};
    return e;
}

inline Metric2 gnomonic_metric(double shift = 2.0) {
    const std::string r = "(x^2 + y^2 + " + std::to_string(static_cast<int>(shift)) + ")^2";
    const std::string s = std::to_string(static_cast<int>(shift));
    return Metric2::from_form(P("(y^2 + " + s + ")/" + r), P("-2*x*y/" + r), P("(x^2 + " + s + ")/" + r), flat_window(),
                              Signature::Riemannian);
}

// Curved partner of the flat generic system: potential and Killing tensors
// transported so that U agrees with the flat one exactly.
inline CatalogEntry curved_generic() {
    const CatalogEntry flat = flat_generic();
    CatalogEntry e;
    e.name = "curved-generic";
    e.summary = "sphere of sectional curvature 1 in central projection, partner of the flat generic system";
    e.metric = gnomonic_metric(2.0);
    e.inverse = e.metric.inverse();
    e.V = std::cbrt(2.0) * P("omega^2*(x^2 + y^2) + a*(y^2 + 2)/(2*x^2) + b*(x^2 + 2)/(2*y^2)") + P("c");
    e.parameters = flat.parameters;
    for (const auto& k : flat.integrals) e.integrals.push_back({k.label, transport_killing(flat.metric, k.K, e.metric), k.W});
    e.projective_class = "flat";
    e.printed = {{"metric", "((y^2 + 2)*dx^2 - 2*x*y*dxdy + (x^2 + 2)*dy^2)/(x^2 + y^2 + 2)^2"},
                 {"potential", "omega^2*(x^2 + y^2) + (y^2 + 1)*a/x^2 + (x^2 + 1)*b/y^2 + c"},
                 {"killing", "K/(x^2 + y^2 + 1)^2"}};
    return e;
}

inline std::pair<CatalogEntry, CatalogEntry> curvature_pair() { return {flat_generic(), curved_generic()}; }

inline CatalogEntry flat_oscillator() {
    CatalogEntry e;
    e.name = "flat-oscillator";
    e.summary = "Euclidean plane with the isotropic oscillator";
    e.metric = Metric2(Sym2{Expr(1.0), Expr(0.0), Expr(1.0)}, flat_window(), Signature::Riemannian);
    e.inverse = e.metric.g;
    e.V = P("omega^2*(x^2 + y^2) + c");
    e.parameters = {{"omega", 1.0}, {"c", 0.0}};
    e.integrals.push_back({"pxpy", Sym2{Expr(0.0), Expr(0.5), Expr(0.0)}, P("omega^2*x*y")});
    e.integrals.push_back({"px^2", Sym2{Expr(1.0), Expr(0.0), Expr(0.0)}, P("omega^2*x^2")});
    e.projective_class = "flat";
    return e;
}

// Metrics with a homothetic symmetry (no potential attached).
inline CatalogEntry frobenius(char which) {
    CatalogEntry e;
    e.name = std::string("frobenius-") + which;
    e.summary = "constant-curvature metric with a homothetic vector field";
    Domain dom(0.5, 3.0, 0.5, 2.0);
    switch (which) {
        case 'a': e.metric = Metric2(Sym2{Expr(1.0), Expr(0.0), Expr(1.0)}, dom, Signature::Riemannian); break;
        case 'c': e.metric = Metric2::from_form(Expr(0.0), P("x"), Expr(0.0), dom, Signature::Lorentzian); break;
        case 'd': e.metric = Metric2::from_form(Expr(0.0), P("-2*x/y^3"), P("x^2/y^4"), dom, Signature::Lorentzian); break;
        default: throw UnknownSystemError(std::string("no Frobenius metric '") + which + "'");
    }
    e.inverse = e.metric.inverse();
    e.V = Expr(0.0);
    return e;
}

// ---------------------------------------------------------------------------
// Registry

inline std::vector<std::string> names() {
    std::vector<std::string> out{"generator-1", "generator-2", "generator-3", "sphere"};
    for (int i = 1; i <= 4; ++i) {
        out.push_back("darboux-koenigs-" + std::to_string(i));
        out.push_back("darboux-koenigs-" + std::to_string(i) + "-minus");
    }
    out.insert(out.end(), {"darboux-koenigs-bryant", "flat-generic", "curved-generic", "flat-oscillator", "frobenius-a",
                           "frobenius-c", "frobenius-d"});
    return out;
}

inline CatalogEntry load(const std::string& name) {
    if (name == "generator-1") return generator_system(1);
    if (name == "generator-2") return generator_system(2);
    if (name == "generator-3") return generator_system(3);
    if (name == "sphere") return sphere_system(0.3, 1.0);
    for (int i = 1; i <= 4; ++i) {
        if (name == "darboux-koenigs-" + std::to_string(i)) return darboux_koenigs(i, false);
        if (name == "darboux-koenigs-" + std::to_string(i) + "-minus") return darboux_koenigs(i, true);
    }
    if (name == "darboux-koenigs-bryant") return darboux_koenigs_bryant(1.0);
    if (name == "flat-generic") return flat_generic();
    if (name == "curved-generic") return curved_generic();
    if (name == "flat-oscillator") return flat_oscillator();
    if (name.rfind("frobenius-", 0) == 0 && name.size() == 11) return frobenius(name.back());
    throw UnknownSystemError("unknown system '" + name + "'");
}

// ---------------------------------------------------------------------------
// JSON

using json = nlohmann::json;

inline json to_json(const CatalogEntry& e) {
    json j;
    j["name"] = e.name;
    j["summary"] = e.summary;
    j["metric"] = {{"g11", to_string(e.metric.g.a11)}, {"g12", to_string(e.metric.g.a12)}, {"g22", to_string(e.metric.g.a22)}};
    j["signature"] = to_string(e.metric.signature);
    j["potential"] = to_string(e.V);
    j["parameters"] = json::object();
    for (const auto& [n, v] : e.parameters) j["parameters"][n] = v;
    const Domain& d = e.metric.domain;
    j["domain"] = {{"x", {d.x_min, d.x_max}}, {"y", {d.y_min, d.y_max}}};
    json guards = json::array();
    for (const auto& g : d.guards)
        guards.push_back({{"expr", to_string(g.expr)},
                          {"type", g.type == Guard::Type::Positive ? "positive" : "nonzero"},
                          {"margin", g.margin}});
    j["domain"]["guards"] = guards;
    j["basepoint"] = {e.basepoint.x, e.basepoint.y};
    json ks = json::array();
    for (std::size_t i = 0; i < e.integrals.size(); ++i) {
        const auto& k = e.integrals[i];
        json kj{{"label", k.label}, {"K11", to_string(k.K.a11)}, {"K12", to_string(k.K.a12)}, {"K22", to_string(k.K.a22)}};
        if (!e.scalar_part_unknown(i)) kj["W"] = to_string(k.W);
        ks.push_back(kj);
    }
    j["killing_tensors"] = ks;
    if (e.expected_type) j["expected_type"] = *e.expected_type;
    if (!e.projective_class.empty()) j["projective_class"] = e.projective_class;
    if (!e.printed.empty()) {
        j["printed"] = json::object();
        for (const auto& [k, v] : e.printed) j["printed"][k] = v;
    }
    return j;
}

class SystemFormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// System-definition format:
// { name, metric: {g11, g12, g22}, potential, parameters: {name: value},
//   domain: {x: [lo, hi], y: [lo, hi], guards: [{expr, type, margin}]},
//   basepoint: [x, y], killing_tensors: [{label, K11, K12, K22, W}] }
// K is contravariant. A missing W is recovered by quadrature where needed.
inline CatalogEntry from_json(const json& j) {
    try {
        ParseOptions opts;
        if (j.contains("parameters"))
            for (const auto& [n, v] : j.at("parameters").items()) opts.parameters.push_back(n);
        auto ex = [&](const json& node) { return parse(node.get<std::string>(), opts); };
        CatalogEntry e;
        e.name = j.value("name", std::string("unnamed"));
        e.summary = j.value("summary", std::string());
        Domain d;
        if (j.contains("domain")) {
            const auto& dj = j.at("domain");
            if (dj.contains("x")) {
                d.x_min = dj.at("x").at(0).get<double>();
                d.x_max = dj.at("x").at(1).get<double>();
            }
            if (dj.contains("y")) {
                d.y_min = dj.at("y").at(0).get<double>();
                d.y_max = dj.at("y").at(1).get<double>();
            }
            if (dj.contains("guards"))
                for (const auto& g : dj.at("guards")) {
                    const double margin = g.value("margin", 1e-3);
                    if (g.value("type", std::string("nonzero")) == "positive")
                        d.positive(ex(g.at("expr")), margin);
                    else
                        d.nonzero(ex(g.at("expr")), margin);
                }
        }
        const auto& mj = j.at("metric");
        Signature sig = Signature::Unspecified;
        const std::string s = j.value("signature", std::string("unspecified"));
        if (s == "riemannian") sig = Signature::Riemannian;
        if (s == "lorentzian") sig = Signature::Lorentzian;
        e.metric = Metric2(Sym2{ex(mj.at("g11")), ex(mj.at("g12")), ex(mj.at("g22"))}, d, sig);
        e.inverse = e.metric.inverse();
        e.V = j.contains("potential") ? ex(j.at("potential")) : Expr(0.0);
        if (j.contains("parameters"))
            for (const auto& [n, v] : j.at("parameters").items()) e.parameters.emplace_back(n, v.get<double>());
        if (j.contains("basepoint")) e.basepoint = {j.at("basepoint").at(0).get<double>(), j.at("basepoint").at(1).get<double>()};
        if (j.contains("killing_tensors"))
            for (const auto& k : j.at("killing_tensors")) {
                KnownIntegral ki;
                ki.label = k.value("label", std::string("K") + std::to_string(e.integrals.size() + 1));
                ki.K = Sym2{ex(k.at("K11")), ex(k.at("K12")), ex(k.at("K22"))};
                if (k.contains("W")) {
                    ki.W = ex(k.at("W"));
                } else {
                    // W is fixed by dW = g K dV up to a constant; tag it as unknown.
                    ki.W = Expr::param("__quadrature__");
                }
                e.integrals.push_back(std::move(ki));
            }
        if (j.contains("expected_type")) e.expected_type = j.at("expected_type").get<std::string>();
        e.projective_class = j.value("projective_class", std::string());
        if (j.contains("printed"))
            for (const auto& [k, v] : j.at("printed").items()) e.printed.emplace_back(k, v.get<std::string>());
        return e;
    } catch (const json::exception& ex) {
        throw SystemFormatError(std::string("malformed system definition: ") + ex.what());
    }
}

inline CatalogEntry load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnknownSystemError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw SystemFormatError("cannot parse '" + path + "': " + ex.what());
    }
    return from_json(j);
}

// Name from the registry, or a path to a JSON system definition.
inline CatalogEntry resolve(const std::string& name_or_path) {
    if (name_or_path.size() > 5 && name_or_path.substr(name_or_path.size() - 5) == ".json") return load_file(name_or_path);
    return load(name_or_path);
}

}  // namespace catalog
}  // namespace projsuper
