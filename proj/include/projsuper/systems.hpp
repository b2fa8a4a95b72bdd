#pragma once

// Natural Hamiltonians H = g^{ij} p_i p_j + V, the projective vector potential
// U = |det g|^{2/3} grad_g V, transport of potentials and Killing tensors
// along a projective class, and addition of systems.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"
#include "projsuper/metrization.hpp"
#include "projsuper/phase.hpp"

namespace projsuper {

struct NaturalHamiltonian {
    Sym2 inverse;  // g^{ij}
    Expr V;

    static NaturalHamiltonian of(const Metric2& g, const Expr& v) { return {g.inverse(), v}; }

    Expr expr() const { return quadratic_form(inverse) + V; }
    PhaseFunction phase() const { return PhaseFunction::from(inverse, V); }
};

struct ProjectivePotential {
    Expr u1, u2;
    const Expr& operator[](int i) const { return i == 0 ? u1 : u2; }
};

class ClosednessError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Bertrand-Darboux

// Residual of d(K_i^b V_b dx^i) = 0 for a covariant K.
inline Expr bertrand_darboux_residual(const Metric2& g, const Sym2& k_cov, const Expr& V) {
    require_nondegenerate(g);
    const Sym2 inv = g.inverse();
    const OneForm dv = gradient(V);
    std::array<Expr, 2> w;
    for (int i = 0; i < 2; ++i) {
        Expr acc(0.0);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) acc += k_cov(i, a) * inv(a, b) * dv[b];
        w[i] = acc;
    }
    return diff(w[1], Var::X) - diff(w[0], Var::Y);
}

// Same condition for a contravariant Killing tensor: the 1-form
// W_k = g_{kj} K^{ji} V_i must be closed.
inline OneForm killing_potential_oneform(const Metric2& g, const Sym2& k_up, const Expr& V) {
    const OneForm dv = gradient(V);
    std::array<Expr, 2> w;
    for (int k = 0; k < 2; ++k) {
        Expr acc(0.0);
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) acc += g.g(k, j) * k_up(j, i) * dv[i];
        w[k] = acc;
    }
    return {w[0], w[1]};
}

inline Expr bertrand_darboux_residual_up(const Metric2& g, const Sym2& k_up, const Expr& V) {
    return exterior_derivative(killing_potential_oneform(g, k_up, V));
}

// ---------------------------------------------------------------------------
// Projective potential and its transport

inline ProjectivePotential projective_potential(const Metric2& g, const Expr& V) {
    require_nondegenerate(g);
    const Expr w = pow(abs(g.det()), 2.0 / 3.0);
    const Sym2 inv = g.inverse();
    const OneForm dv = gradient(V);
    return {w * (inv.a11 * dv.w1 + inv.a12 * dv.w2), w * (inv.a12 * dv.w1 + inv.a22 * dv.w2)};
}

// V_i = b_{ij} U^j
inline OneForm transport_potential_oneform(const WeightedTensor& b, const ProjectivePotential& U) {
    if (!(b.weight == kBetaWeight)) throw WeightMismatchError("transport needs a weight 4/3 tensor");
    return {b(0, 0) * U.u1 + b(0, 1) * U.u2, b(1, 0) * U.u1 + b(1, 1) * U.u2};
}

// U^i b_{i[j,k]} - U^i_{,[j} b_{k]i} for (j,k) = (x,y).
inline Expr invariant_bd_residual(const WeightedTensor& b, const ProjectivePotential& U) {
    auto d = [](const Expr& e, int k) { return diff(e, kCoords[k]); };
    Expr acc(0.0);
    for (int i = 0; i < 2; ++i) {
        acc += 0.5 * U[i] * (d(b(i, 0), 1) - d(b(i, 1), 0));
        acc -= 0.5 * (d(U[i], 0) * b(1, i) - d(U[i], 1) * b(0, i));
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Scalar potential from a closed 1-form by quadrature.

struct ScalarPotentialOptions {
    double abs_tol = 1e-11;
    double path_tol = 1e-9;
    bool check_path = true;
    unsigned max_depth = 18;
};

class PathDependenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double segment_integral(const Program& form, const Bindings& params, Point2 a, Point2 b,
                               const ScalarPotentialOptions& opt) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    if (dx == 0.0 && dy == 0.0) return 0.0;
    std::vector<double> scratch, out(2);
    auto f = [&](double t) {
        Bindings at = params;
        at.set_point(a.x + t * dx, a.y + t * dy);
        form.run(at, scratch, out);
        const double v = out[0] * dx + out[1] * dy;
        if (!std::isfinite(v)) throw DomainError("non-finite 1-form", "segment integrand");
        return v;
    };
    double err = 0.0;
    double value = 0.0;
    try {
        value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, 0.0, 1.0, opt.max_depth, 1e-14, &err);
    } catch (const DomainError& e) {
        throw DomainError("segment crosses a singular locus", e.subterm());
    }
    if (!std::isfinite(value)) throw DomainError("segment crosses a singular locus", "quadrature");
    if (err > opt.abs_tol * std::max(1.0, std::fabs(value)))
        throw DomainError("quadrature did not reach tolerance (error " + std::to_string(err) + ")", "segment");
    return value;
}

}  // namespace detail

// Integral of a closed 1-form along the straight segment base -> point.
class ScalarPotential {
  public:
    ScalarPotential(OneForm dV, Point2 base, Bindings params = {}, ScalarPotentialOptions opt = {})
        : form_(std::vector<Expr>{dV.w1, dV.w2}), base_(base), params_(std::move(params)), opt_(opt) {}

    double operator()(Point2 p) const {
        const double direct = detail::segment_integral(form_, params_, base_, p, opt_);
        if (opt_.check_path) {
            const Point2 corner{p.x, base_.y};
            const double l_path = detail::segment_integral(form_, params_, base_, corner, opt_) +
                                  detail::segment_integral(form_, params_, corner, p, opt_);
            if (std::fabs(l_path - direct) > opt_.path_tol * std::max(1.0, std::fabs(direct))) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "1-form is not closed: straight path " << direct << " vs L-path " << l_path;
                throw PathDependenceError(msg.str());
            }
        }
        return direct;
    }
    double operator()(double x, double y) const { return (*this)(Point2{x, y}); }
    Point2 basepoint() const { return base_; }

  private:
    Program form_;
    Point2 base_;
    Bindings params_;
    ScalarPotentialOptions opt_;
};

inline double scalar_potential(const OneForm& dV, Point2 base, Point2 point, const Bindings& params = {},
                               ScalarPotentialOptions opt = {}) {
    return ScalarPotential(dV, base, params, opt)(point);
}

// ---------------------------------------------------------------------------
// Killing tensors

// The rule K~ = |det g_dst / det g_src|^{2/3} K acts on the covariant
// tensor K_ij = g_ik K^kl g_lj. Input and output are contravariant.
inline Sym2 transport_killing(const Metric2& src, const Sym2& k_up, const Metric2& dst) {
    require_nondegenerate(src);
    require_nondegenerate(dst);
    const Sym2 k_cov = sandwich(src.g, k_up).scaled(pow(abs(dst.det() / src.det()), 2.0 / 3.0));
    return sandwich(dst.inverse(), k_cov);
}

// The same rule read on contravariant components; kept for comparison.
inline Sym2 transport_killing_contravariant(const Metric2& src, const Sym2& k_up, const Metric2& dst) {
    return k_up.scaled(pow(abs(dst.det() / src.det()), 2.0 / 3.0));
}

// {g^{ij}p_ip_j, K^{ij}p_ip_j}; vanishes identically iff K is a Killing tensor.
inline Expr killing_bracket(const Sym2& g_inverse, const Sym2& k_up) {
    return poisson(quadratic_form(g_inverse), quadratic_form(k_up));
}

// Contravariant Killing tensor from a metrization solution b:
// K^{ij} = |det g|^{2/3} g^{ik} b_{kl} g^{lj}.
inline Sym2 killing_from_beta(const Metric2& g, const WeightedTensor& b) {
    return sandwich(g.inverse(), b.b).scaled(pow(abs(g.det()), 2.0 / 3.0));
}

// For g = Psi^{-1}(beta) the same tensor is adj(beta) b adj(beta), which
// avoids fractional powers.
inline Sym2 killing_from_beta_pair(const WeightedTensor& beta, const WeightedTensor& b) {
    return sandwich(beta.b.adj(), b.b);
}

struct QuadraticIntegral {
    PhaseFunction f;
    Point2 basepoint{1.0, 1.0};

    const Sym2& K() const { return f.K; }
    const OneForm& dW() const { return f.dW; }
    bool has_closed_form() const { return f.W.has_value(); }

    // W at p, from the closed form when present, otherwise by quadrature from the basepoint.
    double W(Point2 p, const Bindings& params = {}) const {
        if (f.W) {
            Bindings at = params;
            at.set_point(p.x, p.y);
            return eval(*f.W, at);
        }
        return ScalarPotential(f.dW, basepoint, params)(p);
    }
};

struct ClosednessReport {
    double max_residual = 0.0;
    double max_scale = 0.0;
    bool closed = true;
};

// Checks that dW is closed (mixed partials agree) at sample points.
inline ClosednessReport check_closed(const OneForm& w, const std::vector<Point2>& pts, double rel_tol,
                                     const Bindings& params = {}) {
    const Program prog(std::vector<Expr>{diff(w.w2, Var::X), diff(w.w1, Var::Y)});
    ClosednessReport r;
    std::vector<double> scratch, out(2);
    for (const auto& p : pts) {
        Bindings at = params;
        at.set_point(p.x, p.y);
        prog.run(at, scratch, out);
        const double res = std::fabs(out[0] - out[1]);
        const double scale = std::max(std::fabs(out[0]), std::fabs(out[1]));
        r.max_residual = std::max(r.max_residual, res);
        r.max_scale = std::max(r.max_scale, scale);
        if (res > rel_tol * (1.0 + scale)) r.closed = false;
    }
    return r;
}

// Integral I = K^{ij}p_ip_j + W with K from b and dW = b U.
inline QuadraticIntegral build_integral(const Metric2& g, const WeightedTensor& b, const ProjectivePotential& U,
                                        Point2 basepoint, const Bindings& params = {}, double tol = 1e-9,
                                        std::size_t probes = 20) {
    const OneForm dw = transport_potential_oneform(b, U);
    const auto pts = sample_points(g.domain, probes, 0xC105EDULL, params);
    const auto rep = check_closed(dw, pts, tol, params);
    if (!rep.closed) {
        std::ostringstream msg;
        msg.precision(6);
        msg << "b U is not closed: max |d(bU)| = " << rep.max_residual << " at scale " << rep.max_scale;
        throw ClosednessError(msg.str());
    }
    return {PhaseFunction{killing_from_beta(g, b), dw, std::nullopt}, basepoint};
}

// ---------------------------------------------------------------------------
// Addition of systems

struct SystemSummand {
    WeightedTensor beta;
    Expr V;
};

struct AddedSystem {
    Metric2 metric;
    WeightedTensor beta;
    Expr V;
};

inline AddedSystem add_systems(const std::vector<SystemSummand>& systems, const std::vector<double>& t,
                               const Domain& window = {}) {
    if (systems.size() != t.size()) throw std::invalid_argument("add_systems: coefficient count mismatch");
    std::vector<WeightedTensor> betas;
    Expr v(0.0);
    for (std::size_t i = 0; i < systems.size(); ++i) {
        betas.push_back(systems[i].beta);
        if (t[i] != 0.0) v += t[i] * systems[i].V;
    }
    const WeightedTensor b = pencil(betas, t);
    AdmissibleGrid grid(b, window, 16, 16);
    if (grid.admissible_cells() == 0) throw EmptyDomainError("det of the combined beta vanishes across the window");
    return {metric_of_beta(b, window), b, v};
}

// ---------------------------------------------------------------------------
// Simultaneously Staeckel and projectively related potential:
// V1 = c phi / (1 - phi^{2/3})^{3/2}.

inline Expr stackel_projective_potential(const Expr& phi, double c) {
    if (c == 0.0) return Expr(0.0);
    return c * phi / pow(Expr(1.0) - pow(phi, 2.0 / 3.0), 1.5);
}

// ---------------------------------------------------------------------------
// Equality up to a constant factor, decided by a one-parameter least-squares fit.

struct ProportionalityFit {
    double lambda = 0.0;
    double relative_residual = 0.0;
    bool proportional(double tol = 1e-8) const { return relative_residual < tol; }
};

inline ProportionalityFit fit_proportionality(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, bb = 0.0, aa = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        bb += b[i] * b[i];
        aa += a[i] * a[i];
    }
    ProportionalityFit f;
    if (bb == 0.0) {
        f.lambda = 0.0;
        f.relative_residual = aa == 0.0 ? 0.0 : 1.0;
        return f;
    }
    f.lambda = ab / bb;
    double rr = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) rr += (a[i] - f.lambda * b[i]) * (a[i] - f.lambda * b[i]);
    f.relative_residual = aa == 0.0 ? 0.0 : std::sqrt(rr / aa);
    return f;
}

// Fits U1 = lambda U2 over the sample.
inline ProportionalityFit fit_proportionality(const ProjectivePotential& u1, const ProjectivePotential& u2,
                                              const std::vector<Point2>& pts, const Bindings& params = {}) {
    const Program prog(std::vector<Expr>{u1.u1, u1.u2, u2.u1, u2.u2});
    std::vector<double> a, b, scratch, out(4);
    for (const auto& p : pts) {
        Bindings at = params;
        at.set_point(p.x, p.y);
        prog.run(at, scratch, out);
        a.push_back(out[0]);
        a.push_back(out[1]);
        b.push_back(out[2]);
        b.push_back(out[3]);
    }
    return fit_proportionality(a, b);
}

}  // namespace projsuper
