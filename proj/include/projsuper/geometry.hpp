#pragma once

// Metrics on a coordinate patch (x, y), their Levi-Civita connection,
// Thomas symbols and the projective connection
//   y'' = f0 + f1 y' + f2 y'^2 + f3 y'^3.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "projsuper/expr.hpp"

namespace projsuper {

// Symmetric 2x2 matrix of expressions; the (2,1) entry is never stored.
struct Sym2 {
    Expr a11, a12, a22;

    const Expr& operator()(int i, int j) const {
        if (i == 0 && j == 0) return a11;
        if (i == 1 && j == 1) return a22;
        return a12;
    }
    Expr det() const { return a11 * a22 - a12 * a12; }
    Sym2 adj() const { return {a22, -a12, a11}; }
    Sym2 scaled(const Expr& s) const { return {s * a11, s * a12, s * a22}; }
    Sym2 simplified() const { return {simplify(a11), simplify(a12), simplify(a22)}; }
    Sym2 operator+(const Sym2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
    Sym2 operator-(const Sym2& o) const { return {a11 - o.a11, a12 - o.a12, a22 - o.a22}; }
};

// Product A*B*A for symmetric A, B (stays symmetric).
inline Sym2 sandwich(const Sym2& a, const Sym2& b) {
    Sym2 out;
    Expr* slots[3] = {&out.a11, &out.a12, &out.a22};
    const int idx[3][2] = {{0, 0}, {0, 1}, {1, 1}};
    for (int s = 0; s < 3; ++s) {
        const int i = idx[s][0], j = idx[s][1];
        Expr acc(0.0);
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) acc += a(i, k) * b(k, l) * a(l, j);
        *slots[s] = acc;
    }
    return out;
}

// Numeric symmetric matrix.
struct Num2 {
    double a11 = 0, a12 = 0, a22 = 0;
    double operator()(int i, int j) const { return i == 0 && j == 0 ? a11 : (i == 1 && j == 1 ? a22 : a12); }
    double det() const { return a11 * a22 - a12 * a12; }
    double norm() const { return std::sqrt(a11 * a11 + 2 * a12 * a12 + a22 * a22); }
};

inline Num2 eval(const Sym2& s, const Bindings& b) { return {eval(s.a11, b), eval(s.a12, b), eval(s.a22, b)}; }

// ---------------------------------------------------------------------------
// Domains and deterministic sampling

struct Point2 {
    double x = 0, y = 0;
};

// Floating draws from a 64-bit Mersenne twister using the top 53 bits, so the
// stream is identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next() { return eng_(); }

  private:
    std::mt19937_64 eng_;
};

struct Guard {
    enum class Type { Nonzero, Positive };
    Expr expr;
    Type type = Type::Nonzero;
    double margin = 1e-3;

    bool holds(const Bindings& b) const {
        const double v = eval(expr, b);
        if (!std::isfinite(v)) return false;
        return type == Type::Positive ? v > margin : std::fabs(v) > margin;
    }
};

struct Domain {
    double x_min = 0.5, x_max = 3.0;
    double y_min = 0.5, y_max = 2.0;
    std::vector<Guard> guards;

    Domain() = default;
    Domain(double x0, double x1, double y0, double y1) : x_min(x0), x_max(x1), y_min(y0), y_max(y1) {}

    Domain& nonzero(Expr e, double margin = 1e-3) {
        guards.push_back({std::move(e), Guard::Type::Nonzero, margin});
        return *this;
    }
    Domain& positive(Expr e, double margin = 1e-3) {
        guards.push_back({std::move(e), Guard::Type::Positive, margin});
        return *this;
    }

    bool contains(double x, double y, const Bindings& params = {}) const {
        if (x < x_min || x > x_max || y < y_min || y > y_max) return false;
        Bindings b = params;
        b.set_point(x, y);
        for (const auto& g : guards) {
            try {
                if (!g.holds(b)) return false;
            } catch (const DomainError&) {
                return false;
            }
        }
        return true;
    }

    bool empty_box() const { return !(x_max > x_min) || !(y_max > y_min); }
};

class EmptyDomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Draws n points uniformly in the box that satisfy every guard.
inline std::vector<Point2> sample_points(const Domain& d, std::size_t n, std::uint64_t seed,
                                         const Bindings& params = {}) {
    if (d.empty_box()) throw EmptyDomainError("empty sampling box");
    Rng rng(seed);
    std::vector<Point2> pts;
    pts.reserve(n);
    const std::size_t max_tries = 1000 * (n + 1);
    for (std::size_t tries = 0; pts.size() < n; ++tries) {
        if (tries > max_tries) throw EmptyDomainError("could not sample the domain: guards exclude the box");
        const double x = rng.uniform(d.x_min, d.x_max);
        const double y = rng.uniform(d.y_min, d.y_max);
        if (d.contains(x, y, params)) pts.push_back({x, y});
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Metrics

enum class Signature { Riemannian, Lorentzian, Unspecified };

inline const char* to_string(Signature s) {
    switch (s) {
        case Signature::Riemannian: return "riemannian";
        case Signature::Lorentzian: return "lorentzian";
        case Signature::Unspecified: return "unspecified";
    }
    return "unspecified";
}

class DegenerateMetricError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Metric2 {
    Sym2 g;
    Domain domain;
    Signature signature = Signature::Unspecified;

    Metric2() = default;
    Metric2(Sym2 comps, Domain dom = {}, Signature sig = Signature::Unspecified)
        : g(std::move(comps)), domain(std::move(dom)), signature(sig) {}

    // Off-diagonal coefficient of a quadratic form written as A dx^2 + B dxdy + C dy^2.
    static Metric2 from_form(const Expr& dx2, const Expr& dxdy, const Expr& dy2, Domain dom = {},
                             Signature sig = Signature::Unspecified) {
        return Metric2(Sym2{dx2, dxdy / 2.0, dy2}, std::move(dom), sig);
    }

    Expr det() const { return g.det(); }
    Sym2 inverse() const {
        const Expr d = det();
        const Sym2 a = g.adj();
        return {a.a11 / d, a.a12 / d, a.a22 / d};
    }
    Metric2 scaled(const Expr& s) const { return Metric2(g.scaled(s), domain, signature); }
};

// (|g11 g22| + g12^2) / |det g|: amplification of roundoff when g^{-1} is formed.
inline Expr conditioning(const Metric2& m) { return (abs(m.g.a11 * m.g.a22) + m.g.a12 * m.g.a12) / abs(m.det()); }

inline void require_nondegenerate(const Metric2& m, const Bindings& params = {}) {
    const Expr d = simplify(m.det());
    if (d.is_zero()) throw DegenerateMetricError("metric determinant vanishes identically");
    // probe a few interior points; an identically vanishing determinant that
    // survives simplification still shows up here.
    Rng rng(7);
    for (int i = 0; i < 8; ++i) {
        Bindings b = params;
        b.set_point(rng.uniform(m.domain.x_min, m.domain.x_max), rng.uniform(m.domain.y_min, m.domain.y_max));
        try {
            if (eval(d, b) != 0.0) return;
        } catch (const UnboundSymbolError&) {
            return;  // free parameters: only the symbolic test applies
        } catch (const ExprError&) {
        }
    }
    throw DegenerateMetricError("metric determinant vanishes at every probe point");
}

// ---------------------------------------------------------------------------
// Connection data. Index 0 is x, 1 is y.

using Sym3 = std::array<std::array<std::array<Expr, 2>, 2>, 2>;  // [k][i][j]

struct Christoffel {
    Sym3 G;
    const Expr& operator()(int k, int i, int j) const { return G[k][i][j]; }
};

struct Thomas {
    Sym3 P;
    const Expr& operator()(int k, int i, int j) const { return P[k][i][j]; }
};

struct ProjectiveConnection {
    Expr f0, f1, f2, f3;
    std::array<Expr, 4> coeffs() const { return {f0, f1, f2, f3}; }
};

inline Christoffel christoffel(const Metric2& m) {
    require_nondegenerate(m);
    const Sym2 inv = m.inverse();
    std::array<std::array<std::array<Expr, 2>, 2>, 2> dg{};  // dg[l][i][j] = d_l g_ij
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) dg[l][i][j] = diff(m.g(i, j), l == 0 ? Var::X : Var::Y);
    Christoffel c;
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = i; j < 2; ++j) {
                Expr acc(0.0);
                for (int l = 0; l < 2; ++l) acc += inv(k, l) * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                c.G[k][i][j] = simplify(0.5 * acc);
                c.G[k][j][i] = c.G[k][i][j];
            }
    return c;
}

inline Thomas thomas(const Christoffel& c) {
    std::array<Expr, 2> trace{};
    for (int j = 0; j < 2; ++j) trace[j] = c(0, 0, j) + c(1, 1, j);
    Thomas t;
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                Expr corr(0.0);
                if (k == i) corr += trace[j];
                if (k == j) corr += trace[i];
                t.P[k][i][j] = simplify(c(k, i, j) - corr / 3.0);
            }
    return t;
}

inline ProjectiveConnection projective_connection(const Christoffel& c) {
    return {simplify(-c(1, 0, 0)), simplify(c(0, 0, 0) - 2.0 * c(1, 0, 1)), simplify(2.0 * c(0, 0, 1) - c(1, 1, 1)),
            simplify(c(0, 1, 1))};
}

inline ProjectiveConnection projective_connection(const Metric2& m) { return projective_connection(christoffel(m)); }

struct ClassComparison {
    bool same = false;
    double max_deviation = 0.0;
    std::size_t points = 0;
};

// Compares the projective connections of two metrics on a point set.
inline ClassComparison same_projective_class(const Metric2& a, const Metric2& b, const std::vector<Point2>& sample,
                                             double tol = 1e-9, const Bindings& params = {}) {
    if (sample.empty()) throw EmptyDomainError("no sample points in the shared domain");
    const auto fa = projective_connection(a).coeffs();
    const auto fb = projective_connection(b).coeffs();
    std::vector<Expr> roots(fa.begin(), fa.end());
    roots.insert(roots.end(), fb.begin(), fb.end());
    Program prog(roots);
    ClassComparison out;
    std::vector<double> scratch, vals(8);
    for (const auto& p : sample) {
        Bindings bind = params;
        bind.set_point(p.x, p.y);
        prog.run(bind, scratch, vals);
        for (int i = 0; i < 4; ++i) {
            const double dev = std::fabs(vals[i] - vals[4 + i]) / (1.0 + std::fabs(vals[i]));
            out.max_deviation = std::max(out.max_deviation, dev);
        }
        ++out.points;
    }
    out.same = out.max_deviation <= tol;
    return out;
}

// Covariant derivative of the metric, nabla_k g_ij; vanishes for the Levi-Civita connection.
inline std::array<Sym2, 2> metricity(const Metric2& m, const Christoffel& c) {
    std::array<Sym2, 2> out;
    for (int k = 0; k < 2; ++k) {
        const Var v = k == 0 ? Var::X : Var::Y;
        Expr comps[3];
        const int idx[3][2] = {{0, 0}, {0, 1}, {1, 1}};
        for (int s = 0; s < 3; ++s) {
            const int i = idx[s][0], j = idx[s][1];
            Expr acc = diff(m.g(i, j), v);
            for (int l = 0; l < 2; ++l) acc -= c(l, k, i) * m.g(l, j) + c(l, k, j) * m.g(i, l);
            comps[s] = acc;
        }
        out[k] = {comps[0], comps[1], comps[2]};
    }
    return out;
}

}  // namespace projsuper
