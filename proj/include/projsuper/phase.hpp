#pragma once

// Functions on the cotangent bundle: Poisson bracket of expressions and of
// quadratic functions K^{ij} p_i p_j + W, where W may be known only through dW.

#include <array>
#include <optional>

#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"

namespace projsuper {

inline constexpr std::array<Var, 2> kCoords{Var::X, Var::Y};
inline constexpr std::array<Var, 2> kMomenta{Var::P1, Var::P2};

// {F,G} = dF/dx^i dG/dp_i - dF/dp_i dG/dx^i
inline Expr poisson(const Expr& f, const Expr& g) {
    Expr acc(0.0);
    for (int i = 0; i < 2; ++i) {
        acc += diff(f, kCoords[i]) * diff(g, kMomenta[i]);
        acc -= diff(f, kMomenta[i]) * diff(g, kCoords[i]);
    }
    return acc;
}

// K^{ij} p_i p_j
inline Expr quadratic_form(const Sym2& k) {
    const Expr& p1 = vars::p1();
    const Expr& p2 = vars::p2();
    return k.a11 * p1 * p1 + 2.0 * k.a12 * p1 * p2 + k.a22 * p2 * p2;
}

struct OneForm {
    Expr w1, w2;
    const Expr& operator[](int i) const { return i == 0 ? w1 : w2; }
    OneForm operator+(const OneForm& o) const { return {w1 + o.w1, w2 + o.w2}; }
    OneForm scaled(const Expr& s) const { return {s * w1, s * w2}; }
};

inline OneForm gradient(const Expr& f) { return {diff(f, Var::X), diff(f, Var::Y)}; }

// d of a 1-form in two dimensions: d_x w_2 - d_y w_1.
inline Expr exterior_derivative(const OneForm& w) { return diff(w.w2, Var::X) - diff(w.w1, Var::Y); }

// K^{ij} p_i p_j + W. The scalar part is carried by its differential; the
// closed form is kept when known.
struct PhaseFunction {
    Sym2 K;
    OneForm dW;
    std::optional<Expr> W;

    static PhaseFunction from(const Sym2& k, const Expr& w) { return {k, gradient(w), w}; }

    Expr expr() const {
        if (!W) throw ExprError("phase function has no closed-form scalar part");
        return quadratic_form(K) + *W;
    }
    Expr momentum_part() const { return quadratic_form(K); }
};

// Bracket of two quadratic phase functions, using only the differentials of
// their scalar parts. The result is cubic in the momenta plus linear terms.
inline Expr poisson(const PhaseFunction& f, const PhaseFunction& g) {
    const Expr qf = f.momentum_part();
    const Expr qg = g.momentum_part();
    Expr acc(0.0);
    for (int i = 0; i < 2; ++i) {
        const Expr dfx = diff(qf, kCoords[i]) + f.dW[i];
        const Expr dgx = diff(qg, kCoords[i]) + g.dW[i];
        acc += dfx * diff(qg, kMomenta[i]);
        acc -= diff(qf, kMomenta[i]) * dgx;
    }
    return acc;
}

struct PhasePoint {
    double x = 0, y = 0, p1 = 0, p2 = 0;
    Bindings bindings(const Bindings& params = {}) const {
        Bindings b = params;
        b.set(Var::X, x).set(Var::Y, y).set(Var::P1, p1).set(Var::P2, p2);
        return b;
    }
};

// Phase points with positions from `positions` and momenta uniform in [-1,1]^2.
inline std::vector<PhasePoint> attach_momenta(const std::vector<Point2>& positions, std::uint64_t seed) {
    Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<PhasePoint> out;
    out.reserve(positions.size());
    for (const auto& p : positions) out.push_back({p.x, p.y, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    return out;
}

inline std::vector<PhasePoint> sample_phase_points(const Domain& d, std::size_t n, std::uint64_t seed,
                                                   const Bindings& params = {}) {
    return attach_momenta(sample_points(d, n, seed, params), seed);
}

}  // namespace projsuper
