#pragma once

#include <cmath>
#include <vector>

#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"

namespace projsuper::testing {

// Scalar curvature g^{ij} R_ij from the Christoffel symbols.
inline Expr scalar_curvature(const Metric2& m) {
    const Christoffel c = christoffel(m);
    const Sym2 inv = m.inverse();
    const Var v[2] = {Var::X, Var::Y};
    auto ricci = [&](int i, int j) {
        Expr acc(0.0);
        for (int k = 0; k < 2; ++k) {
            acc += diff(c(k, i, j), v[k]) - diff(c(k, i, k), v[j]);
            for (int l = 0; l < 2; ++l) acc += c(k, k, l) * c(l, i, j) - c(k, j, l) * c(l, i, k);
        }
        return acc;
    };
    return inv.a11 * ricci(0, 0) + 2.0 * inv.a12 * ricci(0, 1) + inv.a22 * ricci(1, 1);
}

using projsuper::conditioning;

inline double max_abs_at(const Expr& e, const std::vector<Point2>& pts, const Bindings& params = {}) {
    Program prog(std::vector<Expr>{e});
    std::vector<double> scratch, out(1);
    double m = 0.0;
    for (const auto& p : pts) {
        Bindings b = params;
        b.set_point(p.x, p.y);
        prog.run(b, scratch, out);
        m = std::max(m, std::fabs(out[0]));
    }
    return m;
}

}  // namespace projsuper::testing
