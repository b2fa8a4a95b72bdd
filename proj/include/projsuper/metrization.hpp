#pragma once

// Weighted tensors beta = |det g|^{-2/3} g (weight 4/3) and
// sigma = |det g|^{1/3} g^{-1} (weight 2/3), the metrizability system for beta,
// and linear pencils of its solutions.

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"

namespace projsuper {

struct Weight {
    int num = 4;
    int den = 3;

    constexpr Weight() = default;
    constexpr Weight(int n, int d) : num(n), den(d) {
        const int g = std::gcd(n, d);
        num /= g;
        den /= g;
        if (den < 0) {
            num = -num;
            den = -den;
        }
    }
    friend constexpr bool operator==(const Weight&, const Weight&) = default;
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
    double value() const { return static_cast<double>(num) / den; }
};

inline constexpr Weight kBetaWeight{4, 3};
inline constexpr Weight kSigmaWeight{2, 3};

class WeightMismatchError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NonMetrizablePointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct WeightedTensor {
    Sym2 b;
    Weight weight = kBetaWeight;

    const Expr& operator()(int i, int j) const { return b(i, j); }
    Expr det() const { return b.det(); }
    WeightedTensor scaled(const Expr& s) const { return {b.scaled(s), weight}; }
};

inline WeightedTensor beta_of_metric(const Metric2& m) {
    require_nondegenerate(m);
    return {m.g.scaled(pow(abs(m.det()), -2.0 / 3.0)), kBetaWeight};
}

inline WeightedTensor sigma_of_metric(const Metric2& m) {
    require_nondegenerate(m);
    const Expr d = m.det();
    // |det g|^{1/3} g^{-1} = |det g|^{1/3} adj(g) / det g
    return {m.g.adj().scaled(pow(abs(d), 1.0 / 3.0) / d), kSigmaWeight};
}

// From beta = |det g|^{-2/3} g follows det beta = |det g|^{-4/3} det g, hence
// |det beta| = |det g|^{-1/3} and g = beta / |det beta|^2.
inline Metric2 metric_of_beta(const WeightedTensor& b, Domain domain = {}, Signature sig = Signature::Unspecified) {
    if (!(b.weight == kBetaWeight)) throw WeightMismatchError("metric_of_beta expects weight 4/3, got " + b.weight.str());
    const Expr d = simplify(b.det());
    if (d.is_zero()) throw NonMetrizablePointError("det beta vanishes identically; no metric corresponds");
    domain.nonzero(b.det(), 1e-9);
    return Metric2(b.b.scaled(pow(abs(b.det()), -2.0)), std::move(domain), sig);
}

// Inverse metric of Psi^{-1}(beta) without forming the metric first:
// g^{-1} = det(beta) adj(beta).
inline Sym2 inverse_metric_of_beta(const WeightedTensor& b) { return b.b.adj().scaled(b.det()); }

inline Num2 metric_of_beta_at(const WeightedTensor& b, const Bindings& at) {
    const Num2 v = eval(b.b, at);
    const double d = v.det();
    if (d == 0.0) throw NonMetrizablePointError("det beta = 0 at the requested point");
    const double s = 1.0 / (d * d);
    return {v.a11 * s, v.a12 * s, v.a22 * s};
}

// Left-hand sides of the linear system characterizing beta for a projective
// connection (f0, f1, f2, f3).
inline std::array<Expr, 4> metrizability_residuals(const WeightedTensor& wb, const ProjectiveConnection& f) {
    if (!(wb.weight == kBetaWeight))
        throw WeightMismatchError("metrizability residuals need weight 4/3, got " + wb.weight.str());
    const Expr& b11 = wb.b.a11;
    const Expr& b12 = wb.b.a12;
    const Expr& b22 = wb.b.a22;
    auto dx = [](const Expr& e) { return diff(e, Var::X); };
    auto dy = [](const Expr& e) { return diff(e, Var::Y); };
    const double t = 2.0 / 3.0, ft = 4.0 / 3.0;
    return {
        dx(b11) - t * f.f1 * b11 + 2.0 * f.f0 * b12,
        dy(b11) + 2.0 * dx(b12) - ft * f.f2 * b11 + t * f.f1 * b12 + 2.0 * f.f0 * b22,
        2.0 * dy(b12) + dx(b22) - 2.0 * f.f3 * b11 - t * f.f2 * b12 + ft * f.f1 * b22,
        dy(b22) - 2.0 * f.f3 * b12 + t * f.f2 * b22,
    };
}

inline WeightedTensor pencil(const std::vector<WeightedTensor>& bases, const std::vector<double>& t) {
    if (bases.empty() || bases.size() != t.size()) throw std::invalid_argument("pencil: bases and coefficients differ in length");
    WeightedTensor out{Sym2{Expr(0.0), Expr(0.0), Expr(0.0)}, bases.front().weight};
    for (std::size_t i = 0; i < bases.size(); ++i) {
        if (!(bases[i].weight == out.weight))
            throw WeightMismatchError("pencil: weight " + bases[i].weight.str() + " differs from " + out.weight.str());
        out.b = out.b + bases[i].b.scaled(Expr(t[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Admissible region of a pencil: det beta sampled on a grid; a cell is kept
// when det has one strict sign at its four corners and centre.

class AdmissibleGrid {
  public:
    AdmissibleGrid(const WeightedTensor& b, const Domain& box, int nx, int ny, const Bindings& params = {})
        : box_(box), nx_(nx), ny_(ny), ok_(static_cast<std::size_t>(nx * ny), false) {
        const Expr d = b.det();
        Program prog(std::vector<Expr>{d});
        std::vector<double> scratch, out(1);
        auto det_at = [&](double x, double y) {
            Bindings at = params;
            at.set_point(x, y);
            try {
                prog.run(at, scratch, out);
                return out[0];
            } catch (const ExprError&) {
                return 0.0;
            }
        };
        const double hx = (box.x_max - box.x_min) / nx, hy = (box.y_max - box.y_min) / ny;
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                const double x0 = box.x_min + i * hx, y0 = box.y_min + j * hy;
                const double v[5] = {det_at(x0, y0), det_at(x0 + hx, y0), det_at(x0, y0 + hy), det_at(x0 + hx, y0 + hy),
                                     det_at(x0 + hx / 2, y0 + hy / 2)};
                bool pos = true, neg = true;
                for (double w : v) {
                    if (!(w > 0.0) || !std::isfinite(w)) pos = false;
                    if (!(w < 0.0) || !std::isfinite(w)) neg = false;
                }
                if ((pos || neg) && box.contains(x0 + hx / 2, y0 + hy / 2, params)) {
                    ok_[static_cast<std::size_t>(i * ny + j)] = true;
                    ++count_;
                }
            }
    }

    bool contains(double x, double y) const {
        if (x < box_.x_min || x >= box_.x_max || y < box_.y_min || y >= box_.y_max) return false;
        const int i = static_cast<int>((x - box_.x_min) / (box_.x_max - box_.x_min) * nx_);
        const int j = static_cast<int>((y - box_.y_min) / (box_.y_max - box_.y_min) * ny_);
        return ok_[static_cast<std::size_t>(std::min(i, nx_ - 1) * ny_ + std::min(j, ny_ - 1))];
    }

    std::size_t admissible_cells() const { return count_; }
    double admissible_fraction() const { return static_cast<double>(count_) / static_cast<double>(nx_ * ny_); }

    std::vector<Point2> sample(std::size_t n, std::uint64_t seed, const Bindings& params = {}) const {
        if (count_ == 0) throw EmptyDomainError("det of the pencil changes sign in every cell of the window");
        Rng rng(seed);
        std::vector<Point2> pts;
        const std::size_t max_tries = 1000 * (n + 1);
        for (std::size_t tries = 0; pts.size() < n; ++tries) {
            if (tries > max_tries) throw EmptyDomainError("could not sample the admissible region");
            const double x = rng.uniform(box_.x_min, box_.x_max);
            const double y = rng.uniform(box_.y_min, box_.y_max);
            if (contains(x, y) && box_.contains(x, y, params)) pts.push_back({x, y});
        }
        return pts;
    }

  private:
    Domain box_;
    int nx_, ny_;
    std::vector<bool> ok_;
    std::size_t count_ = 0;
};

}  // namespace projsuper
