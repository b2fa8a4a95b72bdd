#pragma once

// The cubic relation R^2 = P(H, I1, I2) with R = {I1, I2}: least-squares fit
// from phase-space samples, root pattern of its leading binary cubic, and the
// Staeckel type read from the normal forms
//
//   (111,11)  I1 I2 (I1 + I2) + f I1 I2
//   (21,2)    I1^2 I2 + f I2^2          (21,0)  I1^2 I2
//   (3,11)    I1^3 + f I1 I2            (3,2)   I1^3 + f I2^2     (3,0)  I1^3
//   (0,11)    f I1 I2
//
// with f linear in H and constants, up to lower-order terms.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"
#include "projsuper/phase.hpp"
#include "projsuper/systems.hpp"

namespace projsuper {

class IllPosedFitError : public std::runtime_error {
  public:
    IllPosedFitError(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

  private:
    double condition_;
};

struct Monomial {
    int h, i1, i2;
};

// H^a I1^b I2^c with a+b+c <= 3, ordered by total degree then lexicographically.
inline const std::array<Monomial, 20>& cubic_monomials() {
    static const std::array<Monomial, 20> m = [] {
        std::array<Monomial, 20> out{};
        std::size_t k = 0;
        for (int deg = 0; deg <= 3; ++deg)
            for (int a = deg; a >= 0; --a)
                for (int b = deg - a; b >= 0; --b) out[k++] = {a, b, deg - a - b};
        return out;
    }();
    return m;
}

inline std::size_t monomial_index(int a, int b, int c) {
    const auto& m = cubic_monomials();
    for (std::size_t k = 0; k < m.size(); ++k)
        if (m[k].h == a && m[k].i1 == b && m[k].i2 == c) return k;
    throw std::out_of_range("no monomial H^" + std::to_string(a) + " I1^" + std::to_string(b) + " I2^" + std::to_string(c));
}

// Coefficients refer to the normalized variables H/h_scale, I/i_scale and the
// normalized target R^2/r_scale.
struct CubicModel {
    std::array<double, 20> coeff{};
    double h_scale = 1.0, i_scale = 1.0, r_scale = 1.0;
    double residual_rms = 0.0;  // relative to the RMS of R^2
    double condition = 1.0;
    std::size_t samples = 0;

    double operator()(int a, int b, int c) const { return coeff[monomial_index(a, b, c)]; }
    double& at(int a, int b, int c) { return coeff[monomial_index(a, b, c)]; }

    double norm() const {
        double s = 0.0;
        for (double v : coeff) s += v * v;
        return std::sqrt(s);
    }

    // Model prediction of R^2 in original units.
    double predict(double h, double i1, double i2) const {
        const double hn = h / h_scale, u = i1 / i_scale, v = i2 / i_scale;
        double acc = 0.0;
        const auto& m = cubic_monomials();
        for (std::size_t k = 0; k < m.size(); ++k) acc += coeff[k] * std::pow(hn, m[k].h) * std::pow(u, m[k].i1) * std::pow(v, m[k].i2);
        return acc * r_scale;
    }

    // Relative RMS misfit on independent samples.
    double residual_on(const std::vector<double>& h, const std::vector<double>& i1, const std::vector<double>& i2,
                       const std::vector<double>& r) const {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < h.size(); ++k) {
            const double t = r[k] * r[k];
            const double e = predict(h[k], i1[k], i2[k]) - t;
            num += e * e;
            den += t * t;
        }
        if (den == 0.0) return std::sqrt(num / std::max<std::size_t>(h.size(), 1));
        return std::sqrt(num / den);
    }
};

inline double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

inline CubicModel fit_r_squared(const std::vector<double>& h, const std::vector<double>& i1, const std::vector<double>& i2,
                                const std::vector<double>& r, double max_condition = 1e12) {
    const std::size_t n = h.size();
    if (i1.size() != n || i2.size() != n || r.size() != n) throw std::invalid_argument("fit_r_squared: sample vectors differ in length");
    if (n < 60) throw std::invalid_argument("fit_r_squared: need at least 60 samples, got " + std::to_string(n));
    CubicModel m;
    m.samples = n;
    m.h_scale = rms(h);
    m.i_scale = std::sqrt((rms(i1) * rms(i1) + rms(i2) * rms(i2)) / 2.0);
    if (m.h_scale == 0.0 || m.i_scale == 0.0) throw IllPosedFitError("fit_r_squared: H or the integrals vanish on the sample", INFINITY);

    std::vector<double> target(n);
    for (std::size_t k = 0; k < n; ++k) target[k] = r[k] * r[k];
    m.r_scale = rms(target);

    const auto& mons = cubic_monomials();
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), 20);
    Eigen::VectorXd t(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        const double hn = h[k] / m.h_scale, u = i1[k] / m.i_scale, v = i2[k] / m.i_scale;
        const double hp[4] = {1, hn, hn * hn, hn * hn * hn}, up[4] = {1, u, u * u, u * u * u}, vp[4] = {1, v, v * v, v * v * v};
        for (std::size_t j = 0; j < 20; ++j)
            A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = hp[mons[j].h] * up[mons[j].i1] * vp[mons[j].i2];
        t(static_cast<Eigen::Index>(k)) = m.r_scale > 0.0 ? target[k] / m.r_scale : 0.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    m.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!(m.condition < max_condition))
        throw IllPosedFitError("fit_r_squared: design matrix is rank deficient (condition " + std::to_string(m.condition) +
                                   "); H, I1, I2 are not independent on the sample",
                               m.condition);
    if (m.r_scale == 0.0) {
        m.r_scale = 1.0;
        return m;
    }
    const Eigen::VectorXd c = svd.solve(t);
    for (std::size_t j = 0; j < 20; ++j) m.coeff[j] = c(static_cast<Eigen::Index>(j));
    m.residual_rms = (A * c - t).norm() / std::sqrt(static_cast<double>(n));
    return m;
}

// ---------------------------------------------------------------------------
// Sampling a system

// Compiled H, I1, I2, R = {I1,I2}, {H,I1}, {H,I2}. Scalar parts known only
// through their differentials are integrated from the basepoint.
class TripleEvaluator {
  public:
    TripleEvaluator(PhaseFunction H, PhaseFunction I1, PhaseFunction I2, Point2 basepoint = {1.0, 1.0})
        : f_{std::move(H), std::move(I1), std::move(I2)}, base_(basepoint) {
        std::vector<Expr> out;
        for (const auto& f : f_) out.push_back(f.momentum_part());
        for (const auto& f : f_) out.push_back(f.W ? *f.W : Expr(0.0));
        out.push_back(poisson(f_[1], f_[2]));
        out.push_back(poisson(f_[0], f_[1]));
        out.push_back(poisson(f_[0], f_[2]));
        prog_ = Program(out);
        for (int k = 0; k < 3; ++k)
            if (!f_[k].W) forms_[k] = Program(std::vector<Expr>{f_[k].dW.w1, f_[k].dW.w2});
    }

    const PhaseFunction& function(int k) const { return f_.at(static_cast<std::size_t>(k)); }

    struct Values {
        double h, i1, i2, r, h_i1, h_i2;
    };

    Values at(const PhasePoint& p, const Bindings& params, std::vector<double>& scratch) const {
        std::array<double, 9> o{};
        prog_.run(p.bindings(params), scratch, o);
        for (int k = 0; k < 3; ++k)
            if (!f_[k].W) o[3 + k] = detail::segment_integral(forms_[k], params, base_, {p.x, p.y}, {});
        return {o[0] + o[3], o[1] + o[4], o[2] + o[5], o[6], o[7], o[8]};
    }

    Values at(const PhasePoint& p, const Bindings& params = {}) const {
        std::vector<double> scratch;
        return at(p, params, scratch);
    }

  private:
    std::array<PhaseFunction, 3> f_;
    Point2 base_;
    Program prog_;
    std::array<Program, 3> forms_;
};

struct SampleSet {
    std::vector<double> h, i1, i2, r;
    double max_bracket = 0.0;  // max |{H,I}| / (1 + |H||I|)
};

inline SampleSet evaluate_samples(const TripleEvaluator& ev, const std::vector<PhasePoint>& pts, const Bindings& params) {
    SampleSet s;
    std::vector<double> scratch;
    for (const auto& p : pts) {
        const auto v = ev.at(p, params, scratch);
        s.h.push_back(v.h);
        s.i1.push_back(v.i1);
        s.i2.push_back(v.i2);
        s.r.push_back(v.r);
        s.max_bracket = std::max({s.max_bracket, std::fabs(v.h_i1) / (1.0 + std::fabs(v.h * v.i1)),
                                  std::fabs(v.h_i2) / (1.0 + std::fabs(v.h * v.i2))});
    }
    return s;
}

inline CubicModel fit_r_squared(const Expr& H, const Expr& I1, const Expr& I2, const Expr& R, const std::vector<PhasePoint>& pts,
                                const Bindings& params = {}) {
    Program prog(std::vector<Expr>{H, I1, I2, R});
    std::vector<double> h, i1, i2, r, scratch;
    std::array<double, 4> o{};
    for (const auto& p : pts) {
        prog.run(p.bindings(params), scratch, o);
        h.push_back(o[0]);
        i1.push_back(o[1]);
        i2.push_back(o[2]);
        r.push_back(o[3]);
    }
    return fit_r_squared(h, i1, i2, r);
}

// ---------------------------------------------------------------------------
// Binary cubic a u^3 + b u^2 v + c u v^2 + d v^3

enum class RootPattern { Distinct, DoubleSimple, Triple, Zero };

inline const char* to_string(RootPattern p) {
    switch (p) {
        case RootPattern::Distinct: return "(111)";
        case RootPattern::DoubleSimple: return "(21)";
        case RootPattern::Triple: return "(3)";
        case RootPattern::Zero: return "(0)";
    }
    return "?";
}

struct Thresholds {
    double eps_c = 1e-6;      // coefficient zero test, relative to the full coefficient norm
    double eps_delta = 1e-8;  // discriminant zero test, after normalization by |(a,b,c,d)|^4
    double eps_hess = 1e-6;   // Hessian covariant zero test, after normalization by |(a,b,c,d)|^2
    double ambiguity = 2.0;   // decisions closer than this factor to a threshold are not trusted
};

// max(v/t, t/v): how far a measured value sits from its threshold, on either side.
inline double separation(double v, double thr) {
    v = std::fabs(v);
    if (v == 0.0) return INFINITY;
    return std::max(v / thr, thr / v);
}

struct CubicAnalysis {
    RootPattern pattern = RootPattern::Zero;
    double leading_norm = 0.0;  // |(a,b,c,d)| / scale
    double discriminant = NAN;  // normalized
    double hessian = NAN;       // normalized norm of (b^2-3ac, bc-9ad, c^2-3bd)
    double cubic_zero_margin = NAN, discriminant_margin = NAN, hessian_margin = NAN;
    // projective roots, |(u,v)| = 1, u real and >= 0, sorted by (Re v, Im v)
    std::vector<std::array<std::complex<double>, 2>> roots;
    // repeated root for (21) and (3), unit length
    std::array<double, 2> repeated{NAN, NAN};
};

inline std::vector<std::array<std::complex<double>, 2>> binary_cubic_roots(double a, double b, double c, double d) {
    using C = std::complex<double>;
    std::vector<std::array<C, 2>> out;
    std::vector<double> poly;  // highest degree first, in the affine coordinate
    bool in_t = std::fabs(d) >= std::fabs(a);
    // in_t: points (1, t) with d t^3 + c t^2 + b t + a = 0; else (s, 1) with a s^3 + b s^2 + c s + d = 0.
    poly = in_t ? std::vector<double>{d, c, b, a} : std::vector<double>{a, b, c, d};
    while (!poly.empty() && poly.front() == 0.0) {
        poly.erase(poly.begin());
        // missing degree: root at infinity of this chart
        out.push_back(in_t ? std::array<C, 2>{C(0.0), C(1.0)} : std::array<C, 2>{C(1.0), C(0.0)});
    }
    const int deg = static_cast<int>(poly.size()) - 1;
    if (deg >= 1) {
        Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
        for (int j = 0; j < deg; ++j) comp(0, j) = -poly[static_cast<std::size_t>(j + 1)] / poly[0];
        for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
        Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
        for (int i = 0; i < deg; ++i) {
            const C z = es.eigenvalues()(i);
            out.push_back(in_t ? std::array<C, 2>{C(1.0), z} : std::array<C, 2>{z, C(1.0)});
        }
    }
    for (auto& r : out) {
        const double nrm = std::sqrt(std::norm(r[0]) + std::norm(r[1]));
        C phase = std::abs(r[0]) > 0.0 ? std::conj(r[0]) / std::abs(r[0]) : std::conj(r[1]) / std::abs(r[1]);
        r[0] *= phase / nrm;
        r[1] *= phase / nrm;
        r[0] = C(r[0].real(), 0.0);
    }
    std::sort(out.begin(), out.end(), [](const auto& p, const auto& q) {
        if (p[1].real() != q[1].real()) return p[1].real() < q[1].real();
        return p[1].imag() < q[1].imag();
    });
    return out;
}

inline CubicAnalysis binary_cubic_type(double a, double b, double c, double d, double scale, const Thresholds& th = {}) {
    CubicAnalysis out;
    const double n = std::sqrt(a * a + b * b + c * c + d * d);
    if (!(scale > 0.0)) scale = n;
    out.leading_norm = scale > 0.0 ? n / scale : 0.0;
    out.cubic_zero_margin = separation(out.leading_norm, th.eps_c);
    if (n == 0.0 || out.leading_norm < th.eps_c) {
        out.pattern = RootPattern::Zero;
        return out;
    }
    out.roots = binary_cubic_roots(a, b, c, d);
    const double n2 = n * n;
    out.discriminant = (b * b * c * c - 4 * a * c * c * c - 4 * b * b * b * d - 27 * a * a * d * d + 18 * a * b * c * d) / (n2 * n2);
    out.discriminant_margin = separation(out.discriminant, th.eps_delta);
    if (std::fabs(out.discriminant) >= th.eps_delta) {
        out.pattern = RootPattern::Distinct;
        return out;
    }
    const double A = b * b - 3 * a * c, B = b * c - 9 * a * d, C = c * c - 3 * b * d;
    out.hessian = std::sqrt(A * A + B * B + C * C) / n2;
    out.hessian_margin = separation(out.hessian, th.eps_hess);
    std::array<double, 2> r;
    if (out.hessian < th.eps_hess) {
        out.pattern = RootPattern::Triple;
        // a (u - rho v)^3: (b, -3a) or (3d, -c)
        const std::array<double, 2> r1{b, -3 * a}, r2{3 * d, -c};
        r = std::hypot(r1[0], r1[1]) >= std::hypot(r2[0], r2[1]) ? r1 : r2;
    } else {
        out.pattern = RootPattern::DoubleSimple;
        // the Hessian covariant is a square of the repeated linear factor
        const std::array<double, 2> r1{-B, 2 * A}, r2{2 * C, -B};
        r = std::hypot(r1[0], r1[1]) >= std::hypot(r2[0], r2[1]) ? r1 : r2;
    }
    const double rn = std::hypot(r[0], r[1]);
    out.repeated = {r[0] / rn, r[1] / rn};
    if (out.repeated[0] < 0 || (out.repeated[0] == 0 && out.repeated[1] < 0)) out.repeated = {-out.repeated[0], -out.repeated[1]};
    return out;
}

// ---------------------------------------------------------------------------
// Staeckel type

enum class StaeckelLabel { T111_11, T21_2, T21_0, T3_11, T3_2, T3_0, T0_11, Unclassifiable };

inline const char* to_string(StaeckelLabel l) {
    switch (l) {
        case StaeckelLabel::T111_11: return "(111,11)";
        case StaeckelLabel::T21_2: return "(21,2)";
        case StaeckelLabel::T21_0: return "(21,0)";
        case StaeckelLabel::T3_11: return "(3,11)";
        case StaeckelLabel::T3_2: return "(3,2)";
        case StaeckelLabel::T3_0: return "(3,0)";
        case StaeckelLabel::T0_11: return "(0,11)";
        case StaeckelLabel::Unclassifiable: return "unclassifiable";
    }
    return "?";
}

inline std::optional<StaeckelLabel> parse_label(const std::string& s) {
    for (auto l : {StaeckelLabel::T111_11, StaeckelLabel::T21_2, StaeckelLabel::T21_0, StaeckelLabel::T3_11, StaeckelLabel::T3_2,
                   StaeckelLabel::T3_0, StaeckelLabel::T0_11, StaeckelLabel::Unclassifiable})
        if (s == to_string(l)) return l;
    return std::nullopt;
}

struct StaeckelMargins {
    double cubic_zero = NAN;
    double discriminant = NAN;
    double hessian = NAN;
    double quadratic = NAN;  // Q at the repeated root, or the whole Q for (0,.)
    double cross = NAN;      // cross term modulo Q(r), for (3,.)
};

struct StaeckelType {
    StaeckelLabel label = StaeckelLabel::Unclassifiable;
    std::vector<StaeckelLabel> candidates;  // two entries when unclassifiable
    StaeckelMargins margins;
    CubicAnalysis cubic;
    std::array<double, 2> q_at_root{NAN, NAN};  // (constant, H) parts
    std::string note;

    std::string str() const { return to_string(label); }
    // smallest margin among the decisions that were taken
    double min_margin() const {
        double m = INFINITY;
        for (double v : {margins.cubic_zero, margins.discriminant, margins.hessian, margins.quadratic, margins.cross})
            if (!std::isnan(v)) m = std::min(m, v);
        return m;
    }
};

namespace detail {

struct Decisions {
    bool cubic_zero, delta_zero, hess_zero, quad_zero, cross_zero;
};

inline StaeckelLabel label_of(const Decisions& d) {
    if (d.cubic_zero) return d.quad_zero ? StaeckelLabel::Unclassifiable : StaeckelLabel::T0_11;
    if (!d.delta_zero) return StaeckelLabel::T111_11;
    if (!d.hess_zero) return d.quad_zero ? StaeckelLabel::T21_0 : StaeckelLabel::T21_2;
    if (d.quad_zero) return d.cross_zero ? StaeckelLabel::T3_0 : StaeckelLabel::T3_11;
    return d.cross_zero ? StaeckelLabel::T3_2 : StaeckelLabel::T3_11;
}

// Q_k(u,v) for k = 0 (constant coefficients) or k = 1 (coefficients of H).
inline double quad_part(const CubicModel& m, int k, double u, double v) {
    return m(k, 2, 0) * u * u + m(k, 1, 1) * u * v + m(k, 0, 2) * v * v;
}

// 2 B(s, r) for the symmetric bilinear form of Q_k.
inline double quad_polar(const CubicModel& m, int k, const std::array<double, 2>& s, const std::array<double, 2>& r) {
    return 2.0 * m(k, 2, 0) * s[0] * r[0] + m(k, 1, 1) * (s[0] * r[1] + s[1] * r[0]) + 2.0 * m(k, 0, 2) * s[1] * r[1];
}

}  // namespace detail

// Shifts I -> I + f(H, c) change the quadratic part Q by multiples of the
// partial derivatives of the cubic part P. At a repeated root r of P both
// partials vanish, so Q(r) is invariant; for a triple root the cross term
// 2B(s, r) is invariant modulo multiples of Q(r).
inline StaeckelType classify_staeckel(const CubicModel& m, const Thresholds& th = {}) {
    StaeckelType out;
    const double scale = m.norm();
    if (scale == 0.0) {
        out.note = "R^2 vanishes on the sample";
        out.candidates = {StaeckelLabel::Unclassifiable};
        return out;
    }
    out.cubic = binary_cubic_type(m(0, 3, 0), m(0, 2, 1), m(0, 1, 2), m(0, 0, 3), scale, th);
    const CubicAnalysis& ca = out.cubic;
    out.margins.cubic_zero = ca.cubic_zero_margin;
    out.margins.discriminant = ca.discriminant_margin;
    out.margins.hessian = ca.hessian_margin;

    detail::Decisions dec{ca.pattern == RootPattern::Zero, false, false, false, false};
    // which decisions were taken, in order, with their margins
    std::vector<std::pair<bool detail::Decisions::*, double>> taken{{&detail::Decisions::cubic_zero, ca.cubic_zero_margin}};

    if (dec.cubic_zero) {
        double q = 0.0;
        for (int k = 0; k < 2; ++k)
            for (auto [b, c] : {std::pair{2, 0}, std::pair{1, 1}, std::pair{0, 2}}) q += m(k, b, c) * m(k, b, c);
        q = std::sqrt(q) / scale;
        out.margins.quadratic = separation(q, th.eps_c);
        dec.quad_zero = q < th.eps_c;
        taken.push_back({&detail::Decisions::quad_zero, out.margins.quadratic});
    } else {
        dec.delta_zero = ca.pattern != RootPattern::Distinct;
        taken.push_back({&detail::Decisions::delta_zero, ca.discriminant_margin});
        if (dec.delta_zero) {
            dec.hess_zero = ca.pattern == RootPattern::Triple;
            taken.push_back({&detail::Decisions::hess_zero, ca.hessian_margin});
            const auto& r = ca.repeated;
            out.q_at_root = {detail::quad_part(m, 0, r[0], r[1]) / scale, detail::quad_part(m, 1, r[0], r[1]) / scale};
            const double gamma = std::hypot(out.q_at_root[0], out.q_at_root[1]);
            out.margins.quadratic = separation(gamma, th.eps_c);
            dec.quad_zero = gamma < th.eps_c;
            taken.push_back({&detail::Decisions::quad_zero, out.margins.quadratic});
            if (dec.hess_zero) {
                const std::array<double, 2> s{-r[1], r[0]};
                const std::array<double, 2> beta{detail::quad_polar(m, 0, s, r) / scale, detail::quad_polar(m, 1, s, r) / scale};
                double cross;
                if (dec.quad_zero) {
                    cross = std::hypot(beta[0], beta[1]);
                } else {
                    // component of beta transverse to Q(r)
                    cross = std::fabs(beta[0] * out.q_at_root[1] - beta[1] * out.q_at_root[0]) / gamma;
                }
                out.margins.cross = separation(cross, th.eps_c);
                dec.cross_zero = cross < th.eps_c;
                taken.push_back({&detail::Decisions::cross_zero, out.margins.cross});
            }
        }
    }

    out.label = detail::label_of(dec);
    // the weakest decision below the ambiguity factor decides the alternative
    const auto weakest = std::min_element(taken.begin(), taken.end(), [](const auto& p, const auto& q) { return p.second < q.second; });
    if (weakest != taken.end() && weakest->second < th.ambiguity) {
        detail::Decisions alt = dec;
        alt.*(weakest->first) = !(alt.*(weakest->first));
        out.candidates = {out.label, detail::label_of(alt)};
        out.label = StaeckelLabel::Unclassifiable;
        out.note = "a threshold test is within a factor " + std::to_string(th.ambiguity) + " of its threshold";
    } else {
        out.candidates = {out.label};
        if (out.label == StaeckelLabel::Unclassifiable) out.note = "R^2 has neither cubic nor quadratic part in the integrals";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Functional independence

inline Eigen::Vector3d jacobian_singular_values(const std::array<std::array<double, 4>, 3>& J) {
    Eigen::Matrix<double, 3, 4> M;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) M(i, j) = J[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    Eigen::JacobiSVD<Eigen::Matrix<double, 3, 4>> svd(M);
    return svd.singularValues();
}

inline int numeric_rank(const Eigen::Vector3d& sv, double rel = 1e-9) {
    if (sv(0) == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < 3; ++i)
        if (sv(i) > rel * sv(0)) ++r;
    return r;
}

inline int functional_independence(const Expr& H, const Expr& I1, const Expr& I2, const PhasePoint& pt, const Bindings& params = {}) {
    const Bindings b = pt.bindings(params);
    const Var vs[4] = {Var::X, Var::Y, Var::P1, Var::P2};
    const Expr* fs[3] = {&H, &I1, &I2};
    std::array<std::array<double, 4>, 3> J{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) J[i][j] = eval(diff(*fs[i], vs[j]), b);
    return numeric_rank(jacobian_singular_values(J));
}

// Jacobian of quadratic phase functions, using dW for the scalar parts.
inline std::array<std::array<double, 4>, 3> phase_jacobian(const std::array<const PhaseFunction*, 3>& fs, const PhasePoint& pt,
                                                            const Bindings& params = {}) {
    const Bindings b = pt.bindings(params);
    std::array<std::array<double, 4>, 3> J{};
    for (int i = 0; i < 3; ++i) {
        const Expr q = fs[i]->momentum_part();
        J[i][0] = eval(diff(q, Var::X) + fs[i]->dW.w1, b);
        J[i][1] = eval(diff(q, Var::Y) + fs[i]->dW.w2, b);
        J[i][2] = eval(diff(q, Var::P1), b);
        J[i][3] = eval(diff(q, Var::P2), b);
    }
    return J;
}

inline int functional_independence(const PhaseFunction& H, const PhaseFunction& I1, const PhaseFunction& I2, const PhasePoint& pt,
                                   const Bindings& params = {}) {
    return numeric_rank(jacobian_singular_values(phase_jacobian({&H, &I1, &I2}, pt, params)));
}

// ---------------------------------------------------------------------------
// Recombination I1' = a1 I1 + b1 I2 + c1 H + d1, I2' = a2 I1 + b2 I2 + c2 H + d2

struct Recombination {
    double a1 = 1, b1 = 0, c1 = 0, d1 = 0;
    double a2 = 0, b2 = 1, c2 = 0, d2 = 0;
    double det() const { return a1 * b2 - a2 * b1; }
};

inline PhaseFunction combine(const PhaseFunction& I1, const PhaseFunction& I2, const PhaseFunction& H, double a, double b, double c,
                             double d) {
    PhaseFunction out;
    out.K = I1.K.scaled(Expr(a)) + I2.K.scaled(Expr(b)) + H.K.scaled(Expr(c));
    out.dW = I1.dW.scaled(Expr(a)) + I2.dW.scaled(Expr(b)) + H.dW.scaled(Expr(c));
    if (I1.W && I2.W && H.W) out.W = a * *I1.W + b * *I2.W + c * *H.W + d;
    return out;
}

inline std::pair<PhaseFunction, PhaseFunction> recombine(const PhaseFunction& H, const PhaseFunction& I1, const PhaseFunction& I2,
                                                         const Recombination& r) {
    return {combine(I1, I2, H, r.a1, r.b1, r.c1, r.d1), combine(I1, I2, H, r.a2, r.b2, r.c2, r.d2)};
}

inline Recombination random_recombination(Rng& rng, double min_det = 0.2) {
    for (;;) {
        Recombination r{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                        rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        if (std::fabs(r.det()) >= min_det) return r;
    }
}

// ---------------------------------------------------------------------------
// End to end

struct ClassifyOptions {
    std::size_t samples = 200;
    std::size_t check_samples = 100;
    std::uint64_t seed = 0xA11CE;
    Thresholds thresholds{};
};

// Integrals used for the fit: u = W (I - a - b H) for I = (I1, I2). The
// shift removes the part of I explained by constants and H on the sample and
// W whitens the remainder, so two recombinations of the same pair give bases
// that differ by an orthogonal map.
struct IntegralBasis {
    Eigen::Matrix2d W = Eigen::Matrix2d::Identity();
    Eigen::Vector2d a = Eigen::Vector2d::Zero(), b = Eigen::Vector2d::Zero();

    static IntegralBasis whitening(const SampleSet& s) {
        const auto n = static_cast<Eigen::Index>(s.h.size());
        Eigen::MatrixXd A(n, 2), Y(n, 2);
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto j = static_cast<std::size_t>(k);
            A(k, 0) = 1.0;
            A(k, 1) = s.h[j];
            Y(k, 0) = s.i1[j];
            Y(k, 1) = s.i2[j];
        }
        IntegralBasis out;
        const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(Y);
        out.a = coef.row(0).transpose();
        out.b = coef.row(1).transpose();
        const Eigen::MatrixXd E = Y - A * coef;
        const Eigen::Matrix2d C = E.transpose() * E / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
        if (!(es.eigenvalues()(0) > 1e-14 * es.eigenvalues()(1)))
            throw IllPosedFitError("integral basis: I1, I2 are dependent modulo H and constants on the sample",
                                   es.eigenvalues()(1) / std::max(es.eigenvalues()(0), 0.0));
        out.W = es.operatorInverseSqrt();
        return out;
    }

    // R = {I1, I2} becomes det(W) R.
    SampleSet apply(const SampleSet& s) const {
        SampleSet t = s;
        const double d = W.determinant();
        for (std::size_t k = 0; k < s.h.size(); ++k) {
            const Eigen::Vector2d i(s.i1[k], s.i2[k]);
            const Eigen::Vector2d u = W * (i - a - b * s.h[k]);
            t.i1[k] = u(0);
            t.i2[k] = u(1);
            t.r[k] = d * s.r[k];
        }
        return t;
    }
};

struct ClassificationReport {
    StaeckelType type;
    CubicModel model;  // in the integrals of `basis`
    IntegralBasis basis;
    double out_of_sample_rms = NAN;
    double max_bracket = NAN;
    std::uint64_t seed = 0;
};

inline ClassificationReport classify_triple(const TripleEvaluator& ev, const Domain& domain, const Bindings& params,
                                            const ClassifyOptions& opt = {}) {
    ClassificationReport rep;
    rep.seed = opt.seed;
    const auto fit_pts = sample_phase_points(domain, opt.samples, opt.seed, params);
    const auto chk_pts = sample_phase_points(domain, opt.check_samples, opt.seed + 1, params);
    const SampleSet raw_fit = evaluate_samples(ev, fit_pts, params);
    const SampleSet raw_chk = evaluate_samples(ev, chk_pts, params);
    rep.basis = IntegralBasis::whitening(raw_fit);
    const SampleSet s = rep.basis.apply(raw_fit), c = rep.basis.apply(raw_chk);
    rep.model = fit_r_squared(s.h, s.i1, s.i2, s.r);
    rep.out_of_sample_rms = rep.model.residual_on(c.h, c.i1, c.i2, c.r);
    rep.max_bracket = std::max(s.max_bracket, c.max_bracket);
    rep.type = classify_staeckel(rep.model, opt.thresholds);
    return rep;
}

}  // namespace projsuper
