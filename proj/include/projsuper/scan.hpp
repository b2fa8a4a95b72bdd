#pragma once

// Classification over the two-sphere of metrics in the g1 projective class,
// cell by cell, and its CSV form.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "projsuper/algebra.hpp"
#include "projsuper/catalog.hpp"

namespace projsuper::scan {

// tan(theta) = k sin^3(phi) / cos^2(phi), k = 2^{2/3}/108, in the standard chart.
inline double curve_constant() { return std::pow(2.0, 2.0 / 3.0) / 108.0; }

inline double curve_theta(double phi) {
    const double s = std::sin(phi), c = std::cos(phi);
    return std::atan2(curve_constant() * s * s * s, c * c);
}

inline std::array<double, 3> sphere_point(double theta, double phi) {
    return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), std::sin(theta)};
}

inline double great_circle(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return std::acos(std::clamp(d, -1.0, 1.0));
}

// Angular distance on the unit sphere of t to the degeneration curve.
inline double curve_distance(double theta, double phi) {
    const auto p = sphere_point(theta, phi);
    constexpr int coarse = 4096;
    const double step = 2.0 * std::numbers::pi / coarse;
    auto dist = [&](double s) { return great_circle(p, sphere_point(curve_theta(s), s)); };
    double best_s = 0.0, best = INFINITY;
    for (int k = 0; k < coarse; ++k) {
        const double s = k * step, d = dist(s);
        if (d < best) best = d, best_s = s;
    }
    // golden-section refinement around the coarse minimum
    double a = best_s - step, b = best_s + step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    for (int it = 0; it < 60; ++it) {
        if (dist(c) < dist(d))
            b = d;
        else
            a = c;
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    return std::min(best, dist((a + b) / 2.0));
}

// Rows theta_i = -pi/2 + pi i / n_theta, columns phi_j = 2 pi j / n_phi. The
// equator is a row when n_theta is even.
struct SphereGrid {
    int n_theta = 64, n_phi = 32;
    double theta(int i) const { return -std::numbers::pi / 2 + std::numbers::pi * i / n_theta; }
    double phi(int j) const { return 2.0 * std::numbers::pi * j / n_phi; }
    std::size_t cells() const { return static_cast<std::size_t>(n_theta) * static_cast<std::size_t>(n_phi); }
};

struct CellResult {
    int i = 0, j = 0;
    double theta = 0.0, phi = 0.0;
    bool excluded = false;
    StaeckelType type;
    double fit_rms = NAN, check_rms = NAN, max_bracket = NAN;
    double curve_distance = NAN;
    std::string note;
};

// Compiled once for the whole parametric family; cells differ in bindings only.
class SphereClassifier {
  public:
    explicit SphereClassifier(ClassifyOptions opt = {}) : opt_(opt) {
        const CatalogEntry e = catalog::sphere_system_unchecked(0.3, 1.0);
        ev_ = std::make_unique<TripleEvaluator>(e.hamiltonian(), e.integral(0), e.integral(1), e.basepoint);
    }

    const ClassifyOptions& options() const { return opt_; }

    ClassificationReport classify(double theta, double phi) const {
        const CatalogEntry e = catalog::sphere_system(theta, phi);
        return classify_triple(*ev_, e.domain(), e.bindings(), opt_);
    }

    CellResult cell(double theta, double phi) const {
        CellResult r;
        r.theta = theta;
        r.phi = phi;
        r.curve_distance = curve_distance(theta, phi);
        if (catalog::is_homothetic_point(theta, phi, catalog::SphereChart::Standard, 1e-9)) {
            r.excluded = true;
            r.type.candidates = {StaeckelLabel::Unclassifiable};
            r.note = "excluded: the projective symmetry becomes homothetic";
            return r;
        }
        try {
            const ClassificationReport rep = classify(theta, phi);
            r.type = rep.type;
            r.fit_rms = rep.model.residual_rms;
            r.check_rms = rep.out_of_sample_rms;
            r.max_bracket = rep.max_bracket;
            r.note = rep.type.note;
        } catch (const std::exception& ex) {
            r.type = StaeckelType{};
            r.type.candidates = {StaeckelLabel::Unclassifiable};
            r.note = ex.what();
        }
        return r;
    }

  private:
    ClassifyOptions opt_;
    std::unique_ptr<TripleEvaluator> ev_;
};

// Cells in row-major order; every cell yields a row.
inline std::vector<CellResult> scan_sphere(const SphereGrid& grid, const ClassifyOptions& opt, unsigned threads = 0) {
    if (grid.n_theta < 1 || grid.n_phi < 1) throw std::invalid_argument("scan grid must have at least one cell");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const SphereClassifier cls(opt);
    std::vector<CellResult> out(grid.cells());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < out.size(); k = next++) {
            const int i = static_cast<int>(k / static_cast<std::size_t>(grid.n_phi));
            const int j = static_cast<int>(k % static_cast<std::size_t>(grid.n_phi));
            out[k] = cls.cell(grid.theta(i), grid.phi(j));
            out[k].i = i;
            out[k].j = j;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return out;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
}

inline const char* csv_header() {
    return "i,j,theta,phi,label,alternative,cubic_zero_margin,discriminant_margin,hessian_margin,quadratic_margin,"
           "cross_margin,min_margin,fit_rms,check_rms,max_bracket,curve_distance,note";
}

inline void write_csv_row(std::ostream& os, const CellResult& r) {
    const auto& m = r.type.margins;
    const std::string label = r.excluded ? "excluded" : to_string(r.type.label);
    const std::string alt = r.type.candidates.size() > 1 ? to_string(r.type.candidates[1]) : "";
    os << r.i << ',' << r.j << ',' << format_double(r.theta) << ',' << format_double(r.phi) << ',' << csv_field(label) << ','
       << csv_field(alt) << ',' << format_double(m.cubic_zero) << ',' << format_double(m.discriminant) << ','
       << format_double(m.hessian) << ',' << format_double(m.quadratic) << ',' << format_double(m.cross) << ','
       << format_double(r.excluded ? NAN : r.type.min_margin()) << ',' << format_double(r.fit_rms) << ','
       << format_double(r.check_rms) << ',' << format_double(r.max_bracket) << ',' << format_double(r.curve_distance) << ','
       << csv_field(r.note) << '\n';
}

}  // namespace projsuper::scan
