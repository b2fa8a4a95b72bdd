// projsuper: verify catalog systems, classify points of the sphere of
// metrics, scan it, transport potentials.
//
// Exit codes: 0 pass, 1 a check failed or a point is unclassifiable, 2 error.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "projsuper/algebra.hpp"
#include "projsuper/catalog.hpp"
#include "projsuper/metrization.hpp"
#include "projsuper/scan.hpp"
#include "projsuper/systems.hpp"

using namespace projsuper;
using nlohmann::json;

namespace {

struct RunConfig {
    std::uint64_t seed = 0xA11CE;
    std::size_t samples = 200;
    std::size_t check_samples = 100;
    std::size_t points = 100;
    double eps_c = 1e-6;
    double eps_delta = 1e-8;
    double ambiguity = 2.0;
    double bracket_tol = 1e-9;
    double residual_tol = 1e-10;
    double fit_tol = 1e-8;
    unsigned threads = 0;

    ClassifyOptions classify_options() const {
        ClassifyOptions o;
        o.samples = samples;
        o.check_samples = check_samples;
        o.seed = seed;
        o.thresholds.eps_c = eps_c;
        o.thresholds.eps_delta = eps_delta;
        o.thresholds.ambiguity = ambiguity;
        return o;
    }

    void validate() const {
        for (double t : {eps_c, eps_delta, bracket_tol, residual_tol, fit_tol})
            if (!(t > 0.0)) throw std::invalid_argument("tolerances must be positive");
        if (!(ambiguity >= 1.0)) throw std::invalid_argument("ambiguity factor must be at least 1");
    }
};

class CheckFailed : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

json margins_json(const StaeckelType& t) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"cubic_zero", num(t.margins.cubic_zero)}, {"discriminant", num(t.margins.discriminant)},
            {"hessian", num(t.margins.hessian)},       {"quadratic", num(t.margins.quadratic)},
            {"cross", num(t.margins.cross)},           {"min", num(t.min_margin())}};
}

json report_json(const ClassificationReport& rep) {
    json cand = json::array();
    for (auto c : rep.type.candidates) cand.push_back(to_string(c));
    json coeff = json::array();
    for (const auto& m : cubic_monomials()) coeff.push_back({{"H", m.h}, {"I1", m.i1}, {"I2", m.i2}, {"c", rep.model(m.h, m.i1, m.i2)}});
    return {{"label", to_string(rep.type.label)},
            {"candidates", cand},
            {"margins", margins_json(rep.type)},
            {"cubic_pattern", to_string(rep.type.cubic.pattern)},
            {"note", rep.type.note},
            {"fit_rms", rep.model.residual_rms},
            {"check_rms", rep.out_of_sample_rms},
            {"fit_condition", rep.model.condition},
            {"max_bracket", rep.max_bracket},
            {"seed", rep.seed},
            {"model", coeff}};
}

// ---------------------------------------------------------------------------
// verify

struct Check {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    bool pass() const { return value < tol; }
};

double max_over(const std::vector<Expr>& es, const std::vector<Point2>& pts, const Bindings& params) {
    Program prog(es);
    std::vector<double> scratch, out(es.size());
    double m = 0.0;
    for (const auto& p : pts) {
        Bindings b = params;
        b.set_point(p.x, p.y);
        prog.run(b, scratch, out);
        for (double v : out) m = std::max(m, std::isnan(v) ? INFINITY : std::fabs(v));
    }
    return m;
}

std::vector<Check> verify_system(const CatalogEntry& e, const RunConfig& cfg) {
    const Bindings params = e.bindings();
    const auto pts = sample_points(e.domain(), cfg.points, cfg.seed, params);
    // residuals are measured against the roundoff amplification of g^{-1}
    const Expr kappa = conditioning(e.metric);
    std::vector<Check> out;

    const WeightedTensor b = e.beta ? *e.beta : beta_of_metric(e.metric);
    std::vector<Expr> met;
    for (const auto& r : metrizability_residuals(b, projective_connection(e.metric))) met.push_back(r / kappa);
    out.push_back({"metrizability", max_over(met, pts, params), cfg.residual_tol});

    std::vector<Expr> bd;
    for (const auto& k : e.integrals) bd.push_back(bertrand_darboux_residual_up(e.metric, k.K, e.V) / kappa);
    out.push_back({"bertrand-darboux", bd.empty() ? 0.0 : max_over(bd, pts, params), cfg.residual_tol});

    // |{H,I}| / (1 + |H||I|); the scalar part of I enters only when known
    const PhaseFunction h = e.hamiltonian();
    const auto phase = attach_momenta(pts, cfg.seed);
    double br = 0.0;
    for (std::size_t i = 0; i < e.integrals.size(); ++i) {
        const PhaseFunction in = e.integral(i);
        const Expr ival = in.W ? in.expr() : in.momentum_part();
        const Program prog(std::vector<Expr>{h.expr(), ival, poisson(h, in), kappa});
        std::vector<double> scratch, o(4);
        for (const auto& p : phase) {
            prog.run(p.bindings(params), scratch, o);
            const double v = std::fabs(o[2]) / ((1.0 + std::fabs(o[0] * o[1])) * o[3]);
            br = std::max(br, std::isnan(v) ? INFINITY : v);
        }
    }
    out.push_back({"bracket", br, cfg.bracket_tol});

    if (e.integrals.size() >= 2) {
        const PhaseFunction i1 = e.integral(0), i2 = e.integral(1);
        int rank = 3;
        for (std::size_t k = 0; k < std::min<std::size_t>(20, phase.size()); ++k)
            rank = std::min(rank, functional_independence(h, i1, i2, phase[k], params));
        // reported as the rank deficit
        out.push_back({"independence", static_cast<double>(3 - rank), 0.5});
    }
    return out;
}

int cmd_verify(const std::string& system, bool as_json, const RunConfig& cfg) {
    const CatalogEntry e = catalog::resolve(system);
    const auto checks = verify_system(e, cfg);
    const Check* first_fail = nullptr;
    json jc = json::array();
    for (const auto& c : checks) {
        if (!c.pass() && !first_fail) first_fail = &c;
        jc.push_back({{"check", c.name}, {"max", std::isfinite(c.value) ? json(c.value) : json(nullptr)}, {"tol", c.tol}, {"pass", c.pass()}});
    }
    if (as_json) {
        json j{{"system", e.name}, {"seed", cfg.seed}, {"points", cfg.points}, {"checks", jc}, {"pass", first_fail == nullptr}};
        if (first_fail) j["first_failure"] = first_fail->name;
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "system " << e.name << " (seed " << cfg.seed << ", " << cfg.points << " points)\n";
        for (const auto& c : checks)
            std::cout << "  " << c.name << ": max " << scan::format_double(c.value) << " tol " << c.tol << (c.pass() ? " ok" : " FAILED")
                      << '\n';
        std::cout << (first_fail ? "FAIL at " + first_fail->name : std::string("PASS")) << '\n';
    }
    return first_fail ? 1 : 0;
}

// ---------------------------------------------------------------------------
// classify

int cmd_classify(const std::optional<double>& theta, const std::optional<double>& phi, const std::string& system,
                 const std::vector<double>& c, const RunConfig& cfg) {
    CatalogEntry e;
    json j;
    if (!system.empty()) {
        e = catalog::resolve(system);
        j["system"] = e.name;
    } else {
        if (!theta || !phi) throw std::invalid_argument("classify needs --theta and --phi, or --system");
        e = catalog::sphere_system(*theta, *phi);
        j["theta"] = *theta;
        j["phi"] = *phi;
    }
    if (e.integrals.size() < 2) throw std::invalid_argument("system '" + e.name + "' lists fewer than two integrals");
    if (!c.empty()) {
        if (c.size() != 4) throw std::invalid_argument("--c takes four values c1,c2,c3,c4");
        for (int k = 0; k < 4; ++k) e.set_parameter("c" + std::to_string(k + 1), c[static_cast<std::size_t>(k)]);
    }
    const TripleEvaluator ev(e.hamiltonian(), e.integral(0), e.integral(1), e.basepoint);
    const auto rep = classify_triple(ev, e.domain(), e.bindings(), cfg.classify_options());
    j.update(report_json(rep));
    const auto opt = cfg.classify_options();
    j["options"] = {{"samples", opt.samples},
                    {"check_samples", opt.check_samples},
                    {"eps_c", opt.thresholds.eps_c},
                    {"eps_delta", opt.thresholds.eps_delta},
                    {"eps_hess", opt.thresholds.eps_hess},
                    {"ambiguity", opt.thresholds.ambiguity}};
    j["fit_ok"] = rep.model.residual_rms < cfg.fit_tol && rep.out_of_sample_rms < 10 * cfg.fit_tol;
    std::cout << j.dump(2) << '\n';
    return rep.type.label == StaeckelLabel::Unclassifiable ? 1 : 0;
}

// ---------------------------------------------------------------------------
// scan-sphere

scan::SphereGrid parse_grid(const std::string& s) {
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) throw std::invalid_argument("grid must be NthetaxNphi, e.g. 64x32");
    scan::SphereGrid g;
    try {
        g.n_theta = std::stoi(s.substr(0, x));
        g.n_phi = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("grid must be NthetaxNphi, e.g. 64x32");
    }
    if (g.n_theta < 8 || g.n_phi < 8) throw std::invalid_argument("grid must be at least 8x8");
    return g;
}

int cmd_scan(const std::string& grid_text, const std::string& out_path, const RunConfig& cfg) {
    const scan::SphereGrid grid = parse_grid(grid_text);
    const auto t0 = std::chrono::steady_clock::now();
    const auto cells = scan::scan_sphere(grid, cfg.classify_options(), cfg.threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write '" + out_path + "'");
    }
    std::ostream& os = out_path.empty() ? std::cout : file;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    os << "# projsuper scan-sphere grid=" << grid.n_theta << 'x' << grid.n_phi << " seed=" << cfg.seed << " samples=" << cfg.samples
       << " check_samples=" << cfg.check_samples << " eps_c=" << scan::format_double(cfg.eps_c)
       << " eps_delta=" << scan::format_double(cfg.eps_delta) << " ambiguity=" << scan::format_double(cfg.ambiguity) << '\n';
    os << "# generated " << stamp << '\n';
    os << scan::csv_header() << '\n';
    std::map<std::string, int> counts;
    for (const auto& r : cells) {
        scan::write_csv_row(os, r);
        ++counts[r.excluded ? "excluded" : to_string(r.type.label)];
    }
    std::cerr << "scanned " << cells.size() << " cells in " << secs << " s:";
    for (const auto& [k, v] : counts) std::cerr << ' ' << k << '=' << v;
    std::cerr << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// transport

int cmd_transport(const std::string& from_name, const std::string& to_name, int grid_n, const RunConfig& cfg) {
    const CatalogEntry from = catalog::resolve(from_name);
    const CatalogEntry to = catalog::resolve(to_name);
    Bindings params = to.bindings();
    for (const auto& [n, v] : from.parameters) params.set(n, v);
    const auto pts = sample_points(to.domain(), cfg.points, cfg.seed, params);
    const auto cls = same_projective_class(from.metric, to.metric, pts, 1e-9, params);
    if (!cls.same)
        throw CheckFailed("'" + from.name + "' and '" + to.name + "' are not projectively equivalent (max deviation " +
                          scan::format_double(cls.max_deviation) + ")");

    const ProjectivePotential U = projective_potential(from.metric, from.V);
    const WeightedTensor b = to.beta ? *to.beta : beta_of_metric(to.metric);
    const OneForm dv = transport_potential_oneform(b, U);
    const auto closed = check_closed(dv, pts, 1e-9, params);
    if (!closed.closed) throw CheckFailed("transported differential is not closed; the potential does not transport");

    const ScalarPotential vt(dv, to.basepoint, params);
    // grid over the working window, skipping points outside its guards
    const Domain& d = to.domain();
    json grid = json::array();
    std::vector<double> a, t;
    std::vector<Expr> target{to.V};
    Program tp(target);
    std::vector<double> scratch, o(1);
    for (int i = 0; i < grid_n; ++i)
        for (int k = 0; k < grid_n; ++k) {
            const double x = d.x_min + (d.x_max - d.x_min) * (i + 0.5) / grid_n;
            const double y = d.y_min + (d.y_max - d.y_min) * (k + 0.5) / grid_n;
            if (!d.contains(x, y, params)) continue;
            double v;
            try {
                v = vt(Point2{x, y});
            } catch (const DomainError&) {
                continue;
            }
            Bindings at = params;
            at.set_point(x, y);
            tp.run(at, scratch, o);
            a.push_back(v);
            t.push_back(o[0]);
            grid.push_back({x, y, v});
        }
    // compare with the target's own potential up to a factor and a constant
    json cmp;
    if (a.size() >= 2) {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(a.size()), 2);
        Eigen::VectorXd y(static_cast<Eigen::Index>(a.size()));
        for (std::size_t k = 0; k < a.size(); ++k) {
            A(static_cast<Eigen::Index>(k), 0) = a[k];
            A(static_cast<Eigen::Index>(k), 1) = 1.0;
            y(static_cast<Eigen::Index>(k)) = t[k];
        }
        const Eigen::Vector2d f = A.colPivHouseholderQr().solve(y);
        double dev = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) dev = std::max(dev, std::fabs(f(0) * a[k] + f(1) - t[k]) / (1.0 + std::fabs(t[k])));
        cmp = {{"factor", f(0)}, {"constant", f(1)}, {"max_deviation", dev}};
    }
    json j{{"from", from.name},
           {"to", to.name},
           {"seed", cfg.seed},
           {"class_deviation", cls.max_deviation},
           {"metric", {{"g11", to_string(to.metric.g.a11)}, {"g12", to_string(to.metric.g.a12)}, {"g22", to_string(to.metric.g.a22)}}},
           {"dV", {to_string(dv.w1), to_string(dv.w2)}},
           {"basepoint", {to.basepoint.x, to.basepoint.y}},
           {"parameters", json::object()},
           {"grid", grid},
           {"against_target", cmp}};
    for (const auto& [n, v] : params.params()) j["parameters"][n] = v;
    std::cout << j.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// catalog

int cmd_catalog_list(bool as_json) {
    json j = json::array();
    for (const auto& n : catalog::names()) {
        const CatalogEntry e = catalog::load(n);
        if (as_json)
            j.push_back({{"name", n}, {"summary", e.summary}, {"integrals", e.integrals.size()},
                         {"expected_type", e.expected_type ? json(*e.expected_type) : json(nullptr)}});
        else
            std::cout << n << "  " << e.summary << '\n';
    }
    if (as_json) std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_catalog_export(const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& n : catalog::names()) {
        const std::string path = (std::filesystem::path(dir) / (n + ".json")).string();
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write '" + path + "'");
        f << catalog::to_json(catalog::load(n)).dump(2) << '\n';
    }
    std::cout << "wrote " << catalog::names().size() << " systems to " << dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"projsuper: projectively equivalent superintegrable systems in two dimensions"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "flat key=value file; command-line flags take precedence");

    RunConfig cfg;
    app.add_option("--seed", cfg.seed, "RNG seed, recorded in every output")->envname("PROJSUPER_SEED")->capture_default_str();
    app.add_option("--samples", cfg.samples, "phase points for the R^2 fit")->capture_default_str();
    app.add_option("--check-samples", cfg.check_samples, "fresh phase points for the out-of-sample residual")->capture_default_str();
    app.add_option("--points", cfg.points, "sample points for verify and transport")->capture_default_str();
    app.add_option("--eps-c", cfg.eps_c, "relative coefficient zero threshold")->capture_default_str();
    app.add_option("--eps-delta", cfg.eps_delta, "normalized discriminant zero threshold")->capture_default_str();
    app.add_option("--ambiguity", cfg.ambiguity, "margin factor below which a decision is reported as ambiguous")
        ->capture_default_str();
    app.add_option("--bracket-tol", cfg.bracket_tol, "tolerance for |{H,I}|/(1+|H||I|)")->capture_default_str();
    app.add_option("--residual-tol", cfg.residual_tol, "tolerance for metrizability and Bertrand-Darboux residuals")
        ->capture_default_str();
    app.add_option("--fit-tol", cfg.fit_tol, "tolerance for the relative R^2 fit residual")->capture_default_str();
    app.add_option("--threads", cfg.threads, "worker threads for scan-sphere (0: hardware)")->capture_default_str();

    std::string system;
    bool json_out = false;
    auto* verify = app.add_subcommand("verify", "run metrizability, Bertrand-Darboux, bracket and independence checks");
    verify->add_option("system", system, "catalog name or path to a JSON system")->required();
    verify->add_flag("--json", json_out, "print a JSON report");

    std::optional<double> theta, phi;
    std::string csystem;
    std::vector<double> cvals;
    auto* classify = app.add_subcommand("classify", "Staeckel type at a point of the sphere, or of a catalog system");
    classify->add_option("--theta", theta, "latitude on the sphere");
    classify->add_option("--phi", phi, "longitude on the sphere");
    classify->add_option("--system", csystem, "classify a catalog system instead");
    classify->add_option("--c", cvals, "potential parameters c1,c2,c3,c4")->delimiter(',');

    std::string grid_text = "64x32", out_path;
    auto* scan_cmd = app.add_subcommand("scan-sphere", "classify every cell of a theta x phi grid and write CSV");
    scan_cmd->add_option("--grid", grid_text, "NthetaxNphi")->capture_default_str();
    scan_cmd->add_option("--out", out_path, "CSV path (default: stdout)");

    std::string from_name, to_name;
    int tgrid = 8;
    auto* transport = app.add_subcommand("transport", "transport a potential to a projectively equivalent metric");
    transport->add_option("--from", from_name, "source system")->required();
    transport->add_option("--to", to_name, "target system")->required();
    transport->add_option("--grid", tgrid, "grid points per axis for the potential values")->capture_default_str();

    bool list_json = false;
    auto* list = app.add_subcommand("catalog-list", "list the built-in systems");
    list->add_flag("--json", list_json, "print JSON");

    std::string export_dir;
    auto* exp = app.add_subcommand("catalog-export", "write every built-in system as JSON");
    exp->add_option("dir", export_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        cfg.validate();
        if (*verify) return cmd_verify(system, json_out, cfg);
        if (*classify) return cmd_classify(theta, phi, csystem, cvals, cfg);
        if (*scan_cmd) return cmd_scan(grid_text, out_path, cfg);
        if (*transport) return cmd_transport(from_name, to_name, tgrid, cfg);
        if (*list) return cmd_catalog_list(list_json);
        if (*exp) return cmd_catalog_export(export_dir);
    } catch (const CheckFailed& e) {
        std::cerr << "FAIL: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
