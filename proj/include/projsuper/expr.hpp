#pragma once

// Immutable expression trees over the phase-space variables x, y, p1, p2 and
// named parameters. Nodes are shared (DAG); an Expr is a cheap handle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace projsuper {

enum class Var : std::uint8_t { X = 0, Y = 1, P1 = 2, P2 = 3 };

enum class Kind : std::uint8_t {
    Const,
    Param,
    Variable,
    Add,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
};

inline constexpr std::string_view var_name(Var v) {
    constexpr std::array<std::string_view, 4> names{"x", "y", "p1", "p2"};
    return names[static_cast<std::size_t>(v)];
}

// ---------------------------------------------------------------------------
// Errors

class ExprError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public ExprError {
  public:
    ParseError(const std::string& msg, std::size_t offset)
        : ExprError(msg + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

class UnknownIdentifierError : public ParseError {
  public:
    UnknownIdentifierError(std::string ident, std::size_t offset, std::vector<std::string> permitted)
        : ParseError(make_message(ident, permitted), offset),
          identifier_(std::move(ident)),
          permitted_(std::move(permitted)) {}
    const std::string& identifier() const noexcept { return identifier_; }
    const std::vector<std::string>& permitted() const noexcept { return permitted_; }

  private:
    static std::string make_message(const std::string& ident, const std::vector<std::string>& permitted) {
        std::string msg = "unknown identifier '" + ident + "' (permitted:";
        for (const auto& p : permitted) msg += " " + p;
        return msg + ")";
    }
    std::string identifier_;
    std::vector<std::string> permitted_;
};

class UnboundSymbolError : public ExprError {
  public:
    explicit UnboundSymbolError(std::string symbol)
        : ExprError("unbound symbol '" + symbol + "'"), symbol_(std::move(symbol)) {}
    const std::string& symbol() const noexcept { return symbol_; }

  private:
    std::string symbol_;
};

class DomainError : public ExprError {
  public:
    DomainError(const std::string& what, std::string subterm)
        : ExprError(what + " in subterm " + subterm), subterm_(std::move(subterm)) {}
    const std::string& subterm() const noexcept { return subterm_; }

  private:
    std::string subterm_;
};

// ---------------------------------------------------------------------------
// Expr handle

class Expr;

struct Node {
    Kind kind = Kind::Const;
    double value = 0.0;
    Var var = Var::X;
    std::string name;
    std::vector<Expr> args;
};

class Expr {
  public:
    Expr() : Expr(0.0) {}
    Expr(double v);  // NOLINT(google-explicit-constructor): numeric literals read naturally in formulas
    Expr(int v) : Expr(static_cast<double>(v)) {}  // NOLINT(google-explicit-constructor)

    static Expr constant(double v) { return Expr(v); }
    static Expr param(std::string name);
    static Expr variable(Var v);
    static Expr make(Kind k, std::vector<Expr> args);

    Kind kind() const noexcept { return node_->kind; }
    double value() const noexcept { return node_->value; }
    Var var() const noexcept { return node_->var; }
    const std::string& name() const noexcept { return node_->name; }
    std::span<const Expr> args() const noexcept { return node_->args; }
    const Expr& arg(std::size_t i) const { return node_->args.at(i); }
    const Node* id() const noexcept { return node_.get(); }

    bool is_const() const noexcept { return kind() == Kind::Const; }
    bool is_const(double v) const noexcept { return is_const() && value() == v; }
    bool is_zero() const noexcept { return is_const(0.0); }
    bool is_one() const noexcept { return is_const(1.0); }

  private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

inline Expr::Expr(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Const;
    n->value = v;
    node_ = std::move(n);
}

inline Expr Expr::param(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Param;
    n->name = std::move(name);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Expr Expr::variable(Var v) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Variable;
    n->var = v;
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Expr Expr::make(Kind k, std::vector<Expr> args) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->args = std::move(args);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

namespace vars {
inline const Expr& x() {
    static const Expr e = Expr::variable(Var::X);
    return e;
}
inline const Expr& y() {
    static const Expr e = Expr::variable(Var::Y);
    return e;
}
inline const Expr& p1() {
    static const Expr e = Expr::variable(Var::P1);
    return e;
}
inline const Expr& p2() {
    static const Expr e = Expr::variable(Var::P2);
    return e;
}
inline const Expr& of(Var v) {
    switch (v) {
        case Var::X: return x();
        case Var::Y: return y();
        case Var::P1: return p1();
        case Var::P2: return p2();
    }
    return x();
}
}  // namespace vars

// ---------------------------------------------------------------------------
// Construction with light folding. Sums and products are kept flat.

namespace detail {

inline bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

inline void append_flat(std::vector<Expr>& out, const Expr& e, Kind k) {
    if (e.kind() == k) {
        for (const auto& a : e.args()) out.push_back(a);
    } else {
        out.push_back(e);
    }
}

}  // namespace detail

inline Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.is_const() && b.is_const()) return Expr(a.value() + b.value());
    std::vector<Expr> terms;
    detail::append_flat(terms, a, Kind::Add);
    detail::append_flat(terms, b, Kind::Add);
    return Expr::make(Kind::Add, std::move(terms));
}

inline Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return Expr(0.0);
    if (a.is_one()) return b;
    if (b.is_one()) return a;
    if (a.is_const() && b.is_const()) return Expr(a.value() * b.value());
    std::vector<Expr> factors;
    detail::append_flat(factors, a, Kind::Mul);
    detail::append_flat(factors, b, Kind::Mul);
    // keep a single leading numeric coefficient
    double coeff = 1.0;
    std::vector<Expr> rest;
    rest.reserve(factors.size());
    for (auto& f : factors) {
        if (f.is_const())
            coeff *= f.value();
        else
            rest.push_back(std::move(f));
    }
    if (coeff == 0.0) return Expr(0.0);
    if (rest.empty()) return Expr(coeff);
    if (coeff != 1.0) rest.insert(rest.begin(), Expr(coeff));
    if (rest.size() == 1) return rest.front();
    return Expr::make(Kind::Mul, std::move(rest));
}

inline Expr operator-(const Expr& a) {
    if (a.is_const()) return Expr(-a.value());
    return Expr(-1.0) * a;
}

inline Expr operator-(const Expr& a, const Expr& b) {
    if (b.is_zero()) return a;
    return a + (-b);
}

inline Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_zero()) return Expr(0.0);
    if (b.is_one()) return a;
    if (a.is_const() && b.is_const() && b.value() != 0.0) return Expr(a.value() / b.value());
    return Expr::make(Kind::Div, {a, b});
}

inline Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
inline Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }
inline Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }
inline Expr& operator/=(Expr& a, const Expr& b) { return a = a / b; }

inline Expr pow(const Expr& base, const Expr& exponent) {
    if (exponent.is_zero()) return Expr(1.0);
    if (exponent.is_one()) return base;
    if (base.is_const() && exponent.is_const()) {
        const double b = base.value();
        const double e = exponent.value();
        if (b > 0.0 || (b != 0.0 && detail::is_integer(e)) || (b == 0.0 && e > 0.0)) return Expr(std::pow(b, e));
    }
    return Expr::make(Kind::Pow, {base, exponent});
}

inline Expr pow(const Expr& base, double exponent) { return pow(base, Expr(exponent)); }

namespace detail {
inline Expr unary(Kind k, const Expr& a, double (*fn)(double)) {
    if (a.is_const()) {
        const double v = fn(a.value());
        if (std::isfinite(v)) return Expr(v);
    }
    return Expr::make(k, {a});
}
}  // namespace detail

inline Expr sin(const Expr& a) { return detail::unary(Kind::Sin, a, [](double v) { return std::sin(v); }); }
inline Expr cos(const Expr& a) { return detail::unary(Kind::Cos, a, [](double v) { return std::cos(v); }); }
inline Expr tan(const Expr& a) { return detail::unary(Kind::Tan, a, [](double v) { return std::tan(v); }); }
inline Expr exp(const Expr& a) { return detail::unary(Kind::Exp, a, [](double v) { return std::exp(v); }); }
inline Expr log(const Expr& a) {
    if (a.is_const() && a.value() > 0.0) return Expr(std::log(a.value()));
    return Expr::make(Kind::Log, {a});
}
inline Expr abs(const Expr& a) {
    if (a.is_const()) return Expr(std::fabs(a.value()));
    if (a.kind() == Kind::Abs) return a;
    return Expr::make(Kind::Abs, {a});
}
inline Expr sqrt(const Expr& a) { return pow(a, 0.5); }

// ---------------------------------------------------------------------------
// Queries

inline bool depends_on(const Expr& e, Var v) {
    switch (e.kind()) {
        case Kind::Const:
        case Kind::Param: return false;
        case Kind::Variable: return e.var() == v;
        default:
            for (const auto& a : e.args())
                if (depends_on(a, v)) return true;
            return false;
    }
}

inline bool depends_on_param(const Expr& e, std::string_view name) {
    if (e.kind() == Kind::Param) return e.name() == name;
    for (const auto& a : e.args())
        if (depends_on_param(a, name)) return true;
    return false;
}

inline void collect_params(const Expr& e, std::vector<std::string>& out) {
    if (e.kind() == Kind::Param) {
        if (std::find(out.begin(), out.end(), e.name()) == out.end()) out.push_back(e.name());
        return;
    }
    for (const auto& a : e.args()) collect_params(a, out);
}

// Structural equality (not semantic).
inline bool same(const Expr& a, const Expr& b) {
    if (a.id() == b.id()) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case Kind::Const: return a.value() == b.value();
        case Kind::Param: return a.name() == b.name();
        case Kind::Variable: return a.var() == b.var();
        default:
            if (a.args().size() != b.args().size()) return false;
            for (std::size_t i = 0; i < a.args().size(); ++i)
                if (!same(a.args()[i], b.args()[i])) return false;
            return true;
    }
}

// Structural total order: negative, zero or positive.
inline int compare(const Expr& a, const Expr& b) {
    if (a.id() == b.id()) return 0;
    if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
    switch (a.kind()) {
        case Kind::Const: return a.value() < b.value() ? -1 : (b.value() < a.value() ? 1 : 0);
        case Kind::Param: return a.name().compare(b.name());
        case Kind::Variable: return a.var() < b.var() ? -1 : (b.var() < a.var() ? 1 : 0);
        default: {
            const auto& x = a.args();
            const auto& y = b.args();
            for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
                if (int c = compare(x[i], y[i])) return c;
            return x.size() < y.size() ? -1 : (y.size() < x.size() ? 1 : 0);
        }
    }
}

inline std::size_t node_count(const Expr& e) {
    std::size_t n = 1;
    for (const auto& a : e.args()) n += node_count(a);
    return n;
}

// ---------------------------------------------------------------------------
// Printing. Output is accepted by parse(); round trip is semantic.

namespace detail {

inline std::string format_number(double v) {
    if (detail::is_integer(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// precedence: 1 sum, 2 product/quotient, 3 unary minus, 4 power, 5 atom
inline int precedence(const Expr& e) {
    switch (e.kind()) {
        case Kind::Add: return 1;
        case Kind::Mul:
        case Kind::Div: return 2;
        case Kind::Pow: return 4;
        case Kind::Const: return e.value() < 0.0 ? 3 : 5;
        default: return 5;
    }
}

inline void print_to(std::string& out, const Expr& e);

inline void print_wrapped(std::string& out, const Expr& e, int min_prec) {
    if (precedence(e) < min_prec) {
        out += '(';
        print_to(out, e);
        out += ')';
    } else {
        print_to(out, e);
    }
}

inline void print_to(std::string& out, const Expr& e) {
    switch (e.kind()) {
        case Kind::Const: out += format_number(e.value()); return;
        case Kind::Param: out += e.name(); return;
        case Kind::Variable: out += var_name(e.var()); return;
        case Kind::Add: {
            bool first = true;
            for (const auto& t : e.args()) {
                if (!first) out += " + ";
                print_wrapped(out, t, 2);
                first = false;
            }
            return;
        }
        case Kind::Mul: {
            bool first = true;
            for (const auto& f : e.args()) {
                if (!first) out += "*";
                print_wrapped(out, f, first ? 3 : 4);
                first = false;
            }
            return;
        }
        case Kind::Div:
            print_wrapped(out, e.arg(0), 2);
            out += "/";
            print_wrapped(out, e.arg(1), 4);
            return;
        case Kind::Pow:
            print_wrapped(out, e.arg(0), 5);
            out += "^";
            print_wrapped(out, e.arg(1), 5);
            return;
        case Kind::Sin: out += "sin("; break;
        case Kind::Cos: out += "cos("; break;
        case Kind::Tan: out += "tan("; break;
        case Kind::Exp: out += "exp("; break;
        case Kind::Log: out += "ln("; break;
        case Kind::Abs: out += "abs("; break;
    }
    print_to(out, e.arg(0));
    out += ')';
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print_to(out, e);
    return out;
}

// ---------------------------------------------------------------------------
// Bindings and evaluation

class Bindings {
  public:
    Bindings() = default;
    Bindings(double x, double y) { set(Var::X, x).set(Var::Y, y); }
    Bindings(double x, double y, double p1, double p2) { set(Var::X, x).set(Var::Y, y).set(Var::P1, p1).set(Var::P2, p2); }

    Bindings& set(Var v, double value) {
        vars_[static_cast<std::size_t>(v)] = value;
        bound_ |= 1u << static_cast<unsigned>(v);
        return *this;
    }
    Bindings& set(std::string_view name, double value) {
        for (auto& [n, val] : params_)
            if (n == name) {
                val = value;
                return *this;
            }
        params_.emplace_back(std::string(name), value);
        return *this;
    }
    Bindings& set_point(double x, double y) { return set(Var::X, x).set(Var::Y, y); }

    double get(Var v) const {
        if (!(bound_ & (1u << static_cast<unsigned>(v)))) throw UnboundSymbolError(std::string(var_name(v)));
        return vars_[static_cast<std::size_t>(v)];
    }
    double get(const std::string& name) const {
        for (const auto& [n, val] : params_)
            if (n == name) return val;
        throw UnboundSymbolError(name);
    }
    bool has(std::string_view name) const {
        return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.first == name; });
    }
    const std::vector<std::pair<std::string, double>>& params() const noexcept { return params_; }

  private:
    std::array<double, 4> vars_{};
    unsigned bound_ = 0;
    std::vector<std::pair<std::string, double>> params_;
};

namespace detail {

inline std::string subterm_text(const Expr& e) {
    std::string s = to_string(e);
    if (s.size() > 160) s = s.substr(0, 157) + "...";
    return s;
}

inline double checked_pow(double b, double ex, const Expr& node) {
    if (b < 0.0 && !is_integer(ex)) throw DomainError("real power of negative base", subterm_text(node));
    if (b == 0.0 && ex < 0.0) throw DomainError("division by zero", subterm_text(node));
    if (ex == 2.0) return b * b;
    if (ex == 1.0) return b;
    return std::pow(b, ex);
}

inline double checked_div(double a, double b, const Expr& node) {
    if (b == 0.0) throw DomainError("division by zero", subterm_text(node));
    return a / b;
}

inline double checked_log(double a, const Expr& node) {
    if (!(a > 0.0)) throw DomainError("logarithm of non-positive value", subterm_text(node));
    return std::log(a);
}

}  // namespace detail

inline double eval(const Expr& e, const Bindings& b) {
    switch (e.kind()) {
        case Kind::Const: return e.value();
        case Kind::Param: return b.get(e.name());
        case Kind::Variable: return b.get(e.var());
        case Kind::Add: {
            double s = 0.0;
            for (const auto& a : e.args()) s += eval(a, b);
            return s;
        }
        case Kind::Mul: {
            double p = 1.0;
            for (const auto& a : e.args()) p *= eval(a, b);
            return p;
        }
        case Kind::Div: return detail::checked_div(eval(e.arg(0), b), eval(e.arg(1), b), e);
        case Kind::Pow: return detail::checked_pow(eval(e.arg(0), b), eval(e.arg(1), b), e);
        case Kind::Sin: return std::sin(eval(e.arg(0), b));
        case Kind::Cos: return std::cos(eval(e.arg(0), b));
        case Kind::Tan: return std::tan(eval(e.arg(0), b));
        case Kind::Exp: return std::exp(eval(e.arg(0), b));
        case Kind::Log: return detail::checked_log(eval(e.arg(0), b), e);
        case Kind::Abs: return std::fabs(eval(e.arg(0), b));
    }
    return 0.0;
}

// Flattened evaluator: each distinct node of the DAG is evaluated once per call.
// Use for large derived expressions evaluated at many points.
class Program {
  public:
    Program() = default;
    explicit Program(std::span<const Expr> roots) {
        std::unordered_map<const Node*, std::uint32_t> index;
        for (const auto& r : roots) outputs_.push_back(emit(r, index));
    }
    explicit Program(const std::vector<Expr>& roots) : Program(std::span<const Expr>(roots)) {}

    std::size_t size() const noexcept { return ops_.size(); }
    std::size_t outputs() const noexcept { return outputs_.size(); }

    void run(const Bindings& b, std::vector<double>& scratch, std::span<double> out) const {
        scratch.resize(ops_.size());
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            const Op& op = ops_[i];
            double v = 0.0;
            switch (op.kind) {
                case Kind::Const: v = op.value; break;
                case Kind::Param: v = b.get(op.node.name()); break;
                case Kind::Variable: v = b.get(op.node.var()); break;
                case Kind::Add:
                    for (auto a : op.args) v += scratch[a];
                    break;
                case Kind::Mul:
                    v = 1.0;
                    for (auto a : op.args) v *= scratch[a];
                    break;
                case Kind::Div: v = detail::checked_div(scratch[op.args[0]], scratch[op.args[1]], op.node); break;
                case Kind::Pow: v = detail::checked_pow(scratch[op.args[0]], scratch[op.args[1]], op.node); break;
                case Kind::Sin: v = std::sin(scratch[op.args[0]]); break;
                case Kind::Cos: v = std::cos(scratch[op.args[0]]); break;
                case Kind::Tan: v = std::tan(scratch[op.args[0]]); break;
                case Kind::Exp: v = std::exp(scratch[op.args[0]]); break;
                case Kind::Log: v = detail::checked_log(scratch[op.args[0]], op.node); break;
                case Kind::Abs: v = std::fabs(scratch[op.args[0]]); break;
            }
            scratch[i] = v;
        }
        for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = scratch[outputs_[k]];
    }

    std::vector<double> run(const Bindings& b) const {
        std::vector<double> scratch;
        std::vector<double> out(outputs_.size());
        run(b, scratch, out);
        return out;
    }

  private:
    struct Op {
        Kind kind;
        double value;
        std::vector<std::uint32_t> args;
        Expr node;
    };

    std::uint32_t emit(const Expr& e, std::unordered_map<const Node*, std::uint32_t>& index) {
        if (auto it = index.find(e.id()); it != index.end()) return it->second;
        std::vector<std::uint32_t> args;
        args.reserve(e.args().size());
        for (const auto& a : e.args()) args.push_back(emit(a, index));
        ops_.push_back(Op{e.kind(), e.value(), std::move(args), e});
        const auto id = static_cast<std::uint32_t>(ops_.size() - 1);
        index.emplace(e.id(), id);
        return id;
    }

    std::vector<Op> ops_;
    std::vector<std::uint32_t> outputs_;
};

// ---------------------------------------------------------------------------
// Differentiation. d|u| = (u/|u|) u', valid off u = 0.

// Memo tables keep their keys alive so node addresses cannot be reused.
using ExprMemo = std::unordered_map<const Node*, std::pair<Expr, Expr>>;

namespace detail {

inline Expr diff_impl(const Expr& e, Var v, ExprMemo& memo) {
    if (!depends_on(e, v)) return Expr(0.0);
    if (auto it = memo.find(e.id()); it != memo.end()) return it->second.second;
    Expr d;
    switch (e.kind()) {
        case Kind::Const:
        case Kind::Param: d = Expr(0.0); break;
        case Kind::Variable: d = Expr(e.var() == v ? 1.0 : 0.0); break;
        case Kind::Add: {
            d = Expr(0.0);
            for (const auto& t : e.args()) d += diff_impl(t, v, memo);
            break;
        }
        case Kind::Mul: {
            d = Expr(0.0);
            const auto f = e.args();
            for (std::size_t i = 0; i < f.size(); ++i) {
                Expr di = diff_impl(f[i], v, memo);
                if (di.is_zero()) continue;
                Expr term = di;
                for (std::size_t j = 0; j < f.size(); ++j)
                    if (j != i) term = term * f[j];
                d += term;
            }
            break;
        }
        case Kind::Div: {
            const Expr& u = e.arg(0);
            const Expr& w = e.arg(1);
            Expr du = diff_impl(u, v, memo);
            Expr dw = diff_impl(w, v, memo);
            if (dw.is_zero())
                d = du / w;
            else
                d = (du * w - u * dw) / pow(w, 2.0);
            break;
        }
        case Kind::Pow: {
            const Expr& base = e.arg(0);
            const Expr& ex = e.arg(1);
            if (!depends_on(ex, v)) {
                Expr db = diff_impl(base, v, memo);
                Expr lowered = ex.is_const() ? pow(base, ex.value() - 1.0) : pow(base, ex - Expr(1.0));
                d = ex * lowered * db;
            } else {
                d = e * (diff_impl(ex, v, memo) * log(base) + ex * diff_impl(base, v, memo) / base);
            }
            break;
        }
        case Kind::Sin: d = cos(e.arg(0)) * diff_impl(e.arg(0), v, memo); break;
        case Kind::Cos: d = -(sin(e.arg(0)) * diff_impl(e.arg(0), v, memo)); break;
        case Kind::Tan: d = (Expr(1.0) + pow(e, 2.0)) * diff_impl(e.arg(0), v, memo); break;
        case Kind::Exp: d = e * diff_impl(e.arg(0), v, memo); break;
        case Kind::Log: d = diff_impl(e.arg(0), v, memo) / e.arg(0); break;
        case Kind::Abs: d = (e.arg(0) / e) * diff_impl(e.arg(0), v, memo); break;
    }
    memo.emplace(e.id(), std::pair{e, d});
    return d;
}

}  // namespace detail

inline Expr diff(const Expr& e, Var v) {
    ExprMemo memo;
    return detail::diff_impl(e, v, memo);
}

// ---------------------------------------------------------------------------
// Substitution of named parameters.

inline Expr substitute(const Expr& e, const std::vector<std::pair<std::string, Expr>>& repl,
                       ExprMemo& memo) {
    if (auto it = memo.find(e.id()); it != memo.end()) return it->second.second;
    Expr r;
    switch (e.kind()) {
        case Kind::Const:
        case Kind::Variable: r = e; break;
        case Kind::Param: {
            r = e;
            for (const auto& [n, val] : repl)
                if (n == e.name()) {
                    r = val;
                    break;
                }
            break;
        }
        case Kind::Add: {
            r = Expr(0.0);
            for (const auto& a : e.args()) r += substitute(a, repl, memo);
            break;
        }
        case Kind::Mul: {
            r = Expr(1.0);
            for (const auto& a : e.args()) r *= substitute(a, repl, memo);
            break;
        }
        case Kind::Div: r = substitute(e.arg(0), repl, memo) / substitute(e.arg(1), repl, memo); break;
        case Kind::Pow: r = pow(substitute(e.arg(0), repl, memo), substitute(e.arg(1), repl, memo)); break;
        case Kind::Sin: r = sin(substitute(e.arg(0), repl, memo)); break;
        case Kind::Cos: r = cos(substitute(e.arg(0), repl, memo)); break;
        case Kind::Tan: r = tan(substitute(e.arg(0), repl, memo)); break;
        case Kind::Exp: r = exp(substitute(e.arg(0), repl, memo)); break;
        case Kind::Log: r = log(substitute(e.arg(0), repl, memo)); break;
        case Kind::Abs: r = abs(substitute(e.arg(0), repl, memo)); break;
    }
    memo.emplace(e.id(), std::pair{e, r});
    return r;
}

inline Expr substitute(const Expr& e, const std::vector<std::pair<std::string, Expr>>& repl) {
    ExprMemo memo;
    return substitute(e, repl, memo);
}

inline Expr substitute(const Expr& e, const std::vector<std::pair<std::string, double>>& values) {
    std::vector<std::pair<std::string, Expr>> repl;
    repl.reserve(values.size());
    for (const auto& [n, v] : values) repl.emplace_back(n, Expr(v));
    return substitute(e, repl);
}

// ---------------------------------------------------------------------------
// Light simplification: constant folding, identity removal, like-term and
// power merging. No canonical form is promised.

namespace detail {

// Split a product term into numeric coefficient and the rest.
inline std::pair<double, Expr> split_coefficient(const Expr& t) {
    if (t.is_const()) return {t.value(), Expr(1.0)};
    if (t.kind() == Kind::Mul && t.arg(0).is_const()) {
        std::vector<Expr> rest(t.args().begin() + 1, t.args().end());
        Expr r = rest.size() == 1 ? rest.front() : Expr::make(Kind::Mul, std::move(rest));
        return {t.arg(0).value(), r};
    }
    return {1.0, t};
}

inline std::pair<Expr, Expr> split_power(const Expr& f) {
    if (f.kind() == Kind::Pow && f.arg(1).is_const()) return {f.arg(0), f.arg(1)};
    return {f, Expr(1.0)};
}

inline Expr simplify_impl(const Expr& e, ExprMemo& memo);

inline Expr simplify_add(const Expr& e, ExprMemo& memo) {
    std::vector<Expr> flat;
    for (const auto& a : e.args()) append_flat(flat, simplify_impl(a, memo), Kind::Add);
    double constant = 0.0;
    std::vector<std::pair<double, Expr>> terms;
    for (const auto& t : flat) {
        if (t.is_const()) {
            constant += t.value();
            continue;
        }
        auto [c, rest] = split_coefficient(t);
        bool merged = false;
        for (auto& [c2, r2] : terms)
            if (same(r2, rest)) {
                c2 += c;
                merged = true;
                break;
            }
        if (!merged) terms.emplace_back(c, rest);
    }
    std::stable_sort(terms.begin(), terms.end(), [](const auto& p, const auto& q) { return compare(p.second, q.second) < 0; });
    Expr out(0.0);
    for (const auto& [c, r] : terms)
        if (c != 0.0) out += Expr(c) * r;
    return out + Expr(constant);
}

inline Expr simplify_mul(const Expr& e, ExprMemo& memo) {
    std::vector<Expr> flat;
    for (const auto& a : e.args()) append_flat(flat, simplify_impl(a, memo), Kind::Mul);
    double coeff = 1.0;
    std::vector<std::pair<Expr, double>> powers;
    std::vector<Expr> others;
    for (const auto& f : flat) {
        if (f.is_const()) {
            coeff *= f.value();
            continue;
        }
        auto [base, ex] = split_power(f);
        bool merged = false;
        for (auto& [b2, e2] : powers)
            if (same(b2, base)) {
                e2 += ex.value();
                merged = true;
                break;
            }
        if (!merged) powers.emplace_back(base, ex.value());
    }
    if (coeff == 0.0) return Expr(0.0);
    std::stable_sort(powers.begin(), powers.end(), [](const auto& p, const auto& q) { return compare(p.first, q.first) < 0; });
    Expr out(coeff);
    for (const auto& [b, ex] : powers) out *= pow(b, ex);
    return out;
}

inline Expr simplify_impl(const Expr& e, ExprMemo& memo) {
    if (auto it = memo.find(e.id()); it != memo.end()) return it->second.second;
    Expr r;
    switch (e.kind()) {
        case Kind::Const:
        case Kind::Param:
        case Kind::Variable: r = e; break;
        case Kind::Add: r = simplify_add(e, memo); break;
        case Kind::Mul: r = simplify_mul(e, memo); break;
        case Kind::Div: {
            Expr n = simplify_impl(e.arg(0), memo);
            Expr d = simplify_impl(e.arg(1), memo);
            if (same(n, d))
                r = Expr(1.0);
            else if (d.is_const() && d.value() != 0.0)
                r = simplify_impl(Expr(1.0 / d.value()) * n, memo);
            else
                r = n / d;
            break;
        }
        case Kind::Pow: {
            Expr b = simplify_impl(e.arg(0), memo);
            Expr ex = simplify_impl(e.arg(1), memo);
            if (b.kind() == Kind::Pow && b.arg(1).is_const() && ex.is_const() && is_integer(ex.value()))
                r = pow(b.arg(0), b.arg(1).value() * ex.value());
            else
                r = pow(b, ex);
            break;
        }
        case Kind::Sin: r = sin(simplify_impl(e.arg(0), memo)); break;
        case Kind::Cos: r = cos(simplify_impl(e.arg(0), memo)); break;
        case Kind::Tan: r = tan(simplify_impl(e.arg(0), memo)); break;
        case Kind::Exp: r = exp(simplify_impl(e.arg(0), memo)); break;
        case Kind::Log: r = log(simplify_impl(e.arg(0), memo)); break;
        case Kind::Abs: r = abs(simplify_impl(e.arg(0), memo)); break;
    }
    memo.emplace(e.id(), std::pair{e, r});
    return r;
}

}  // namespace detail

inline Expr simplify(const Expr& e) {
    ExprMemo memo;
    return detail::simplify_impl(e, memo);
}

}  // namespace projsuper
