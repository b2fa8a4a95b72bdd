#pragma once

// Recursive-descent parser for the expression grammar in docs/grammar.ebnf.

#include <cctype>
#include <cstdlib>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "projsuper/expr.hpp"

namespace projsuper {

struct ParseOptions {
    // Names accepted as parameters. Ignored when any_parameter is set.
    std::vector<std::string> parameters;
    bool any_parameter = false;
};

namespace detail {

class Parser {
  public:
    Parser(std::string_view text, const ParseOptions& opts) : s_(text), opts_(opts) {}

    Expr run() {
        Expr e = sum();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

  private:
    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= s_.size()) fail(std::string("expected '") + c + "' but reached end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    Expr sum() {
        Expr e = product();
        for (;;) {
            if (accept('+'))
                e = e + product();
            else if (accept('-'))
                e = e - product();
            else
                return e;
        }
    }

    Expr product() {
        Expr e = unary();
        for (;;) {
            if (accept('*'))
                e = e * unary();
            else if (accept('/'))
                e = e / unary();
            else
                return e;
        }
    }

    Expr unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    // ^ binds tighter than unary minus and associates to the right; an
    // exponent may itself carry a sign, as in x^-2.
    Expr power() {
        Expr base = primary();
        if (accept('^')) return pow(base, exponent());
        return base;
    }

    Expr exponent() {
        if (accept('-')) return -exponent();
        if (accept('+')) return exponent();
        return power();
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (ident_start(c)) return identifier();
        if (accept('(')) {
            Expr e = sum();
            expect(')');
            return e;
        }
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        const std::string tok(s_.substr(start, pos_ - start));
        if (tok == ".") {
            pos_ = start;
            fail("malformed number");
        }
        if (pos_ < s_.size() && ident_start(s_[pos_])) fail("implicit multiplication is not allowed");
        return Expr(std::strtod(tok.c_str(), nullptr));
    }

    std::vector<std::string> permitted() const {
        std::vector<std::string> names{"x", "y", "p1", "p2", "pi", "sin", "cos", "tan", "exp", "ln", "log", "abs", "sqrt"};
        for (const auto& p : opts_.parameters) names.push_back(p);
        return names;
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        const std::string name(s_.substr(start, pos_ - start));

        using Fn = Expr (*)(const Expr&);
        static const std::vector<std::pair<std::string_view, Fn>> functions{
            {"sin", [](const Expr& a) { return sin(a); }},   {"cos", [](const Expr& a) { return cos(a); }},
            {"tan", [](const Expr& a) { return tan(a); }},   {"exp", [](const Expr& a) { return exp(a); }},
            {"ln", [](const Expr& a) { return log(a); }},    {"log", [](const Expr& a) { return log(a); }},
            {"abs", [](const Expr& a) { return abs(a); }},   {"sqrt", [](const Expr& a) { return sqrt(a); }},
        };
        for (const auto& [fname, fn] : functions) {
            if (fname != name) continue;
            skip_ws();
            if (pos_ >= s_.size() || s_[pos_] != '(') fail("function '" + name + "' requires an argument list");
            ++pos_;
            Expr arg = sum();
            expect(')');
            return fn(arg);
        }
        if (name == "x") return vars::x();
        if (name == "y") return vars::y();
        if (name == "p1") return vars::p1();
        if (name == "p2") return vars::p2();
        if (name == "pi") return Expr(std::numbers::pi);
        if (opts_.any_parameter) return Expr::param(name);
        for (const auto& p : opts_.parameters)
            if (p == name) return Expr::param(name);
        throw UnknownIdentifierError(name, start, permitted());
    }

    std::string_view s_;
    const ParseOptions& opts_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text, const ParseOptions& opts = {}) {
    detail::Parser p(text, opts);
    return p.run();
}

inline Expr parse(std::string_view text, std::vector<std::string> parameters) {
    ParseOptions opts;
    opts.parameters = std::move(parameters);
    return parse(text, opts);
}

}  // namespace projsuper
