#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "projsuper/expr.hpp"
#include "projsuper/geometry.hpp"
#include "projsuper/parse.hpp"

using namespace projsuper;

namespace {

double at(const std::string& text, Bindings b, std::vector<std::string> params = {}) {
    return eval(parse(text, std::move(params)), b);
}

}  // namespace

TEST(Parse, SumOfVariableAndPower) {
    const Expr e = parse("x + y^2");
    ASSERT_EQ(e.kind(), Kind::Add);
    ASSERT_EQ(e.args().size(), 2u);
    EXPECT_EQ(e.arg(0).kind(), Kind::Variable);
    EXPECT_EQ(e.arg(0).var(), Var::X);
    EXPECT_EQ(e.arg(1).kind(), Kind::Pow);
    EXPECT_EQ(e.arg(1).arg(0).var(), Var::Y);
    EXPECT_TRUE(e.arg(1).arg(1).is_const(2.0));
}

TEST(Parse, Arithmetic) {
    EXPECT_DOUBLE_EQ(at("(x+y^2)/2", Bindings(1, 2)), 2.5);
    EXPECT_DOUBLE_EQ(at("abs(x)^(-2/3)", Bindings(-8, 0)), 0.25);
}

TEST(Parse, Precedence) {
    EXPECT_DOUBLE_EQ(at("-x^2", Bindings(3, 0)), -9.0);
    EXPECT_DOUBLE_EQ(at("2^3^2", Bindings()), 512.0);
    EXPECT_DOUBLE_EQ(at("1 - 2 - 3", Bindings()), -4.0);
    EXPECT_DOUBLE_EQ(at("8/2/2", Bindings()), 2.0);
    EXPECT_DOUBLE_EQ(at("2*x^-1", Bindings(4, 0)), 0.5);
    EXPECT_DOUBLE_EQ(at("-2^2", Bindings()), -4.0);
}

TEST(Parse, FunctionsAndConstants) {
    EXPECT_NEAR(at("sin(pi/2) + cos(0) + exp(0) + ln(1) + log(1) + sqrt(4) + tan(0)", Bindings()), 5.0, 1e-15);
    EXPECT_DOUBLE_EQ(at("p1*p2", Bindings(0, 0, 2, 3)), 6.0);
    EXPECT_DOUBLE_EQ(at("1.5e2 + .5", Bindings()), 150.5);
}

TEST(Parse, Parameters) {
    Bindings b(1, 1);
    b.set("c1", 2.0);
    EXPECT_DOUBLE_EQ(at("c1*x", b, {"c1"}), 2.0);
    ParseOptions any;
    any.any_parameter = true;
    EXPECT_DOUBLE_EQ(eval(parse("c1*x", any), b), 2.0);
}

TEST(Parse, SyntaxErrorCarriesOffset) {
    try {
        parse("x + * y");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    EXPECT_THROW(parse("(x + y"), ParseError);
    EXPECT_THROW(parse("x y"), ParseError);
    EXPECT_THROW(parse(""), ParseError);
}

TEST(Parse, ImplicitMultiplicationRejected) {
    try {
        parse("2x");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 1u);
    }
}

TEST(Parse, UnknownIdentifierListsPermittedNames) {
    try {
        parse("x + zeta", std::vector<std::string>{"c1"});
        FAIL() << "expected UnknownIdentifierError";
    } catch (const UnknownIdentifierError& e) {
        EXPECT_EQ(e.identifier(), "zeta");
        EXPECT_EQ(e.offset(), 4u);
        const auto& p = e.permitted();
        EXPECT_NE(std::find(p.begin(), p.end(), "c1"), p.end());
        EXPECT_NE(std::find(p.begin(), p.end(), "sin"), p.end());
        EXPECT_NE(std::find(p.begin(), p.end(), "x"), p.end());
    }
}

TEST(Diff, Basic) {
    const Expr e = parse("x*y^2");
    EXPECT_DOUBLE_EQ(eval(diff(e, Var::Y), Bindings(1.5, 2.0)), 2 * 1.5 * 2.0);
    EXPECT_TRUE(diff(parse("c1", std::vector<std::string>{"c1"}), Var::X).is_zero());
}

TEST(Diff, FractionalPower) {
    const double v = eval(diff(parse("(x+y^2)^(-2/3)"), Var::X), Bindings(1, 1));
    EXPECT_NEAR(v, -(2.0 / 3.0) * std::pow(2.0, -5.0 / 3.0), 1e-15);
    EXPECT_NEAR(v, -0.209986, 1e-6);
}

TEST(Diff, AbsUsesSign) {
    const Expr e = parse("abs(x - 2)");
    EXPECT_DOUBLE_EQ(eval(diff(e, Var::X), Bindings(1, 0)), -1.0);
    EXPECT_DOUBLE_EQ(eval(diff(e, Var::X), Bindings(3, 0)), 1.0);
}

TEST(Eval, Values) {
    EXPECT_DOUBLE_EQ(at("x+y^2", Bindings(1, 2)), 5.0);
    const double K = std::pow(2.0, 2.0 / 3.0) / 108.0;
    // degeneration curve at phi where sin^3/cos^2 is finite
    Bindings b;
    b.set("th", std::atan(K * std::pow(std::sin(1.0), 3) / std::pow(std::cos(1.0), 2))).set("ph", 1.0);
    EXPECT_NEAR(eval(parse("tan(th) - 2^(2/3)/108*sin(ph)^3/cos(ph)^2", std::vector<std::string>{"th", "ph"}), b), 0.0, 1e-15);
}

TEST(Eval, DomainErrors) {
    EXPECT_THROW(eval(parse("x/(x-x)"), Bindings(1, 0)), DomainError);
    EXPECT_THROW(eval(parse("ln(x)"), Bindings(-1, 0)), DomainError);
    EXPECT_THROW(eval(parse("x^(1/3)"), Bindings(-8, 0)), DomainError);
    EXPECT_DOUBLE_EQ(eval(parse("x^3"), Bindings(-2, 0)), -8.0);
    try {
        eval(parse("y + ln(x)"), Bindings(-1, 0));
    } catch (const DomainError& e) {
        EXPECT_NE(e.subterm().find("ln"), std::string::npos);
    }
}

TEST(Eval, UnboundSymbol) {
    EXPECT_THROW(eval(parse("x + y"), Bindings()), UnboundSymbolError);
    EXPECT_THROW(eval(parse("c9", std::vector<std::string>{"c9"}), Bindings(1, 1)), UnboundSymbolError);
}

TEST(Simplify, Identities) {
    const Expr zero_x = Expr::make(Kind::Mul, {Expr(0.0), vars::x()});
    const Expr e = Expr::make(Kind::Add, {zero_x, vars::y()});
    const Expr s = simplify(e);
    EXPECT_EQ(s.kind(), Kind::Variable);
    EXPECT_EQ(s.var(), Var::Y);
    const Expr p = simplify(Expr::make(Kind::Pow, {vars::x(), Expr(1.0)}));
    EXPECT_EQ(p.kind(), Kind::Variable);
    const Expr m = simplify(Expr::make(Kind::Mul, {Expr(2.0), Expr(3.0)}));
    EXPECT_TRUE(m.is_const(6.0));
    EXPECT_TRUE(simplify(vars::x() / vars::x()).is_one());
    EXPECT_TRUE(simplify(vars::x() - vars::x()).is_zero());
}

TEST(Simplify, DivisionByConstantKeepsFactors) {
    const Expr e = parse("(2*y/2)/((x+y^2)/2)");
    EXPECT_DOUBLE_EQ(eval(simplify(e), Bindings(1.3, 0.7)), eval(e, Bindings(1.3, 0.7)));
    EXPECT_DOUBLE_EQ(eval(simplify(parse("2*y/2")), Bindings(0.0, 0.7)), 0.7);
}

TEST(Print, RoundTripIsSemantic) {
    for (const char* text : {"x + y^2", "-(x - y)^3/(2*x)", "abs(x)^(-2/3)*sin(y)", "exp(-x)*ln(y + 3)", "x^-2", "-x^2 + -(-y)",
                             "2^(1/3)*(x + y^2)^(-1/3)", "1e-20*x + 123456789.125"}) {
        const Expr e = parse(text);
        const Expr r = parse(to_string(e));
        for (double xv : {0.7, 1.3, 2.9})
            for (double yv : {0.6, 1.1})
                EXPECT_DOUBLE_EQ(eval(e, Bindings(xv, yv)), eval(r, Bindings(xv, yv))) << text << " -> " << to_string(e);
    }
}

// Random expressions from a small grammar; derivatives checked against
// central differences and printing/simplification against evaluation.
namespace {

Expr random_expr(Rng& rng, int depth) {
    const double u = rng.uniform(0, 1);
    if (depth == 0 || u < 0.2) {
        const double w = rng.uniform(0, 1);
        if (w < 0.35) return vars::x();
        if (w < 0.7) return vars::y();
        return Expr(std::round(rng.uniform(-30, 30)) / 10.0);
    }
    const Expr a = random_expr(rng, depth - 1);
    const Expr b = random_expr(rng, depth - 1);
    const double k = rng.uniform(0, 1);
    if (k < 0.2) return a + b;
    if (k < 0.4) return a * b;
    if (k < 0.5) return a - b;
    if (k < 0.55) return a / (Expr(2.5) + b * b);
    if (k < 0.6) return a / Expr(std::round(rng.uniform(1, 9)));
    if (k < 0.7) return pow(Expr(1.5) + a * a, Expr(std::round(rng.uniform(-6, 6)) / 3.0));
    if (k < 0.78) return sin(a);
    if (k < 0.86) return cos(a);
    if (k < 0.92) return exp(Expr(0.3) * a);
    if (k < 0.96) return log(Expr(1.0) + a * a);
    return abs(a) + Expr(0.5);
}

}  // namespace

TEST(Property, DerivativeMatchesFiniteDifference) {
    Rng rng(20240601);
    int checked = 0;
    for (int n = 0; n < 1000; ++n) {
        const Expr e = random_expr(rng, 4);
        const Var v = rng.uniform(0, 1) < 0.5 ? Var::X : Var::Y;
        const double xv = rng.uniform(0.5, 2.0), yv = rng.uniform(0.5, 2.0);
        const double h = 1e-6;
        Bindings bp(xv, yv), bm(xv, yv);
        if (v == Var::X) {
            bp.set(Var::X, xv + h);
            bm.set(Var::X, xv - h);
        } else {
            bp.set(Var::Y, yv + h);
            bm.set(Var::Y, yv - h);
        }
        double fd, d;
        try {
            fd = (eval(e, bp) - eval(e, bm)) / (2 * h);
            d = eval(diff(e, v), Bindings(xv, yv));
        } catch (const DomainError&) {
            continue;
        }
        if (!std::isfinite(fd) || std::fabs(fd) > 1e6) continue;
        ++checked;
        const double tol = 1e-6 * (1.0 + std::fabs(fd)) + 1e-10 * std::fabs(eval(e, Bindings(xv, yv))) / h;
        EXPECT_LE(std::fabs(d - fd), tol) << to_string(e);
    }
    EXPECT_GT(checked, 900);
}

TEST(Property, SimplifyAndPrintPreserveValue) {
    Rng rng(77);
    for (int n = 0; n < 300; ++n) {
        const Expr e = random_expr(rng, 4);
        const Expr s = simplify(e);
        const Expr r = parse(to_string(e));
        for (int k = 0; k < 5; ++k) {
            const Bindings b(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0));
            double ve;
            try {
                ve = eval(e, b);
            } catch (const DomainError&) {
                continue;
            }
            EXPECT_NEAR(eval(s, b), ve, 1e-14 * (1.0 + std::fabs(ve)) * 100) << to_string(e);
            EXPECT_NEAR(eval(r, b), ve, 1e-14 * (1.0 + std::fabs(ve))) << to_string(e);
        }
    }
}

TEST(Program, MatchesTreeEvaluation) {
    const Expr a = parse("x^2*sin(y) + exp(x*y)");
    const Expr b = diff(a, Var::Y);
    Program prog(std::vector<Expr>{a, b});
    const auto out = prog.run(Bindings(0.7, 1.2));
    EXPECT_DOUBLE_EQ(out[0], eval(a, Bindings(0.7, 1.2)));
    EXPECT_DOUBLE_EQ(out[1], eval(b, Bindings(0.7, 1.2)));
}
