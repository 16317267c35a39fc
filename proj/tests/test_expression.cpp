#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gbm/dual.hpp"
#include "gbm/expression.hpp"

using gbm::Expression;

namespace {

double eval(const std::string& text, std::vector<double> x) {
    const auto e = Expression::parse(text, static_cast<int>(x.size()));
    return e(std::span<const double>(x));
}

// Random expression trees, printed fully parenthesized and evaluated directly
// from the tree: an interpreter that shares nothing with the parser.
struct RefNode {
    char op;   // 'c', 'x', '+', '-', '*', '/', '^', 'n', 'f'
    double value = 0.0;
    int index = 0;
    std::string fn;
    std::unique_ptr<RefNode> l, r;
};

class RefGen {
public:
    explicit RefGen(std::uint64_t seed) : rng_(seed) {}

    std::unique_ptr<RefNode> make(int depth) {
        auto n = std::make_unique<RefNode>();
        const int pick = depth <= 0 ? uniform(0, 1) : uniform(0, 8);
        switch (pick) {
            case 0:
                n->op = 'c';
                n->value = std::round(std::uniform_real_distribution<double>(0.1, 3.0)(rng_) * 1000.0) / 1000.0;
                break;
            case 1:
                n->op = 'x';
                n->index = uniform(0, 1);
                break;
            case 2: n->op = '+'; break;
            case 3: n->op = '-'; break;
            case 4: n->op = '*'; break;
            case 5: n->op = '/'; break;
            case 6: n->op = '^'; break;
            case 7: n->op = 'n'; break;
            default: {
                static const char* fns[] = {"sin", "cos", "exp", "sqrt", "log", "tan"};
                n->op = 'f';
                n->fn = fns[uniform(0, 5)];
            }
        }
        if (n->op == '^') {
            n->l = make(depth - 1);
            n->r = std::make_unique<RefNode>();
            n->r->op = 'c';
            n->r->value = uniform(0, 3);
        } else if (n->op == 'n' || n->op == 'f') {
            n->l = make(depth - 1);
        } else if (n->op != 'c' && n->op != 'x') {
            n->l = make(depth - 1);
            n->r = make(depth - 1);
        }
        return n;
    }

private:
    int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::mt19937_64 rng_;
};

std::string ref_print(const RefNode& n) {
    char buf[64];
    switch (n.op) {
        case 'c': std::snprintf(buf, sizeof buf, "%.3f", n.value); return buf;
        case 'x': return "x" + std::to_string(n.index + 1);
        case 'n': return "(-" + ref_print(*n.l) + ")";
        case 'f': {
            // sqrt and log of |.| so that the values stay real.
            if (n.fn == "sqrt" || n.fn == "log") return n.fn + "((" + ref_print(*n.l) + ")^2 + 0.5)";
            return n.fn + "(" + ref_print(*n.l) + ")";
        }
        default: return "(" + ref_print(*n.l) + " " + n.op + " " + ref_print(*n.r) + ")";
    }
}

double ref_eval(const RefNode& n, const std::vector<double>& x) {
    switch (n.op) {
        case 'c': return n.value;
        case 'x': return x[static_cast<std::size_t>(n.index)];
        case 'n': return -ref_eval(*n.l, x);
        case 'f': {
            const double a = ref_eval(*n.l, x);
            if (n.fn == "sin") return std::sin(a);
            if (n.fn == "cos") return std::cos(a);
            if (n.fn == "exp") return std::exp(a);
            if (n.fn == "tan") return std::tan(a);
            const double s = a * a + 0.5;
            return n.fn == "sqrt" ? std::sqrt(s) : std::log(s);
        }
        case '+': return ref_eval(*n.l, x) + ref_eval(*n.r, x);
        case '-': return ref_eval(*n.l, x) - ref_eval(*n.r, x);
        case '*': return ref_eval(*n.l, x) * ref_eval(*n.r, x);
        case '/': return ref_eval(*n.l, x) / ref_eval(*n.r, x);
        case '^': return std::pow(ref_eval(*n.l, x), n.r->value);
    }
    return 0.0;
}

bool close_rel(double a, double b, double tol) {
    if (!std::isfinite(a) || !std::isfinite(b)) return std::isnan(a) == std::isnan(b);
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace

TEST(Expression, Literals) {
    EXPECT_DOUBLE_EQ(eval("0.3 + 0.2*sin(x1)", {0.0, 0.0}), 0.3);
    EXPECT_DOUBLE_EQ(eval("2.5e-1", {0.0, 0.0}), 0.25);
    EXPECT_DOUBLE_EQ(eval("pi", {0.0, 0.0}), std::numbers::pi);
    EXPECT_DOUBLE_EQ(eval("e", {0.0, 0.0}), std::numbers::e);
}

TEST(Expression, Precedence) {
    EXPECT_DOUBLE_EQ(eval("1 + 2*3", {0, 0}), 7.0);
    EXPECT_DOUBLE_EQ(eval("(1 + 2)*3", {0, 0}), 9.0);
    EXPECT_DOUBLE_EQ(eval("2^3^2", {0, 0}), 512.0);
    EXPECT_DOUBLE_EQ(eval("-2^2", {0, 0}), -4.0);
    EXPECT_DOUBLE_EQ(eval("2^-1", {0, 0}), 0.5);
    EXPECT_DOUBLE_EQ(eval("8/4/2", {0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(eval("5 - 3 - 1", {0, 0}), 1.0);
}

TEST(Expression, Variables) {
    EXPECT_DOUBLE_EQ(eval("x1*x2 + x3", {2.0, 3.0, 4.0}), 10.0);
    EXPECT_DOUBLE_EQ(eval("exp(x1^2/2)", {1.0, 0.0}), std::exp(0.5));
}

TEST(Expression, Whitespace) {
    EXPECT_DOUBLE_EQ(eval("  sin ( x1 )\n+\t1 ", {0.0, 0.0}), 1.0);
}

TEST(Expression, SyntaxErrorLocation) {
    try {
        Expression::parse("0.3 +*", 2);
        FAIL() << "expected a syntax error";
    } catch (const gbm::SyntaxError& e) {
        EXPECT_EQ(e.line(), 1);
        EXPECT_EQ(e.column(), 6);
    }
}

TEST(Expression, SyntaxErrors) {
    for (const char* bad : {"", "(1 + 2", "1 2", "sin x1", "foo(1)", "y1", "1 +", "3 $ 4", "sin()"}) {
        EXPECT_THROW(Expression::parse(bad, 2), gbm::SyntaxError) << bad;
    }
}

TEST(Expression, VariableBeyondDimension) {
    try {
        Expression::parse("x3 + 1", 2);
        FAIL() << "expected a dimension error";
    } catch (const gbm::Error& e) {
        EXPECT_EQ(e.code(), gbm::ErrorCode::dimension_mismatch);
    }
}

TEST(Expression, ConstantDetection) {
    EXPECT_TRUE(Expression::parse("2*pi + sin(1)", 2).is_constant());
    EXPECT_FALSE(Expression::parse("0*x2", 2).is_constant());
}

TEST(Expression, PrintReparse) {
    for (const char* text : {"0.3 + 0.2*sin(x1)", "-(x1 - x2)^2", "2^3^2", "(2^3)^2", "x1/(x2*3)", "x1 - (x2 - 1)",
                             "exp(-0.5*x1 + 0.3*x2)", "-x1^2", "(-x1)^2", "0.1"}) {
        const auto e = Expression::parse(text, 2);
        const auto again = Expression::parse(e.to_string(), 2);
        for (double a : {-0.7, 0.3, 1.9}) {
            const std::vector<double> x{a, 0.5 * a + 0.2};
            EXPECT_EQ(e(std::span<const double>(x)), again(std::span<const double>(x))) << text << " -> " << e.to_string();
        }
    }
}

TEST(Expression, AgreesWithReferenceInterpreter) {
    RefGen gen(2024);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    int compared = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto tree = gen.make(5);
        const std::string text = ref_print(*tree);
        const auto e = Expression::parse(text, 2);
        const std::vector<double> x{coord(rng), coord(rng)};
        const double want = ref_eval(*tree, x);
        const double got = e(std::span<const double>(x));
        EXPECT_TRUE(close_rel(got, want, 1e-14)) << text << " at " << x[0] << "," << x[1] << ": " << got << " vs " << want;
        if (std::isfinite(want)) ++compared;
    }
    EXPECT_GT(compared, 900);
}

TEST(Expression, DualDerivative) {
    const auto e = Expression::parse("exp(x1^2/2)*sin(x2) + sqrt(x1 + 2)/x2", 2);
    const double x1 = 0.4, x2 = 1.3;
    const std::vector<gbm::Dual> xd{gbm::Dual{x1, 1.0}, gbm::Dual{x2, 0.0}};
    const gbm::Dual v = e.evaluate<gbm::Dual>(std::span<const gbm::Dual>(xd));
    const double want = x1 * std::exp(x1 * x1 / 2) * std::sin(x2) + 0.5 / std::sqrt(x1 + 2) / x2;
    EXPECT_NEAR(v.d, want, 1e-14);
    const std::vector<double> xv{x1, x2};
    EXPECT_DOUBLE_EQ(v.v, e(std::span<const double>(xv)));
}
