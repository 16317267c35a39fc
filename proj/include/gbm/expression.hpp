#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbm/dual.hpp"
#include "gbm/errors.hpp"

namespace gbm {

// ---------------------------------------------------------------------------
// Lexer shared by the expression grammar and the metric-spec file grammar.
// ---------------------------------------------------------------------------

enum class TokenKind { number, ident, plus, minus, star, slash, caret, lparen, rparen,
                       lbracket, rbracket, comma, equals, semicolon, end };

struct Token {
    TokenKind kind = TokenKind::end;
    std::string text;
    double number = 0.0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const Token& at, const std::string& what) const {
        throw SyntaxError(at.line, at.column, what);
    }

    Token expect(TokenKind kind, const char* what) {
        if (current_.kind != kind) fail(current_, std::string("expected ") + what + describe(current_));
        return take();
    }

    static std::string describe(const Token& t) {
        if (t.kind == TokenKind::end) return ", found end of input";
        return ", found '" + t.text + "'";
    }

private:
    void advance() {
        skip_blank();
        current_ = Token{};
        current_.line = line_;
        current_.column = col_;
        if (pos_ >= src_.size()) {
            current_.kind = TokenKind::end;
            return;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                bump();
            }
            current_.kind = TokenKind::ident;
            current_.text = std::string(src_.substr(start, pos_ - start));
            return;
        }
        current_.text = std::string(1, c);
        switch (c) {
            case '+': current_.kind = TokenKind::plus; break;
            case '-': current_.kind = TokenKind::minus; break;
            case '*': current_.kind = TokenKind::star; break;
            case '/': current_.kind = TokenKind::slash; break;
            case '^': current_.kind = TokenKind::caret; break;
            case '(': current_.kind = TokenKind::lparen; break;
            case ')': current_.kind = TokenKind::rparen; break;
            case '[': current_.kind = TokenKind::lbracket; break;
            case ']': current_.kind = TokenKind::rbracket; break;
            case ',': current_.kind = TokenKind::comma; break;
            case '=': current_.kind = TokenKind::equals; break;
            case ';': current_.kind = TokenKind::semicolon; break;
            default:
                throw SyntaxError(line_, col_, "unexpected character '" + current_.text + "'");
        }
        bump();
    }

    void lex_number() {
        std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            bump();
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_;
            int save_col = col_;
            bump();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                digits();
            } else {
                pos_ = save;
                col_ = save_col;
            }
        }
        current_.kind = TokenKind::number;
        current_.text = std::string(src_.substr(start, pos_ - start));
        if (current_.text == ".") throw SyntaxError(current_.line, current_.column, "malformed number");
        current_.number = std::strtod(current_.text.c_str(), nullptr);
    }

    void skip_blank() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                bump();
            } else {
                break;
            }
        }
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    Token current_;
};

// ---------------------------------------------------------------------------
// Expression AST over chart coordinates x1..xn.
// ---------------------------------------------------------------------------

enum class UnaryFn { sin, cos, tan, exp, log, sqrt };

inline const char* fn_name(UnaryFn f) {
    switch (f) {
        case UnaryFn::sin: return "sin";
        case UnaryFn::cos: return "cos";
        case UnaryFn::tan: return "tan";
        case UnaryFn::exp: return "exp";
        case UnaryFn::log: return "log";
        case UnaryFn::sqrt: return "sqrt";
    }
    return "?";
}

class Expression {
public:
    enum class Op { constant, variable, add, sub, mul, div, pow, neg, call };

    struct Node {
        Op op = Op::constant;
        double value = 0.0;   // constant
        int index = 0;        // variable (0-based)
        UnaryFn fn = UnaryFn::sin;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };

    Expression() : Expression(constant(0.0)) {}

    static Expression constant(double c) {
        auto n = std::make_shared<Node>();
        n->op = Op::constant;
        n->value = c;
        return Expression(std::move(n));
    }

    static Expression variable(int index) {
        auto n = std::make_shared<Node>();
        n->op = Op::variable;
        n->index = index;
        return Expression(std::move(n));
    }

    // Parses a complete expression. Variables x1..x<dim> are admitted.
    static Expression parse(std::string_view text, int dim);

    // Parses one expression from an existing token stream (metric-spec files).
    static Expression parse(Lexer& lex, int dim);

    template <class S>
    S evaluate(std::span<const S> x) const { return eval<S>(*root_, x); }

    double operator()(std::span<const double> x) const { return evaluate<double>(x); }

    bool is_constant() const { return depends_on_x(*root_) == false; }

    std::string to_string() const {
        std::string out;
        print(*root_, out, 0);
        return out;
    }

    const Node& root() const { return *root_; }

private:
    explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

    static std::shared_ptr<const Node> make(Op op, std::shared_ptr<const Node> l,
                                            std::shared_ptr<const Node> r = nullptr) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    struct Parser {
        Lexer& lex;
        int dim;

        std::shared_ptr<const Node> expr() {
            auto left = term();
            for (;;) {
                const auto k = lex.peek().kind;
                if (k == TokenKind::plus) {
                    lex.take();
                    left = make(Op::add, left, term());
                } else if (k == TokenKind::minus) {
                    lex.take();
                    left = make(Op::sub, left, term());
                } else {
                    return left;
                }
            }
        }

        std::shared_ptr<const Node> term() {
            auto left = unary();
            for (;;) {
                const auto k = lex.peek().kind;
                if (k == TokenKind::star) {
                    lex.take();
                    left = make(Op::mul, left, unary());
                } else if (k == TokenKind::slash) {
                    lex.take();
                    left = make(Op::div, left, unary());
                } else {
                    return left;
                }
            }
        }

        std::shared_ptr<const Node> unary() {
            const auto k = lex.peek().kind;
            if (k == TokenKind::minus) {
                lex.take();
                return make(Op::neg, unary());
            }
            if (k == TokenKind::plus) {
                lex.take();
                return unary();
            }
            return power();
        }

        // Right associative; the exponent may carry its own sign.
        std::shared_ptr<const Node> power() {
            auto base = primary();
            if (lex.peek().kind == TokenKind::caret) {
                lex.take();
                return make(Op::pow, base, unary());
            }
            return base;
        }

        std::shared_ptr<const Node> primary() {
            const Token t = lex.peek();
            if (t.kind == TokenKind::number) {
                lex.take();
                auto n = std::make_shared<Node>();
                n->op = Op::constant;
                n->value = t.number;
                return n;
            }
            if (t.kind == TokenKind::lparen) {
                lex.take();
                auto inner = expr();
                lex.expect(TokenKind::rparen, "')'");
                return inner;
            }
            if (t.kind == TokenKind::ident) {
                lex.take();
                if (lex.peek().kind == TokenKind::lparen) {
                    UnaryFn fn;
                    if (!lookup_fn(t.text, fn)) lex.fail(t, "unknown function '" + t.text + "'");
                    lex.take();
                    auto arg = expr();
                    lex.expect(TokenKind::rparen, "')'");
                    auto n = std::make_shared<Node>();
                    n->op = Op::call;
                    n->fn = fn;
                    n->lhs = std::move(arg);
                    return n;
                }
                return identifier(t);
            }
            lex.fail(t, "expected a number, identifier or '('" + Lexer::describe(t));
        }

        std::shared_ptr<const Node> identifier(const Token& t) {
            auto n = std::make_shared<Node>();
            if (t.text == "pi") {
                n->op = Op::constant;
                n->value = 3.141592653589793238462643383279502884;
                return n;
            }
            if (t.text == "e") {
                n->op = Op::constant;
                n->value = 2.718281828459045235360287471352662498;
                return n;
            }
            if (t.text.size() >= 2 && t.text[0] == 'x') {
                int idx = 0;
                bool digits = true;
                for (std::size_t i = 1; i < t.text.size(); ++i) {
                    if (!std::isdigit(static_cast<unsigned char>(t.text[i]))) {
                        digits = false;
                        break;
                    }
                    idx = idx * 10 + (t.text[i] - '0');
                }
                if (digits && idx >= 1) {
                    if (idx > dim) {
                        throw Error(ErrorCode::dimension_mismatch,
                                    "line " + std::to_string(t.line) + ", column " +
                                        std::to_string(t.column) + ": coordinate " + t.text +
                                        " exceeds dimension " + std::to_string(dim));
                    }
                    n->op = Op::variable;
                    n->index = idx - 1;
                    return n;
                }
            }
            lex.fail(t, "unknown identifier '" + t.text + "'");
        }

        static bool lookup_fn(const std::string& name, UnaryFn& fn) {
            static constexpr UnaryFn all[] = {UnaryFn::sin, UnaryFn::cos, UnaryFn::tan,
                                              UnaryFn::exp, UnaryFn::log, UnaryFn::sqrt};
            for (UnaryFn f : all) {
                if (name == fn_name(f)) {
                    fn = f;
                    return true;
                }
            }
            return false;
        }
    };

    template <class S>
    static S eval(const Node& n, std::span<const S> x) {
        using std::cos;
        using std::exp;
        using std::log;
        using std::pow;
        using std::sin;
        using std::sqrt;
        using std::tan;
        switch (n.op) {
            case Op::constant: return S(n.value);
            case Op::variable: return x[static_cast<std::size_t>(n.index)];
            case Op::add: return eval<S>(*n.lhs, x) + eval<S>(*n.rhs, x);
            case Op::sub: return eval<S>(*n.lhs, x) - eval<S>(*n.rhs, x);
            case Op::mul: return eval<S>(*n.lhs, x) * eval<S>(*n.rhs, x);
            case Op::div: return eval<S>(*n.lhs, x) / eval<S>(*n.rhs, x);
            case Op::pow: return pow(eval<S>(*n.lhs, x), eval<S>(*n.rhs, x));
            case Op::neg: return -eval<S>(*n.lhs, x);
            case Op::call: {
                const S a = eval<S>(*n.lhs, x);
                switch (n.fn) {
                    case UnaryFn::sin: return sin(a);
                    case UnaryFn::cos: return cos(a);
                    case UnaryFn::tan: return tan(a);
                    case UnaryFn::exp: return exp(a);
                    case UnaryFn::log: return log(a);
                    case UnaryFn::sqrt: return sqrt(a);
                }
            }
        }
        return S(0.0);
    }

    static bool depends_on_x(const Node& n) {
        if (n.op == Op::variable) return true;
        if (n.lhs && depends_on_x(*n.lhs)) return true;
        if (n.rhs && depends_on_x(*n.rhs)) return true;
        return false;
    }

    // Precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom.
    static int precedence(const Node& n) {
        switch (n.op) {
            case Op::add:
            case Op::sub: return 1;
            case Op::mul:
            case Op::div: return 2;
            case Op::neg: return 3;
            case Op::pow: return 4;
            case Op::constant: return n.value < 0.0 ? 3 : 5;
            default: return 5;
        }
    }

    static void print(const Node& n, std::string& out, int context) {
        const int p = precedence(n);
        const bool paren = p < context;
        if (paren) out += '(';
        switch (n.op) {
            case Op::constant: {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                out += buf;
                break;
            }
            case Op::variable: out += "x" + std::to_string(n.index + 1); break;
            case Op::add:
                print(*n.lhs, out, 1);
                out += " + ";
                print(*n.rhs, out, 2);
                break;
            case Op::sub:
                print(*n.lhs, out, 1);
                out += " - ";
                print(*n.rhs, out, 2);
                break;
            case Op::mul:
                print(*n.lhs, out, 2);
                out += "*";
                print(*n.rhs, out, 3);
                break;
            case Op::div:
                print(*n.lhs, out, 2);
                out += "/";
                print(*n.rhs, out, 3);
                break;
            case Op::neg:
                out += "-";
                print(*n.lhs, out, 3);
                break;
            case Op::pow:
                print(*n.lhs, out, 5);
                out += "^";
                print(*n.rhs, out, 3);
                break;
            case Op::call:
                out += fn_name(n.fn);
                out += "(";
                print(*n.lhs, out, 0);
                out += ")";
                break;
        }
        if (paren) out += ')';
    }

    std::shared_ptr<const Node> root_;
};

inline Expression Expression::parse(Lexer& lex, int dim) {
    Parser p{lex, dim};
    return Expression(p.expr());
}

inline Expression Expression::parse(std::string_view text, int dim) {
    Lexer lex(text);
    Expression e = parse(lex, dim);
    if (lex.peek().kind != TokenKind::end) {
        lex.fail(lex.peek(), "unexpected trailing input" + Lexer::describe(lex.peek()));
    }
    return e;
}

}  // namespace gbm
