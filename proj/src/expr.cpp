#include "pfeller/expr.hpp"

#include "pfeller/errors.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace pfeller {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLn2 = 0.69314718055994530942;

// log|sinh x| and log cosh x without overflow.
double log_abs_sinh(double x) {
    const double ax = std::fabs(x);
    if (ax > 20.0) return ax - kLn2 + std::log1p(-std::exp(-2.0 * ax));
    return std::log(std::fabs(std::sinh(x)));
}

double log_cosh(double x) {
    const double ax = std::fabs(x);
    if (ax > 20.0) return ax - kLn2 + std::log1p(std::exp(-2.0 * ax));
    return std::log(std::cosh(x));
}

int sign_of(double x) { return (x > 0) - (x < 0); }

bool is_integer(double c) { return std::isfinite(c) && std::floor(c) == c; }

}  // namespace

SignedLog SignedLog::zero() { return {-kInf, 0}; }

SignedLog SignedLog::of(double x) {
    if (std::isnan(x)) return {kNaN, 1};
    if (x == 0.0) return zero();
    return {std::log(std::fabs(x)), sign_of(x)};
}

double SignedLog::value() const {
    if (sign == 0) return 0.0;
    return sign * std::exp(log_abs);
}

SignedLog signed_log_add(SignedLog x, SignedLog y) {
    if (std::isnan(x.log_abs) || std::isnan(y.log_abs)) return {kNaN, 1};
    if (x.sign == 0) return y;
    if (y.sign == 0) return x;
    if (x.log_abs < y.log_abs) std::swap(x, y);
    if (x.log_abs == kInf) {
        if (y.log_abs == kInf && x.sign != y.sign) return {kNaN, 1};
        return x;
    }
    const double d = std::exp(y.log_abs - x.log_abs);
    if (x.sign == y.sign) return {x.log_abs + std::log1p(d), x.sign};
    if (d == 1.0) return SignedLog::zero();
    return {x.log_abs + std::log1p(-d), x.sign};
}

struct Expr::Node {
    Op op;
    double value = 0.0;  // literal for Number, exponent for Pow
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
};

Expr Expr::number(double v) { return Expr(std::make_shared<const Node>(Node{Op::Number, v, nullptr, nullptr})); }

Expr Expr::variable() { return Expr(std::make_shared<const Node>(Node{Op::Variable, 0.0, nullptr, nullptr})); }

Expr::Op Expr::op() const { return node_->op; }

double Expr::number_value() const { return node_->value; }

double Expr::exponent() const { return node_->value; }

Expr Expr::add(const Expr& a, const Expr& b) {
    if (a.is_number() && b.is_number()) return number(a.number_value() + b.number_value());
    if (a.is_number() && a.number_value() == 0.0) return b;
    if (b.is_number() && b.number_value() == 0.0) return a;
    if (b.op() == Op::Neg) return sub(a, Expr(b.node_->a));
    return Expr(std::make_shared<const Node>(Node{Op::Add, 0.0, a.node_, b.node_}));
}

Expr Expr::sub(const Expr& a, const Expr& b) {
    if (a.is_number() && b.is_number()) return number(a.number_value() - b.number_value());
    if (b.is_number() && b.number_value() == 0.0) return a;
    if (a.is_number() && a.number_value() == 0.0) return neg(b);
    if (b.op() == Op::Neg) return add(a, Expr(b.node_->a));
    return Expr(std::make_shared<const Node>(Node{Op::Sub, 0.0, a.node_, b.node_}));
}

Expr Expr::mul(const Expr& a, const Expr& b) {
    if (a.is_number() && b.is_number()) return number(a.number_value() * b.number_value());
    if ((a.is_number() && a.number_value() == 0.0) || (b.is_number() && b.number_value() == 0.0)) return number(0.0);
    if (a.is_number() && a.number_value() == 1.0) return b;
    if (b.is_number() && b.number_value() == 1.0) return a;
    if (a.is_number() && a.number_value() == -1.0) return neg(b);
    if (b.is_number() && b.number_value() == -1.0) return neg(a);
    if (a.op() == Op::Neg) return neg(mul(Expr(a.node_->a), b));
    if (b.op() == Op::Neg) return neg(mul(a, Expr(b.node_->a)));
    // keep numeric factors on the left
    if (b.is_number()) return Expr(std::make_shared<const Node>(Node{Op::Mul, 0.0, b.node_, a.node_}));
    return Expr(std::make_shared<const Node>(Node{Op::Mul, 0.0, a.node_, b.node_}));
}

Expr Expr::div(const Expr& a, const Expr& b) {
    if (a.is_number() && b.is_number() && b.number_value() != 0.0) return number(a.number_value() / b.number_value());
    if (a.is_number() && a.number_value() == 0.0) return number(0.0);
    if (b.is_number() && b.number_value() == 1.0) return a;
    return Expr(std::make_shared<const Node>(Node{Op::Div, 0.0, a.node_, b.node_}));
}

Expr Expr::neg(const Expr& a) {
    if (a.is_number()) return number(-a.number_value());
    if (a.op() == Op::Neg) return Expr(a.node_->a);
    return Expr(std::make_shared<const Node>(Node{Op::Neg, 0.0, a.node_, nullptr}));
}

Expr Expr::pow(const Expr& base, double exponent) {
    if (exponent == 0.0) return number(1.0);
    if (exponent == 1.0) return base;
    if (base.is_number()) return number(std::pow(base.number_value(), exponent));
    if (base.op() == Op::Pow) return pow(Expr(base.node_->a), base.exponent() * exponent);
    return Expr(std::make_shared<const Node>(Node{Op::Pow, exponent, base.node_, nullptr}));
}

Expr Expr::apply(Op function, const Expr& arg) {
    if (arg.is_number()) {
        const double x = arg.number_value();
        switch (function) {
            case Op::Exp: return number(std::exp(x));
            case Op::Log: return number(std::log(x));
            case Op::Sinh: return number(std::sinh(x));
            case Op::Cosh: return number(std::cosh(x));
            case Op::Sqrt: return number(std::sqrt(x));
            default: break;
        }
    }
    return Expr(std::make_shared<const Node>(Node{function, 0.0, arg.node_, nullptr}));
}

bool Expr::is_constant() const {
    switch (op()) {
        case Op::Number: return true;
        case Op::Variable: return false;
        default: break;
    }
    if (!Expr(node_->a).is_constant()) return false;
    return !node_->b || Expr(node_->b).is_constant();
}

double Expr::eval(double t) const {
    const Node& n = *node_;
    switch (n.op) {
        case Op::Number: return n.value;
        case Op::Variable: return t;
        case Op::Add: return Expr(n.a).eval(t) + Expr(n.b).eval(t);
        case Op::Sub: return Expr(n.a).eval(t) - Expr(n.b).eval(t);
        case Op::Mul: return Expr(n.a).eval(t) * Expr(n.b).eval(t);
        case Op::Div: return Expr(n.a).eval(t) / Expr(n.b).eval(t);
        case Op::Neg: return -Expr(n.a).eval(t);
        case Op::Pow: return std::pow(Expr(n.a).eval(t), n.value);
        case Op::Exp: return std::exp(Expr(n.a).eval(t));
        case Op::Log: {
            const SignedLog x = Expr(n.a).log_eval(t);
            if (x.sign > 0) return x.log_abs;
            return x.sign == 0 ? -kInf : kNaN;
        }
        case Op::Sinh: return std::sinh(Expr(n.a).eval(t));
        case Op::Cosh: return std::cosh(Expr(n.a).eval(t));
        case Op::Sqrt: return std::sqrt(Expr(n.a).eval(t));
    }
    return kNaN;
}

SignedLog Expr::log_eval(double t) const {
    const Node& n = *node_;
    switch (n.op) {
        case Op::Number: return SignedLog::of(n.value);
        case Op::Variable: return SignedLog::of(t);
        case Op::Add: return signed_log_add(Expr(n.a).log_eval(t), Expr(n.b).log_eval(t));
        case Op::Sub: {
            SignedLog y = Expr(n.b).log_eval(t);
            y.sign = -y.sign;
            return signed_log_add(Expr(n.a).log_eval(t), y);
        }
        case Op::Mul: {
            const SignedLog x = Expr(n.a).log_eval(t);
            const SignedLog y = Expr(n.b).log_eval(t);
            if (std::isnan(x.log_abs) || std::isnan(y.log_abs)) return {kNaN, 1};
            if (x.sign == 0 || y.sign == 0) {
                if (x.log_abs == kInf || y.log_abs == kInf) return {kNaN, 1};
                return SignedLog::zero();
            }
            return {x.log_abs + y.log_abs, x.sign * y.sign};
        }
        case Op::Div: {
            const SignedLog x = Expr(n.a).log_eval(t);
            const SignedLog y = Expr(n.b).log_eval(t);
            if (std::isnan(x.log_abs) || std::isnan(y.log_abs)) return {kNaN, 1};
            if (y.sign == 0) return x.sign == 0 ? SignedLog{kNaN, 1} : SignedLog{kInf, x.sign};
            if (x.sign == 0) return SignedLog::zero();
            return {x.log_abs - y.log_abs, x.sign * y.sign};
        }
        case Op::Neg: {
            SignedLog x = Expr(n.a).log_eval(t);
            x.sign = -x.sign;
            return x;
        }
        case Op::Pow: {
            const SignedLog x = Expr(n.a).log_eval(t);
            const double c = n.value;
            if (std::isnan(x.log_abs)) return x;
            if (x.sign == 0) return c > 0 ? SignedLog::zero() : SignedLog{kInf, 1};
            if (x.sign < 0) {
                if (!is_integer(c)) return {kNaN, 1};
                const bool odd = std::fmod(std::fabs(c), 2.0) == 1.0;
                return {c * x.log_abs, odd ? -1 : 1};
            }
            return {c * x.log_abs, 1};
        }
        case Op::Exp: return {Expr(n.a).eval(t), 1};
        case Op::Log: return SignedLog::of(eval(t));
        case Op::Sinh: {
            const double x = Expr(n.a).eval(t);
            if (std::isnan(x)) return {kNaN, 1};
            if (x == 0.0) return SignedLog::zero();
            return {log_abs_sinh(x), sign_of(x)};
        }
        case Op::Cosh: {
            const double x = Expr(n.a).eval(t);
            if (std::isnan(x)) return {kNaN, 1};
            return {log_cosh(x), 1};
        }
        case Op::Sqrt: {
            const SignedLog x = Expr(n.a).log_eval(t);
            if (x.sign < 0 || std::isnan(x.log_abs)) return {kNaN, 1};
            if (x.sign == 0) return SignedLog::zero();
            return {0.5 * x.log_abs, 1};
        }
    }
    return {kNaN, 1};
}

Expr Expr::derivative() const {
    const Node& n = *node_;
    const auto a = [&] { return Expr(n.a); };
    const auto b = [&] { return Expr(n.b); };
    switch (n.op) {
        case Op::Number: return number(0.0);
        case Op::Variable: return number(1.0);
        case Op::Add: return add(a().derivative(), b().derivative());
        case Op::Sub: return sub(a().derivative(), b().derivative());
        case Op::Neg: return neg(a().derivative());
        case Op::Mul: return add(mul(a().derivative(), b()), mul(a(), b().derivative()));
        case Op::Div:
            return sub(div(a().derivative(), b()), div(mul(a(), b().derivative()), pow(b(), 2.0)));
        case Op::Pow: return mul(mul(number(n.value), pow(a(), n.value - 1.0)), a().derivative());
        case Op::Exp: return mul(*this, a().derivative());
        case Op::Log: return div(a().derivative(), a());
        case Op::Sinh: return mul(apply(Op::Cosh, a()), a().derivative());
        case Op::Cosh: return mul(apply(Op::Sinh, a()), a().derivative());
        case Op::Sqrt: return div(a().derivative(), mul(number(2.0), *this));
    }
    return number(0.0);
}

std::string Expr::to_string(std::string_view variable) const {
    const Node& n = *node_;
    const auto wrap = [&](const std::shared_ptr<const Node>& child) {
        const Expr e(child);
        const Op o = e.op();
        const bool atomic = o == Op::Number || o == Op::Variable || o == Op::Exp || o == Op::Log ||
                            o == Op::Sinh || o == Op::Cosh || o == Op::Sqrt;
        if (atomic && !(o == Op::Number && e.number_value() < 0)) return e.to_string(variable);
        return "(" + e.to_string(variable) + ")";
    };
    std::ostringstream os;
    os.precision(17);
    switch (n.op) {
        case Op::Number: os << n.value; break;
        case Op::Variable: os << variable; break;
        case Op::Add: os << Expr(n.a).to_string(variable) << " + " << Expr(n.b).to_string(variable); break;
        case Op::Sub: os << Expr(n.a).to_string(variable) << " - " << wrap(n.b); break;
        case Op::Mul: os << wrap(n.a) << "*" << wrap(n.b); break;
        case Op::Div: os << wrap(n.a) << "/" << wrap(n.b); break;
        case Op::Neg: os << "-" << wrap(n.a); break;
        case Op::Pow: {
            os << wrap(n.a) << "^";
            if (n.value < 0) os << "(" << n.value << ")";
            else os << n.value;
            break;
        }
        case Op::Exp: os << "exp(" << Expr(n.a).to_string(variable) << ")"; break;
        case Op::Log: os << "log(" << Expr(n.a).to_string(variable) << ")"; break;
        case Op::Sinh: os << "sinh(" << Expr(n.a).to_string(variable) << ")"; break;
        case Op::Cosh: os << "cosh(" << Expr(n.a).to_string(variable) << ")"; break;
        case Op::Sqrt: os << "sqrt(" << Expr(n.a).to_string(variable) << ")"; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    Parser(std::string_view text, std::string_view variable) : text_(text), variable_(variable) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ < text_.size()) fail({"operator", "end of input"});
        return e;
    }

private:
    std::string_view text_;
    std::string_view variable_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    [[noreturn]] void fail(std::vector<std::string> expected) {
        skip_ws();
        std::string found = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
        throw ParseError(pos_, std::move(expected), found);
    }

    void expect(char c) {
        if (peek() != c) fail({std::string("'") + c + "'"});
        ++pos_;
    }

    Expr expr() {
        Expr lhs = term();
        for (;;) {
            const char c = peek();
            if (c == '+') {
                ++pos_;
                lhs = Expr::add(lhs, term());
            } else if (c == '-') {
                ++pos_;
                lhs = Expr::sub(lhs, term());
            } else {
                return lhs;
            }
        }
    }

    Expr term() {
        Expr lhs = factor();
        for (;;) {
            const char c = peek();
            if (c == '*') {
                ++pos_;
                lhs = Expr::mul(lhs, factor());
            } else if (c == '/') {
                ++pos_;
                lhs = Expr::div(lhs, factor());
            } else {
                return lhs;
            }
        }
    }

    Expr factor() {
        if (peek() == '-') {
            ++pos_;
            return Expr::neg(factor());
        }
        Expr b = base();
        if (peek() == '^') {
            ++pos_;
            return Expr::pow(b, exponent());
        }
        return b;
    }

    double exponent() {
        const char c = peek();
        if (c == '(') {
            const std::size_t start = pos_;
            ++pos_;
            Expr e = expr();
            expect(')');
            if (!e.is_constant()) {
                pos_ = start;
                fail({"constant exponent"});
            }
            return e.eval(0.0);
        }
        double sign = 1.0;
        if (c == '-' || c == '+') {
            sign = c == '-' ? -1.0 : 1.0;
            ++pos_;
        }
        if (!starts_number()) fail({"number", "'('"});
        return sign * number();
    }

    bool starts_number() {
        const char c = peek();
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
    }

    double number() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string literal(text_.substr(start, pos_ - start));
        if (literal == ".") {
            pos_ = start;
            fail({"number"});
        }
        return std::stod(literal);
    }

    Expr base() {
        const char c = peek();
        if (starts_number()) return Expr::number(number());
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            const std::string_view ident = text_.substr(start, pos_ - start);
            if (ident == variable_) return Expr::variable();
            Expr::Op f;
            if (ident == "exp") f = Expr::Op::Exp;
            else if (ident == "log") f = Expr::Op::Log;
            else if (ident == "sinh") f = Expr::Op::Sinh;
            else if (ident == "cosh") f = Expr::Op::Cosh;
            else if (ident == "sqrt") f = Expr::Op::Sqrt;
            else {
                pos_ = start;
                fail(base_expected());
            }
            expect('(');
            Expr arg = expr();
            expect(')');
            return Expr::apply(f, arg);
        }
        fail(base_expected());
    }

    std::vector<std::string> base_expected() const {
        return {"number", "'" + std::string(variable_) + "'", "exp", "log", "sinh", "cosh", "sqrt", "'('"};
    }
};

}  // namespace

Expr parse_expression(std::string_view text, std::string_view variable) {
    return Parser(text, variable).parse();
}

}  // namespace pfeller
