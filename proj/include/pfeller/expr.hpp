#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace pfeller {

/// A real number held as sign * exp(log_abs). sign == 0 encodes exact zero.
struct SignedLog {
    double log_abs;
    int sign;

    static SignedLog zero();
    static SignedLog of(double x);

    double value() const;
};

SignedLog signed_log_add(SignedLog x, SignedLog y);

/// Immutable expression tree in a single real variable.
///
/// Nodes are shared, so copies are cheap and an Expr may be evaluated
/// concurrently from several threads.
class Expr {
public:
    enum class Op { Number, Variable, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sinh, Cosh, Sqrt };

    static Expr number(double v);
    static Expr variable();

    static Expr add(const Expr& a, const Expr& b);
    static Expr sub(const Expr& a, const Expr& b);
    static Expr mul(const Expr& a, const Expr& b);
    static Expr div(const Expr& a, const Expr& b);
    static Expr neg(const Expr& a);
    static Expr pow(const Expr& base, double exponent);
    static Expr apply(Op function, const Expr& arg);

    Op op() const;
    bool is_number() const { return op() == Op::Number; }
    /// Literal value; only meaningful for Op::Number.
    double number_value() const;
    /// Exponent; only meaningful for Op::Pow.
    double exponent() const;

    /// Direct IEEE evaluation. May overflow to inf for large arguments.
    double eval(double t) const;

    /// Evaluation in signed-log form. Products, quotients, powers and exp()
    /// never materialize the intermediate value, so log|f(t)| stays finite
    /// long after f(t) itself overflows or underflows.
    SignedLog log_eval(double t) const;

    /// Exact symbolic derivative with light algebraic simplification.
    Expr derivative() const;

    /// Constant-fold if the tree does not reference the variable.
    bool is_constant() const;

    std::string to_string(std::string_view variable = "t") const;

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const Node> node_;
};

/// Parse the expression DSL:
///
///     expr   := term (('+'|'-') term)*
///     term   := factor (('*'|'/') factor)*
///     factor := '-' factor | base ('^' exponent)?
///     base   := number | VAR | func '(' expr ')' | '(' expr ')'
///     func   := exp | log | sinh | cosh | sqrt
///
/// `exponent` is a signed decimal literal or a parenthesized constant
/// expression. Whitespace is ignored. Throws ParseError.
Expr parse_expression(std::string_view text, std::string_view variable = "t");

}  // namespace pfeller
