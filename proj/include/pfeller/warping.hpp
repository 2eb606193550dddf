#pragma once

#include "pfeller/expr.hpp"

#include <string>
#include <string_view>

namespace pfeller {

enum class Family { Euclidean, Hyperbolic, CuspCubic, FlareCubic, Custom };

struct FamilyTag {
    Family family = Family::Custom;
    double kappa = 0.0;  ///< sectional curvature, Hyperbolic only

    std::string name() const;
};

struct WarpingOptions {
    double t_max = 1e3;     ///< right end of the positivity probe grid
    int probe_points = 400;
};

/// Warping function sigma of a model manifold together with its exact
/// symbolic derivative.
class WarpingFunction {
public:
    /// Builds and validates: sigma(0)=0, sigma'(0)=1 and sigma>0 on the probe grid.
    /// Throws ValidationError.
    static WarpingFunction from_expression(Expr sigma, FamilyTag tag = {}, const WarpingOptions& options = {});

    static WarpingFunction euclidean();
    /// sigma(t) = sinh(sqrt(-kappa) t) / sqrt(-kappa); requires kappa < 0.
    static WarpingFunction hyperbolic(double kappa = -1.0);
    /// sigma(t) = t exp(-t^3): finite volume end.
    static WarpingFunction cusp_cubic();
    /// sigma(t) = t exp(t^3): rapidly expanding end.
    static WarpingFunction flare_cubic();
    /// Lookup by name: euclidean | hyperbolic | cusp_cubic | flare_cubic.
    static WarpingFunction family(std::string_view name, double kappa = -1.0);

    double value(double t) const { return expr_.eval(t); }
    double derivative(double t) const { return deriv_.eval(t); }
    SignedLog log_value(double t) const { return expr_.log_eval(t); }
    SignedLog log_derivative(double t) const { return deriv_.log_eval(t); }

    /// sigma'(t)/sigma(t), computed from logarithms so it stays finite when
    /// sigma itself overflows.
    double log_slope(double t) const;

    const Expr& expr() const { return expr_; }
    const Expr& deriv() const { return deriv_; }
    const FamilyTag& tag() const { return tag_; }
    std::string text() const { return expr_.to_string(); }

private:
    WarpingFunction(Expr e, FamilyTag tag);

    Expr expr_;
    Expr deriv_;
    FamilyTag tag_;
};

/// Throws ValidationError naming the failed invariant.
void validate_warping(const WarpingFunction& sigma, const WarpingOptions& options = {});

/// Parse DSL text in the variable t and validate. Throws ParseError or ValidationError.
WarpingFunction parse_sigma(std::string_view text, const WarpingOptions& options = {});

/// Rotationally symmetric manifold of dimension m with metric dr^2 + sigma(r)^2 g_{S^{m-1}}.
/// m = 1 is the half-line mode, where sigma^{m-1} is identically 1.
class ModelManifold {
public:
    ModelManifold(int m, WarpingFunction sigma);

    int m() const { return m_; }
    const WarpingFunction& sigma() const { return sigma_; }

private:
    int m_;
    WarpingFunction sigma_;
};

/// (m-1) log sigma(t). Throws EvalError if sigma(t) <= 0 or is not finite in log form.
double log_sigma_pow(const ModelManifold& manifold, double t);

/// Surface measure of the unit (m-1)-sphere, 2 pi^{m/2} / Gamma(m/2).
double unit_sphere_area(int m);

struct LogSlopeBound {
    enum class Trend { Bounded, DecreasingUnbounded };

    double min_value;
    double argmin;
    Trend trend;
};

/// Minimum of sigma'/sigma over a log-uniform probe grid on (0, horizon],
/// plus a tail-trend flag. Throws EvalError if sigma <= 0 on the grid.
LogSlopeBound sigma_log_derivative_inf(const ModelManifold& manifold, double horizon);

std::string to_string(LogSlopeBound::Trend trend);

}  // namespace pfeller
