#include "pfeller/warping.hpp"

#include "pfeller/errors.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

namespace pfeller {

namespace {

constexpr double kPoleValueTol = 1e-12;
constexpr double kPoleSlopeTol = 1e-9;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

// Value at t = 0, falling back to a one-sided sample when the expression is
// singular exactly at the pole (e.g. t*log(t)).
double pole_sample(const Expr& e) {
    const double v = e.eval(0.0);
    if (std::isfinite(v)) return v;
    return e.eval(1e-14);
}

}  // namespace

std::string FamilyTag::name() const {
    switch (family) {
        case Family::Euclidean: return "euclidean";
        case Family::Hyperbolic: return "hyperbolic(" + fmt(kappa) + ")";
        case Family::CuspCubic: return "cusp_cubic";
        case Family::FlareCubic: return "flare_cubic";
        case Family::Custom: return "custom";
    }
    return "custom";
}

WarpingFunction::WarpingFunction(Expr e, FamilyTag tag)
    : expr_(std::move(e)), deriv_(expr_.derivative()), tag_(tag) {}

WarpingFunction WarpingFunction::from_expression(Expr sigma, FamilyTag tag, const WarpingOptions& options) {
    WarpingFunction w(std::move(sigma), tag);
    validate_warping(w, options);
    return w;
}

WarpingFunction WarpingFunction::euclidean() {
    return from_expression(Expr::variable(), {Family::Euclidean, 0.0});
}

WarpingFunction WarpingFunction::hyperbolic(double kappa) {
    if (!(kappa < 0.0)) throw ValidationError("kappa < 0", 0.0, "hyperbolic family needs negative curvature");
    const double a = std::sqrt(-kappa);
    const Expr t = Expr::variable();
    const Expr e = Expr::div(Expr::apply(Expr::Op::Sinh, Expr::mul(Expr::number(a), t)), Expr::number(a));
    return from_expression(e, {Family::Hyperbolic, kappa});
}

WarpingFunction WarpingFunction::cusp_cubic() {
    return from_expression(parse_expression("t*exp(-t^3)"), {Family::CuspCubic, 0.0});
}

WarpingFunction WarpingFunction::flare_cubic() {
    return from_expression(parse_expression("t*exp(t^3)"), {Family::FlareCubic, 0.0});
}

WarpingFunction WarpingFunction::family(std::string_view name, double kappa) {
    if (name == "euclidean") return euclidean();
    if (name == "hyperbolic") return hyperbolic(kappa);
    if (name == "cusp_cubic") return cusp_cubic();
    if (name == "flare_cubic") return flare_cubic();
    throw ConfigError("unknown warping family '" + std::string(name) +
                      "' (expected euclidean, hyperbolic, cusp_cubic or flare_cubic)");
}

double WarpingFunction::log_slope(double t) const {
    const SignedLog s = log_value(t);
    const SignedLog d = log_derivative(t);
    if (s.sign <= 0 || !std::isfinite(s.log_abs)) {
        throw EvalError("sigma(" + fmt(t) + ") is not positive");
    }
    if (d.sign == 0) return 0.0;
    return d.sign * std::exp(d.log_abs - s.log_abs);
}

void validate_warping(const WarpingFunction& sigma, const WarpingOptions& options) {
    const double s0 = pole_sample(sigma.expr());
    if (!(std::fabs(s0) <= kPoleValueTol)) {
        throw ValidationError("sigma(0) = 0", 0.0, "sigma(0)=" + fmt(s0));
    }
    const double d0 = pole_sample(sigma.deriv());
    if (!(std::fabs(d0 - 1.0) <= kPoleSlopeTol)) {
        throw ValidationError("sigma'(0) = 1", 0.0, "sigma'(0)=" + fmt(d0) + " != 1");
    }
    const int n = std::max(options.probe_points, 2);
    const double lo = std::log(1e-6);
    const double hi = std::log(options.t_max);
    for (int i = 0; i < n; ++i) {
        const double t = std::exp(lo + (hi - lo) * i / (n - 1));
        const SignedLog v = sigma.log_value(t);
        if (v.sign <= 0 || std::isnan(v.log_abs)) {
            throw ValidationError("sigma(t) > 0", t, "sigma is not positive");
        }
    }
}

WarpingFunction parse_sigma(std::string_view text, const WarpingOptions& options) {
    return WarpingFunction::from_expression(parse_expression(text, "t"), {Family::Custom, 0.0}, options);
}

ModelManifold::ModelManifold(int m, WarpingFunction sigma) : m_(m), sigma_(std::move(sigma)) {
    if (m < 1) throw ValidationError("m >= 1", 0.0, "dimension " + std::to_string(m));
}

double log_sigma_pow(const ModelManifold& manifold, double t) {
    if (manifold.m() == 1) return 0.0;
    const SignedLog s = manifold.sigma().log_value(t);
    if (s.sign <= 0 || std::isnan(s.log_abs)) {
        throw EvalError("sigma(" + fmt(t) + ") <= 0");
    }
    return (manifold.m() - 1) * s.log_abs;
}

double unit_sphere_area(int m) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m);
}

LogSlopeBound sigma_log_derivative_inf(const ModelManifold& manifold, double horizon) {
    if (!(horizon > 0.0)) throw EvalError("horizon must be positive");
    const WarpingFunction& sigma = manifold.sigma();
    constexpr int kPoints = 241;
    const double lo = std::log(std::min(1e-3, horizon * 1e-4));
    const double hi = std::log(horizon);
    LogSlopeBound out{std::numeric_limits<double>::infinity(), horizon, LogSlopeBound::Trend::Bounded};
    for (int i = 0; i < kPoints; ++i) {
        const double t = i + 1 == kPoints ? horizon : std::exp(lo + (hi - lo) * i / (kPoints - 1));
        const double r = sigma.log_slope(t);
        if (r < out.min_value) {
            out.min_value = r;
            out.argmin = t;
        }
    }
    // A drop over the last decade comparable to the value itself signals
    // sigma'/sigma -> -infinity rather than convergence to a finite bound.
    const double near_end = sigma.log_slope(horizon / 10.0);
    const double at_end = sigma.log_slope(horizon);
    if (near_end - at_end > 0.5 * std::max(1.0, std::fabs(near_end))) {
        out.trend = LogSlopeBound::Trend::DecreasingUnbounded;
    }
    return out;
}

std::string to_string(LogSlopeBound::Trend trend) {
    return trend == LogSlopeBound::Trend::Bounded ? "bounded" : "decreasing-unbounded";
}

}  // namespace pfeller
