#pragma once

#include <functional>
#include <vector>

namespace pfeller::quad {

/// An integrand given as t -> log f(t). -inf encodes f(t) = 0; NaN is an error.
using LogIntegrand = std::function<double(double)>;

/// log(exp(a) + exp(b)) without overflow.
double log_add(double a, double b);

/// log(exp(a) - exp(b)) for a >= b; -inf when equal.
double log_sub(double a, double b);

struct AdaptiveOptions {
    double rel_tol = 1e-11;
    int max_panels = 600;
};

struct LogIntegral {
    double log_value;   ///< log of the integral
    double log_error;   ///< log of the absolute error estimate
    int panels;
};

/// Adaptive Gauss-Kronrod (7/15) quadrature of exp(log_f) over [a, b], carried
/// out entirely in log space. Panels on which log_f varies by tens of units
/// switch to an exponential-linear rule through the 17 sample points, which
/// stays accurate for integrands such as exp(2 t^3) whose mass sits in a
/// layer far thinner than any resolvable panel. Throws EvalError if log_f
/// returns NaN.
LogIntegral integrate_log(const LogIntegrand& log_f, double a, double b, const AdaptiveOptions& options = {});

/// Running integrals F(t) = int_lo^t f and T(t) = int_t^inf f of a
/// nonnegative integrand, cached on a geometric knot grid in log space.
///
/// Evaluating at t integrates only the piece between t and the neighbouring
/// knot, so tails such as exp(-2 t^3)/6 are obtained without cancellation.
/// The tail beyond the last knot is extrapolated geometrically from the last
/// two octaves.
class LogCumulative {
public:
    LogCumulative(LogIntegrand log_f, double lo, double hi, int knots_per_octave = 4,
                  const AdaptiveOptions& options = {});

    double log_forward(double t) const;
    double log_tail(double t) const;

    /// False when the extrapolated remainder beyond `hi` does not decay.
    bool tail_finite() const { return tail_finite_; }
    double lo() const { return knots_.front(); }
    double hi() const { return knots_.back(); }

private:
    std::size_t segment(double t) const;

    LogIntegrand log_f_;
    AdaptiveOptions options_;
    std::vector<double> knots_;
    std::vector<double> forward_;  // log int_lo^{knot_i}
    std::vector<double> tail_;     // log int_{knot_i}^inf
    bool tail_finite_ = true;
};

}  // namespace pfeller::quad
