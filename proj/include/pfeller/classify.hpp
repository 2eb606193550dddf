#pragma once

#include "pfeller/quadrature.hpp"
#include "pfeller/warping.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pfeller {

enum class VerdictStatus { Converges, Diverges, Inconclusive };

std::string to_string(VerdictStatus status);

/// Partial integral over [r0, upper].
struct Window {
    double upper;
    double partial;      ///< may be +inf when only the log is representable
    double log_partial;
};

/// Judgment on whether a nonnegative integrand belongs to L^1(+infinity).
struct ConvergenceVerdict {
    VerdictStatus status = VerdictStatus::Inconclusive;
    double estimate = 0.0;         ///< Converges: value of the improper integral
    double error_bound = 0.0;      ///< Converges: tail bound plus quadrature error
    double growth_exponent = 0.0;  ///< Diverges: log2 of the last window ratio (0 = logarithmic)
    std::string evidence;
    std::string source = "quadrature";  ///< or "asymptotic-hint"
    std::vector<Window> windows;

    bool converges() const { return status == VerdictStatus::Converges; }
    bool diverges() const { return status == VerdictStatus::Diverges; }
};

/// Knobs of the doubling-window engine. Window k covers [r0 2^{k-1}, r0 2^k].
struct VerdictPolicy {
    int windows = 40;
    /// Converges needs this many consecutive window ratios below ratio_threshold.
    int ratio_run = 5;
    double ratio_threshold = 0.9;
    /// Diverges needs ratio_run consecutive ratios at or above this.
    double diverge_ratio = 0.999;
    /// Stop early once the extrapolated tail is below this fraction of the partial sum.
    double target_rel_tol = 1e-10;
    double target_abs_tol = 1e-14;
    /// Largest tail fraction for which a geometric Converges is still reported.
    double accept_rel_tol = 1e-2;
    /// Logarithmic-scale power model dI_k ~ C (log t_k)^{-a}: Converges for
    /// a >= power_converge, Diverges for a <= power_diverge, else Inconclusive.
    double power_converge = 1.5;
    double power_diverge = 0.5;
    int power_fit_windows = 8;
    quad::AdaptiveOptions quadrature{};
};

/// Doubling-window decision for int_{r0}^{inf} f with f given as log f.
/// Throws EvalError (other than PrecisionLimit, which ends the window scan).
ConvergenceVerdict improper_integral_verdict(const quad::LogIntegrand& log_f, double r0,
                                             const VerdictPolicy& policy = {});

/// sigma(t) ~ K t^b exp(c t^a) as t -> infinity (a > 0 when c != 0).
struct AsymptoticHint {
    double c = 0.0;
    double a = 1.0;
    double b = 0.0;
};

struct ClassifyOptions {
    VerdictPolicy policy{};
    double r0 = 1.0;
    std::optional<AsymptoticHint> hint;
};

/// Verdict for int^inf sigma^{-(m-1)/(p-1)}; Converges iff p-hyperbolic.
ConvergenceVerdict is_p_hyperbolic(const ModelManifold& manifold, double p, const ClassifyOptions& options = {});

/// Verdict for int^inf (int_0^r sigma^{m-1} / sigma^{m-1}(r))^{1/(p-1)} dr;
/// Diverges iff p-stochastically complete.
ConvergenceVerdict is_p_stochastically_complete(const ModelManifold& manifold, double p,
                                                const ClassifyOptions& options = {});

enum class Tristate { True, False, Unknown };

std::string to_string(Tristate t);

enum class FellerBranch {
    NonParabolic,             ///< sigma^{-(m-1)/(p-1)} in L^1
    ParabolicInfiniteVolume,  ///< not in L^1 and int^inf sigma^{m-1} = inf, so the tail condition holds
    ParabolicTail,            ///< not in L^1 and the tail-ratio integral diverges
    Fails,                    ///< not in L^1 and the tail-ratio integral converges
    Undecided,
};

std::string to_string(FellerBranch b);

struct FellerVerdict {
    Tristate feller = Tristate::Unknown;
    FellerBranch branch = FellerBranch::Undecided;
    ConvergenceVerdict hyperbolic;
    std::optional<ConvergenceVerdict> volume;      ///< int^inf sigma^{m-1}
    std::optional<ConvergenceVerdict> tail_ratio;  ///< (int_r^inf sigma^{m-1} / sigma^{m-1}(r))^{1/(p-1)}
};

FellerVerdict is_p_feller(const ModelManifold& manifold, double p, const ClassifyOptions& options = {});

struct ClassificationReport {
    double p;
    int m;
    std::string sigma;
    std::string family;
    ConvergenceVerdict hyperbolic;
    ConvergenceVerdict stochastically_complete;
    FellerVerdict feller;

    bool any_inconclusive() const;
    /// hyperbolic => Feller, Feller through a parabolic branch => parabolic,
    /// and parabolic => stochastically complete.
    bool consistent() const;
};

ClassificationReport classify(const ModelManifold& manifold, double p, const ClassifyOptions& options = {});

/// c_m int_0^r sigma^{m-1}; may be +inf for very fast growing sigma.
double volume_ball(const ModelManifold& manifold, double r);
double log_volume_ball(const ModelManifold& manifold, double r);

}  // namespace pfeller
