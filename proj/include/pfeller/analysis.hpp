#pragma once

#include "pfeller/radial_solver.hpp"

#include <optional>
#include <string>

namespace pfeller {

enum class DecayClass { DecaysToZero, PositiveLimit, Undetermined };

std::string to_string(DecayClass c);

struct DecayReport {
    double limit_estimate;
    std::string method;
    double window_start;
    double window_end;
    /// averages of u over the two halves of the trailing quarter
    double first_half_average;
    double second_half_average;
    DecayClass classification;
};

/// Limit of u at the outer end from the trailing quarter: half averages, then a
/// Richardson step assuming u ~ L + c/r.
DecayReport decay_limit(const RadialSolution& solution);

struct SupportReport {
    /// smallest node from which u < tau_u and |u'| < tau_g hold to the grid end
    std::optional<double> support_radius;
    /// free-boundary position r - gamma u/u' from the last well-resolved node,
    /// gamma = p/(p-1-xi), for power laws with xi < p-1
    std::optional<double> extrapolated_radius;
    double tau_u;
    double tau_g;
};

/// The flat stretch must also cover at least `min_fraction` of the grid length and
/// reach u = 0 (or a subnormal) somewhere.
SupportReport detect_compact_support(const RadialSolution& solution, double tau_u = 1e-8, double tau_g = 1e-8,
                                     double min_fraction = 0.1);

enum class TailTrend { Finite, Divergent, Undetermined };

std::string to_string(TailTrend t);

struct NormReport {
    double value;
    TailTrend trend;
    std::string note;
};

/// (c_m int u^q sigma^{m-1})^{1/q} over the grid, or max u for q = inf. The trend flag
/// extrapolates the tail only for exhaustion limits; annulus solutions live on a bounded domain.
/// Integrals stop where a small |u| (below 1e-12 max|u|) stops decreasing or nears underflow.
NormReport lq_norm(const RadialSolution& solution, double q);

struct WeightedNormReport {
    double value;
    TailTrend trend;
    /// C < (lambda p)^{1/p}, for power-law right-hand sides
    bool hypothesis_holds;
};

/// c_m int e^{C r} (u^p + |u'|^p) sigma^{m-1}.
WeightedNormReport weighted_sobolev_norm(const RadialSolution& solution, double C);

struct GradientCheck {
    bool skipped;
    std::string explanation;
    double value;
    TailTrend trend;
};

/// c_m int_{R+margin} |u'|^p sigma^{m-1}, checked only when u is in L^p.
/// The margin defaults to the first grid cell.
GradientCheck gradient_lp_check(const RadialSolution& solution, std::optional<double> margin = std::nullopt);

struct OrderingReport {
    bool holds;
    double max_violation;
};

/// u <= v + slack on the overlap of the two grids, v interpolated linearly onto u's nodes.
/// Throws GridMismatch when the grids do not overlap.
OrderingReport compare_ordering(const RadialSolution& u, const RadialSolution& v, double slack = 1e-8);

/// h_small^alpha <= h_big + slack on the overlap.
OrderingReport power_ordering(const RadialSolution& h_small, const RadialSolution& h_big, double alpha,
                              double slack = 1e-6);

struct PowerComparison {
    double alpha;
    OrderingReport ordering;
};

/// alpha = (lambda/lambda_small)^{1/(p-1)} from the two power-law problems.
/// Throws GridMismatch on mismatched data and EvalError unless lambda_small <= lambda.
PowerComparison lambda_power_comparison(const RadialSolution& h_small, const RadialSolution& h_big,
                                        double slack = 1e-6);

}  // namespace pfeller
