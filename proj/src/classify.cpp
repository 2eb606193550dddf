#include "pfeller/classify.hpp"

#include "pfeller/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

namespace pfeller {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.69314718055994530942;

// Logs larger than this leave fewer than ~6 significant digits in a
// difference of two of them.
constexpr double kLogMagnitudeLimit = 4.5e9;

std::string fmt(double x, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    return os.str();
}

double log_ratio(double a, double b) {
    if (a == -kInf && b == -kInf) return -kInf;
    if (b == -kInf) return kInf;
    return a - b;
}

// log of q/(1-q) * exp(log_last), for q < 1 given as log_q
double log_geometric_tail(double log_last, double log_q) {
    if (log_q == -kInf || log_last == -kInf) return -kInf;
    return log_last + log_q - std::log(-std::expm1(log_q));
}

// log2 of a window ratio, with rounding noise around a flat ratio mapped to 0
double growth_exponent(double log_ratio_value) {
    const double g = log_ratio_value / kLn2;
    return std::fabs(g) < 1e-8 ? 0.0 : g;
}

void check_p(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw EvalError("exponent p must lie in (1, inf), got " + fmt(p));
}

// Throws PrecisionLimit when the difference of two large logs is meaningless.
double guarded_difference(double x, double y, double t) {
    if (std::max(std::fabs(x), std::fabs(y)) > kLogMagnitudeLimit && std::isfinite(x) && std::isfinite(y)) {
        throw PrecisionLimit("log-ratio loses precision at t=" + fmt(t));
    }
    return x - y;
}

// Largest r0 2^k (k <= windows) whose weight log stays inside the precision limit.
double cumulative_horizon(const ModelManifold& manifold, double r0, int windows) {
    double hi = r0 * 2.0;
    for (int k = 2; k <= windows; ++k) {
        const double t = r0 * std::ldexp(1.0, k);
        double w;
        try {
            w = log_sigma_pow(manifold, t);
        } catch (const EvalError&) {
            break;
        }
        if (std::fabs(w) > kLogMagnitudeLimit) break;
        hi = t;
    }
    return hi;
}

ConvergenceVerdict hint_verdict(bool converges, const std::string& why, ConvergenceVerdict numeric) {
    ConvergenceVerdict v = std::move(numeric);
    const VerdictStatus status = converges ? VerdictStatus::Converges : VerdictStatus::Diverges;
    if (v.status != status) {
        if (converges) {
            v.estimate = v.windows.empty() ? kInf : v.windows.back().partial;
            v.error_bound = kInf;
        } else {
            v.growth_exponent = 0.0;
        }
    }
    v.status = status;
    v.source = "asymptotic-hint";
    v.evidence = why + (v.evidence.empty() ? "" : "; quadrature: " + v.evidence);
    return v;
}

using MagnitudeFn = std::function<double(double, double)>;

// `magnitude(a, b)` bounds the logs that log_f cancels on [a, b]; the window
// quadrature tolerance is relaxed to the rounding noise this implies.
ConvergenceVerdict windowed_verdict(const quad::LogIntegrand& log_f, double r0, const VerdictPolicy& policy,
                                    const MagnitudeFn& magnitude);

ConvergenceVerdict run_or_record(const quad::LogIntegrand& f, double r0, const VerdictPolicy& policy,
                                 const MagnitudeFn& magnitude = nullptr) {
    try {
        if (magnitude) return windowed_verdict(f, r0, policy, magnitude);
        return improper_integral_verdict(f, r0, policy);
    } catch (const EvalError& e) {
        ConvergenceVerdict v;
        v.evidence = std::string("quadrature failed: ") + e.what();
        return v;
    }
}

}  // namespace

std::string to_string(VerdictStatus status) {
    switch (status) {
        case VerdictStatus::Converges: return "Converges";
        case VerdictStatus::Diverges: return "Diverges";
        case VerdictStatus::Inconclusive: return "Inconclusive";
    }
    return "Inconclusive";
}

std::string to_string(Tristate t) {
    switch (t) {
        case Tristate::True: return "true";
        case Tristate::False: return "false";
        case Tristate::Unknown: return "unknown";
    }
    return "unknown";
}

std::string to_string(FellerBranch b) {
    switch (b) {
        case FellerBranch::NonParabolic: return "non-parabolic";
        case FellerBranch::ParabolicInfiniteVolume: return "parabolic, infinite volume";
        case FellerBranch::ParabolicTail: return "parabolic, divergent tail ratio";
        case FellerBranch::Fails: return "none";
        case FellerBranch::Undecided: return "undecided";
    }
    return "undecided";
}

ConvergenceVerdict improper_integral_verdict(const quad::LogIntegrand& log_f, double r0, const VerdictPolicy& policy) {
    return windowed_verdict(log_f, r0, policy, nullptr);
}

namespace {

ConvergenceVerdict windowed_verdict(const quad::LogIntegrand& log_f, double r0, const VerdictPolicy& policy,
                                    const MagnitudeFn& magnitude) {
    if (!(r0 > 0.0)) throw EvalError("lower limit must be positive");
    ConvergenceVerdict out;
    std::vector<double> increments;  // log of window integrals
    double log_partial = -kInf;
    double log_quad_error = -kInf;
    std::string stop_note;

    const auto ratio_at = [&](std::size_t k) { return log_ratio(increments[k], increments[k - 1]); };
    const auto run_max = [&](std::size_t n) {
        double worst = -kInf;
        for (std::size_t k = n - policy.ratio_run; k < n; ++k) worst = std::max(worst, ratio_at(k));
        return worst;
    };
    const auto run_min = [&](std::size_t n) {
        double least = kInf;
        for (std::size_t k = n - policy.ratio_run; k < n; ++k) least = std::min(least, ratio_at(k));
        return least;
    };
    const double log_threshold = std::log(policy.ratio_threshold);
    const double log_diverge = std::log(policy.diverge_ratio);

    for (int k = 1; k <= policy.windows; ++k) {
        const double a = r0 * std::ldexp(1.0, k - 1);
        const double b = 2.0 * a;
        quad::LogIntegral piece;
        try {
            quad::AdaptiveOptions opts = policy.quadrature;
            if (magnitude) {
                opts.rel_tol = std::max(opts.rel_tol, 64 * std::numeric_limits<double>::epsilon() * magnitude(a, b));
            }
            piece = quad::integrate_log(log_f, a, b, opts);
        } catch (const PrecisionLimit& e) {
            stop_note = std::string("stopped at window ") + std::to_string(k) + ": " + e.what();
            break;
        }
        increments.push_back(piece.log_value);
        log_partial = quad::log_add(log_partial, piece.log_value);
        log_quad_error = quad::log_add(log_quad_error, piece.log_error);
        out.windows.push_back({b, std::exp(log_partial), log_partial});

        const std::size_t n = increments.size();
        if (n < static_cast<std::size_t>(policy.ratio_run) + 1) continue;

        if (log_partial == -kInf) continue;  // identically zero so far
        const double worst = run_max(n);
        if (worst <= log_threshold) {
            const double tail = log_geometric_tail(increments.back(), worst);
            const double target = quad::log_add(std::log(policy.target_abs_tol), std::log(policy.target_rel_tol) + log_partial);
            if (tail <= target) {
                out.status = VerdictStatus::Converges;
                out.estimate = std::exp(quad::log_add(log_partial, tail));
                out.error_bound = std::exp(quad::log_add(tail, log_quad_error));
                out.evidence = "geometric decay, window ratio <= " + fmt(std::exp(worst)) + " over last " +
                               std::to_string(policy.ratio_run) + " windows";
                return out;
            }
        }
        if (run_min(n) >= log_diverge) {
            out.status = VerdictStatus::Diverges;
            out.growth_exponent = growth_exponent(ratio_at(n - 1));
            out.evidence = "window increments nondecreasing over last " + std::to_string(policy.ratio_run) +
                           " windows (ratio " + fmt(std::exp(ratio_at(n - 1))) + ")";
            return out;
        }
    }

    const std::size_t n = increments.size();
    const auto finish_inconclusive = [&](const std::string& why) {
        out.status = VerdictStatus::Inconclusive;
        out.evidence = why + (stop_note.empty() ? "" : "; " + stop_note);
        return out;
    };
    if (n < static_cast<std::size_t>(policy.ratio_run) + 1) {
        return finish_inconclusive("only " + std::to_string(n) + " windows evaluated");
    }
    if (log_partial == -kInf) {
        out.status = VerdictStatus::Converges;
        out.estimate = 0.0;
        out.error_bound = 0.0;
        out.evidence = "integrand vanishes on every window";
        return out;
    }

    // geometric decay whose tail is not yet at the target but acceptable
    const double worst = run_max(n);
    if (worst <= log_threshold) {
        const double tail = log_geometric_tail(increments.back(), worst);
        if (tail <= std::log(policy.accept_rel_tol) + log_partial) {
            out.status = VerdictStatus::Converges;
            out.estimate = std::exp(quad::log_add(log_partial, tail));
            out.error_bound = std::exp(quad::log_add(tail, log_quad_error));
            out.evidence = "geometric decay, window ratio <= " + fmt(std::exp(worst)) + "; tail fraction " +
                           fmt(std::exp(tail - log_partial)) + (stop_note.empty() ? "" : "; " + stop_note);
            return out;
        }
    }
    if (ratio_at(n - 1) >= 0.0) {
        out.status = VerdictStatus::Diverges;
        out.growth_exponent = growth_exponent(ratio_at(n - 1));
        out.evidence = "window increments growing at the last window" + (stop_note.empty() ? "" : "; " + stop_note);
        return out;
    }

    // power model in log t: dI_k ~ C u_k^{-a}, u_k = log of the window's geometric midpoint
    const std::size_t fit = std::min<std::size_t>(static_cast<std::size_t>(policy.power_fit_windows), n);
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t k = n - fit; k < n; ++k) {
        const double u = std::log(out.windows[k].upper) - 0.5 * kLn2;
        if (u <= 1.0 || !std::isfinite(increments[k])) continue;
        xs.push_back(std::log(u));
        ys.push_back(increments[k]);
    }
    if (xs.size() < 3) return finish_inconclusive("too few windows beyond t = e for a power-law fit");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double a = -sxy / sxx;
    if (a >= policy.power_converge) {
        const double u_last = std::log(out.windows.back().upper) - 0.5 * kLn2;
        // sum_{j>K} C u_j^{-a} ~ int_{K+1/2}^inf C (u_K + (j-K) log 2)^{-a} dj
        const double log_tail = increments.back() + a * std::log(u_last) + (1.0 - a) * std::log(u_last + 0.5 * kLn2) -
                                std::log((a - 1.0) * kLn2);
        const double tail = std::exp(log_tail);
        out.status = VerdictStatus::Converges;
        out.estimate = std::exp(log_partial) + tail;
        out.error_bound = 0.1 * tail + std::exp(log_quad_error);
        out.evidence = "power-law decay in log t with exponent " + fmt(a) + "; extrapolated tail " + fmt(tail) +
                       (stop_note.empty() ? "" : "; " + stop_note);
        return out;
    }
    if (a <= policy.power_diverge) {
        out.status = VerdictStatus::Diverges;
        out.growth_exponent = growth_exponent(ratio_at(n - 1));
        out.evidence = "increments decay like (log t)^-" + fmt(a) + ", too slowly to be summable" +
                       (stop_note.empty() ? "" : "; " + stop_note);
        return out;
    }
    return finish_inconclusive("borderline decay (log t)^-" + fmt(a) + " between the power thresholds " +
                               fmt(policy.power_diverge) + " and " + fmt(policy.power_converge));
}

}  // namespace

ConvergenceVerdict is_p_hyperbolic(const ModelManifold& manifold, double p, const ClassifyOptions& options) {
    check_p(p);
    const double beta = static_cast<double>(manifold.m() - 1) / (p - 1.0);
    const auto f = [&](double t) { return -log_sigma_pow(manifold, t) / (p - 1.0); };
    ConvergenceVerdict v = run_or_record(f, options.r0, options.policy);
    if (options.hint) {
        const AsymptoticHint& h = *options.hint;
        bool conv;
        if (manifold.m() == 1) conv = false;
        else if (h.c > 0) conv = true;
        else if (h.c < 0) conv = false;
        else conv = h.b * beta > 1.0;
        return hint_verdict(conv, "hint: sigma^{-(m-1)/(p-1)} ~ t^" + fmt(-h.b * beta) + " exp(" + fmt(-h.c * beta) +
                                      " t^" + fmt(h.a) + ")",
                            std::move(v));
    }
    return v;
}

ConvergenceVerdict is_p_stochastically_complete(const ModelManifold& manifold, double p, const ClassifyOptions& options) {
    check_p(p);
    const double hi = cumulative_horizon(manifold, options.r0, options.policy.windows);
    const auto weight = [&](double t) { return t > 0 ? log_sigma_pow(manifold, t) : -kInf; };
    std::shared_ptr<quad::LogCumulative> volume;
    const auto f = [&](double t) {
        if (!volume) volume = std::make_shared<quad::LogCumulative>(weight, 0.0, hi, 4, options.policy.quadrature);
        return guarded_difference(volume->log_forward(t), log_sigma_pow(manifold, t), t) / (p - 1.0);
    };
    const auto magnitude = [&](double a, double b) {
        return std::max(std::fabs(log_sigma_pow(manifold, a)), std::fabs(log_sigma_pow(manifold, b)));
    };
    ConvergenceVerdict v = run_or_record(f, options.r0, options.policy, magnitude);
    if (options.hint) {
        const AsymptoticHint& h = *options.hint;
        bool conv = false;
        if (manifold.m() > 1 && h.c > 0) conv = h.a > p;  // integrand ~ t^{(1-a)/(p-1)}
        return hint_verdict(conv, "hint: volume ratio ~ t^" + fmt(h.c > 0 ? 1 - h.a : 1.0), std::move(v));
    }
    return v;
}

FellerVerdict is_p_feller(const ModelManifold& manifold, double p, const ClassifyOptions& options) {
    check_p(p);
    FellerVerdict out;
    out.hyperbolic = is_p_hyperbolic(manifold, p, options);
    if (out.hyperbolic.converges()) {
        out.feller = Tristate::True;
        out.branch = FellerBranch::NonParabolic;
        return out;
    }
    if (!out.hyperbolic.diverges()) return out;

    const auto weight = [&](double t) { return log_sigma_pow(manifold, t); };
    ConvergenceVerdict volume = run_or_record(weight, options.r0, options.policy);
    if (options.hint) {
        const AsymptoticHint& h = *options.hint;
        const int e = manifold.m() - 1;
        bool conv;
        if (e == 0) conv = false;
        else if (h.c > 0) conv = false;
        else if (h.c < 0) conv = true;
        else conv = h.b * e < -1.0;
        volume = hint_verdict(conv, "hint: sigma^{m-1} ~ t^" + fmt(h.b * e) + " exp(" + fmt(h.c * e) + " t^" +
                                        fmt(h.a) + ")",
                              std::move(volume));
    }
    out.volume = volume;
    if (volume.diverges()) {
        out.feller = Tristate::True;
        out.branch = FellerBranch::ParabolicInfiniteVolume;
        return out;
    }
    if (!volume.converges()) return out;

    const double hi = cumulative_horizon(manifold, options.r0, options.policy.windows + 1);
    std::shared_ptr<quad::LogCumulative> tail;
    const auto f = [&](double t) {
        if (!tail) tail = std::make_shared<quad::LogCumulative>(weight, options.r0, hi, 4, options.policy.quadrature);
        return guarded_difference(tail->log_tail(t), log_sigma_pow(manifold, t), t) / (p - 1.0);
    };
    const auto magnitude = [&](double a, double b) {
        return std::max(std::fabs(log_sigma_pow(manifold, a)), std::fabs(log_sigma_pow(manifold, b)));
    };
    ConvergenceVerdict ratio = run_or_record(f, options.r0, options.policy, magnitude);
    if (options.hint) {
        const AsymptoticHint& h = *options.hint;
        const bool conv = h.c < 0 && h.a > p;
        ratio = hint_verdict(conv, "hint: tail ratio ~ t^" + fmt(h.c < 0 ? 1 - h.a : 1.0), std::move(ratio));
    }
    out.tail_ratio = ratio;
    if (ratio.diverges()) {
        out.feller = Tristate::True;
        out.branch = FellerBranch::ParabolicTail;
    } else if (ratio.converges()) {
        out.feller = Tristate::False;
        out.branch = FellerBranch::Fails;
    }
    return out;
}

bool ClassificationReport::any_inconclusive() const {
    return hyperbolic.status == VerdictStatus::Inconclusive ||
           stochastically_complete.status == VerdictStatus::Inconclusive || feller.feller == Tristate::Unknown;
}

bool ClassificationReport::consistent() const {
    if (hyperbolic.converges() && feller.feller != Tristate::True) return false;
    const bool parabolic_branch =
        feller.branch == FellerBranch::ParabolicTail || feller.branch == FellerBranch::ParabolicInfiniteVolume;
    if (parabolic_branch && !hyperbolic.diverges()) return false;
    // every p-parabolic manifold is p-stochastically complete
    if (parabolic_branch && stochastically_complete.converges()) return false;
    return true;
}

ClassificationReport classify(const ModelManifold& manifold, double p, const ClassifyOptions& options) {
    ClassificationReport r{p, manifold.m(), manifold.sigma().text(), manifold.sigma().tag().name(), {}, {}, {}};
    r.feller = is_p_feller(manifold, p, options);
    r.hyperbolic = r.feller.hyperbolic;
    r.stochastically_complete = is_p_stochastically_complete(manifold, p, options);
    return r;
}

double log_volume_ball(const ModelManifold& manifold, double r) {
    if (!(r > 0.0)) throw EvalError("radius must be positive");
    const auto weight = [&](double t) { return t > 0 ? log_sigma_pow(manifold, t) : -kInf; };
    const double log_integral = quad::integrate_log(weight, 0.0, r, {1e-13, 2000}).log_value;
    return std::log(unit_sphere_area(manifold.m())) + log_integral;
}

double volume_ball(const ModelManifold& manifold, double r) { return std::exp(log_volume_ball(manifold, r)); }

}  // namespace pfeller
