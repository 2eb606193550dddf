#include "pfeller/analysis.hpp"

#include "pfeller/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pfeller {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double safe_log(double x) { return x > 0 ? std::log(x) : -kInf; }

// Integral assembled cell by cell in log form, keyed by the cell midpoint radius.
struct LogCells {
    std::vector<double> mid;
    std::vector<double> log_value;
};

struct LogIntegral {
    double log_total;
    TailTrend trend;
};

// Compares the last quarter of the radial range with the one before it. A density of 1/r
// gives a ratio of at least log(4/3)/log(3/2) = 0.7095 on any range, so a smaller ratio
// decays faster than the borderline of divergence. On a bounded annulus (`exterior` false)
// the integral is over the whole domain and always finite.
LogIntegral summarize(const LogCells& cells, double a, double b, bool exterior) {
    double total = -kInf;
    double q3 = -kInf;
    double q4 = -kInf;
    const double len = b - a;
    for (std::size_t i = 0; i < cells.mid.size(); ++i) {
        const double lv = cells.log_value[i];
        total = log_add(total, lv);
        if (cells.mid[i] >= b - 0.25 * len)
            q4 = log_add(q4, lv);
        else if (cells.mid[i] >= b - 0.5 * len)
            q3 = log_add(q3, lv);
    }
    TailTrend trend = TailTrend::Undetermined;
    if (!exterior || total == -kInf || q4 == -kInf || q4 <= total + std::log(1e-14) || q4 <= q3 + std::log(0.7))
        trend = TailTrend::Finite;
    else if (q4 >= q3)
        trend = TailTrend::Divergent;
    return {total, trend};
}

std::vector<double> node_log_weights(const RadialSolution& s) {
    std::vector<double> w(s.grid.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = log_sigma_pow(s.manifold, s.grid[i]);
    return w;
}

// Nodes before the first small value (|u| < 1e-12 max|u|) that stops decreasing or nears
// underflow. For p != 2 the range also ends where a small solution has its slope inside
// the flux regularization, |u'| <= 100 eps.
std::size_t resolved_nodes(const RadialSolution& s) {
    const auto& u = s.values;
    const auto& r = s.grid.nodes();
    double mx = 0.0;
    for (double v : u) mx = std::max(mx, std::fabs(v));
    if (mx == 0.0) return u.size();
    const double eps = s.p == 2.0 ? 0.0 : 100 * s.epsilon_final;
    for (std::size_t i = 1; i < u.size(); ++i) {
        if (eps > 0 && std::fabs(u[i]) <= 1e-6 * mx && std::fabs(u[i] - u[i - 1]) <= eps * (r[i] - r[i - 1]))
            return std::max<std::size_t>(i + 1, 2);
        if (std::fabs(u[i]) >= 1e-12 * mx) continue;
        const bool stalls = i + 1 < u.size() && std::fabs(u[i + 1]) >= std::fabs(u[i]);
        if (stalls || std::fabs(u[i]) < 1e-280) return std::max<std::size_t>(i + 1, 2);
    }
    return u.size();
}

std::string cut_note(const RadialSolution& s, std::size_t n) {
    if (n == s.grid.size()) return "";
    return "; tail beyond r = " + std::to_string(s.grid[n - 1]) + " below resolution, excluded";
}

bool is_exterior(const RadialSolution& s) { return s.provenance == Provenance::ExhaustionLimit; }

double log_measure(const RadialSolution& s) { return std::log(unit_sphere_area(s.m())); }

std::vector<double> node_gradient(const RadialSolution& s) {
    const auto& r = s.grid.nodes();
    const auto& u = s.values;
    const std::size_t n = r.size();
    std::vector<double> g(n);
    g[0] = (u[1] - u[0]) / (r[1] - r[0]);
    g[n - 1] = (u[n - 1] - u[n - 2]) / (r[n - 1] - r[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (u[i + 1] - u[i - 1]) / (r[i + 1] - r[i - 1]);
    return g;
}

// u at the nodes of `target`, linear interpolation of `source`; nullopt outside its range.
std::vector<std::optional<double>> interpolate_onto(const RadialSolution& source, const RadialSolution& target) {
    const auto& xs = source.grid.nodes();
    const auto& ys = source.values;
    std::vector<std::optional<double>> out(target.grid.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = target.grid[i];
        if (r < xs.front() || r > xs.back()) continue;
        auto it = std::upper_bound(xs.begin(), xs.end(), r);
        if (it == xs.end()) {
            out[i] = ys.back();
            continue;
        }
        const std::size_t j = static_cast<std::size_t>(it - xs.begin());
        const double t = (r - xs[j - 1]) / (xs[j] - xs[j - 1]);
        out[i] = (1 - t) * ys[j - 1] + t * ys[j];
    }
    return out;
}

OrderingReport ordering(const RadialSolution& u, const RadialSolution& v, double alpha, double slack) {
    const auto vi = interpolate_onto(v, u);
    bool any = false;
    double worst = -kInf;
    for (std::size_t i = 0; i < vi.size(); ++i) {
        if (!vi[i]) continue;
        any = true;
        const double lhs = alpha == 1.0 ? u.values[i] : std::pow(std::max(u.values[i], 0.0), alpha);
        worst = std::max(worst, lhs - *vi[i]);
    }
    if (!any) throw GridMismatch("solution grids do not overlap");
    return {worst <= slack, worst};
}

}  // namespace

std::string to_string(DecayClass c) {
    switch (c) {
    case DecayClass::DecaysToZero:
        return "DecaysToZero";
    case DecayClass::PositiveLimit:
        return "PositiveLimit";
    case DecayClass::Undetermined:
        break;
    }
    return "Undetermined";
}

std::string to_string(TailTrend t) {
    switch (t) {
    case TailTrend::Finite:
        return "finite";
    case TailTrend::Divergent:
        return "divergent";
    case TailTrend::Undetermined:
        break;
    }
    return "undetermined";
}

DecayReport decay_limit(const RadialSolution& sol) {
    const auto& r = sol.grid.nodes();
    const auto& u = sol.values;
    const double a = r.front();
    const double b = r.back();
    const double q = b - 0.25 * (b - a);
    const double mid = b - 0.125 * (b - a);

    // trapezoid average of u over [lo, hi]; 1/r is averaged exactly below
    const auto average = [&](double lo, double hi) {
        double iu = 0.0;
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            const double x0 = std::max(r[i], lo);
            const double x1 = std::min(r[i + 1], hi);
            if (x1 <= x0) continue;
            const double h = r[i + 1] - r[i];
            const auto at = [&](double x) { return u[i] + (u[i + 1] - u[i]) * (x - r[i]) / h; };
            iu += 0.5 * (x1 - x0) * (at(x0) + at(x1));
        }
        return iu / (hi - lo);
    };
    const double A1 = average(q, mid);
    const double A2 = average(mid, b);
    const double s1 = std::log(mid / q) / (mid - q);
    const double s2 = std::log(b / mid) / (b - mid);
    double est = (A2 * s1 - A1 * s2) / (s1 - s2);
    est = std::clamp(est, 0.0, std::max(A2, 0.0));

    DecayReport rep{est, "tail-average+richardson(1/r)", q, b, A1, A2, DecayClass::Undetermined};
    if (b - a < 4 * a) {
        rep.method += ";window-shorter-than-4R";
        return rep;
    }
    const bool decreasing = A2 <= A1;
    const bool flat = std::fabs(A1 - A2) <= 0.01 * std::max(std::fabs(A1), std::fabs(A2));
    if (est < 1e-6 && decreasing)
        rep.classification = DecayClass::DecaysToZero;
    else if (est > 1e-3 && flat)
        rep.classification = DecayClass::PositiveLimit;
    return rep;
}

SupportReport detect_compact_support(const RadialSolution& sol, double tau_u, double tau_g, double min_fraction) {
    SupportReport rep{std::nullopt, std::nullopt, tau_u, tau_g};
    const auto& r = sol.grid.nodes();
    const auto& u = sol.values;
    const std::size_t n = r.size();

    std::size_t j = n;
    for (std::size_t k = n; k-- > 0;) {
        const double g = k + 1 < n ? (u[k + 1] - u[k]) / (r[k + 1] - r[k]) : (u[k] - u[k - 1]) / (r[k] - r[k - 1]);
        if (!(std::fabs(u[k]) < tau_u && std::fabs(g) < tau_g)) break;
        j = k;
    }
    if (j == n || r.back() - r[j] < min_fraction * (r.back() - r.front())) return rep;
    // exponential decay stays representable; a free boundary drives u below the normal range
    const bool vanishes = std::any_of(u.begin() + static_cast<std::ptrdiff_t>(j), u.end(),
                                      [](double v) { return std::fabs(v) < std::numeric_limits<double>::min(); });
    if (!vanishes) return rep;
    rep.support_radius = r[j];

    const auto& lam = sol.lambda;
    if (j == 0 || lam.kind() != LambdaSpec::Kind::PowerLaw || lam.xi() >= sol.p - 1) return rep;
    // u ~ c (s0 - r)^gamma near the free boundary, so u^{1/gamma} is nearly linear there
    const double gamma = sol.p / (sol.p - 1 - lam.xi());
    std::size_t k = j;
    while (k > 0 && u[k] < 1e3 * tau_u) --k;
    if (k == 0) return rep;
    const auto v = [&](std::size_t i) { return std::pow(std::max(u[i], 0.0), 1 / gamma); };
    const double vk = v(k);
    if (!(v(k - 1) > vk)) return rep;
    double s0 = r[k] + vk * (r[k] - r[k - 1]) / (v(k - 1) - vk);
    // quadratic through the levels v, 2v, 3v removes the curvature bias
    std::size_t i2 = k;
    while (i2 > 0 && v(i2) < 2 * vk) --i2;
    std::size_t i3 = i2;
    while (i3 > 0 && v(i3) < 3 * vk) --i3;
    if (i3 < i2 && i2 < k && v(i3) >= 3 * vk) {
        const double x[3] = {r[i3], r[i2], r[k]};
        const double y[3] = {v(i3), v(i2), vk};
        const auto poly = [&](double t, double& d) {
            double f = 0.0;
            d = 0.0;
            for (int a = 0; a < 3; ++a) {
                const int b = (a + 1) % 3;
                const int c = (a + 2) % 3;
                const double den = (x[a] - x[b]) * (x[a] - x[c]);
                f += y[a] * (t - x[b]) * (t - x[c]) / den;
                d += y[a] * (2 * t - x[b] - x[c]) / den;
            }
            return f;
        };
        double t = s0;
        for (int it = 0; it < 50; ++it) {
            double d = 0.0;
            const double f = poly(t, d);
            if (!(d < 0)) break;
            const double next = t - f / d;
            if (std::fabs(next - t) <= 1e-14 * std::fabs(t)) {
                t = next;
                break;
            }
            t = next;
        }
        double d = 0.0;
        if (t > r[k] && std::fabs(poly(t, d)) <= 1e-12 * vk) s0 = t;
    }
    rep.extrapolated_radius = s0;
    return rep;
}

NormReport lq_norm(const RadialSolution& sol, double q) {
    if (std::isinf(q)) {
        const double mx = *std::max_element(sol.values.begin(), sol.values.end());
        return {mx, TailTrend::Finite, "max"};
    }
    if (!(q > 0)) throw EvalError("lq_norm needs q > 0");
    const auto lw = node_log_weights(sol);
    const auto& r = sol.grid.nodes();
    const std::size_t n = resolved_nodes(sol);
    LogCells cells;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double f0 = q * safe_log(std::fabs(sol.values[i])) + lw[i];
        const double f1 = q * safe_log(std::fabs(sol.values[i + 1])) + lw[i + 1];
        cells.mid.push_back(0.5 * (r[i] + r[i + 1]));
        cells.log_value.push_back(std::log(0.5 * (r[i + 1] - r[i])) + log_add(f0, f1));
    }
    const auto s = summarize(cells, r.front(), r[n - 1], is_exterior(sol));
    const double value = std::exp((s.log_total + log_measure(sol)) / q);
    std::string note = "trapezoid on the solution grid" + cut_note(sol, n);
    if (q < sol.p - 1) note += "; q below p-1";
    return {value, s.trend, note};
}

WeightedNormReport weighted_sobolev_norm(const RadialSolution& sol, double C) {
    if (!(C > 0)) throw EvalError("weighted_sobolev_norm needs C > 0");
    const auto& r = sol.grid.nodes();
    const auto& u = sol.values;
    const double p = sol.p;
    const std::size_t n = resolved_nodes(sol);
    LogCells cells;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = r[i + 1] - r[i];
        const double c = 0.5 * (r[i] + r[i + 1]);
        const double uc = 0.5 * (u[i] + u[i + 1]);
        const double du = (u[i + 1] - u[i]) / h;
        const double body = log_add(p * safe_log(std::fabs(uc)), p * safe_log(std::fabs(du)));
        cells.mid.push_back(c);
        cells.log_value.push_back(std::log(h) + C * c + body + log_sigma_pow(sol.manifold, c));
    }
    const auto s = summarize(cells, r.front(), r[n - 1], is_exterior(sol));
    bool hypothesis = false;
    if (sol.lambda.kind() == LambdaSpec::Kind::PowerLaw)
        hypothesis = C < std::pow(sol.lambda.lambda() * p, 1 / p);
    return {std::exp(s.log_total + log_measure(sol)), s.trend, hypothesis};
}

GradientCheck gradient_lp_check(const RadialSolution& sol, std::optional<double> margin) {
    const double eps = margin.value_or(sol.grid[1] - sol.grid[0]);
    if (!(eps > 0)) throw EvalError("gradient_lp_check needs a positive margin");
    const auto un = lq_norm(sol, sol.p);
    if (un.trend != TailTrend::Finite)
        return {true, "u is not in L^p on this window (trend " + to_string(un.trend) + "); gradient check skipped",
                0.0, TailTrend::Undetermined};

    const auto& r = sol.grid.nodes();
    const auto g = node_gradient(sol);
    const auto lw = node_log_weights(sol);
    const double start = r.front() + eps;
    const std::size_t n = resolved_nodes(sol);
    LogCells cells;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (r[i] < start) continue;
        const double f0 = sol.p * safe_log(std::fabs(g[i])) + lw[i];
        const double f1 = sol.p * safe_log(std::fabs(g[i + 1])) + lw[i + 1];
        cells.mid.push_back(0.5 * (r[i] + r[i + 1]));
        cells.log_value.push_back(std::log(0.5 * (r[i + 1] - r[i])) + log_add(f0, f1));
    }
    if (cells.mid.empty()) return {true, "margin leaves no cells", 0.0, TailTrend::Undetermined};
    const auto s = summarize(cells, start, r[n - 1], is_exterior(sol));
    return {false, "u in L^p; gradient integrated from R + " + std::to_string(eps) + cut_note(sol, n),
            std::exp(s.log_total + log_measure(sol)), s.trend};
}

OrderingReport compare_ordering(const RadialSolution& u, const RadialSolution& v, double slack) {
    return ordering(u, v, 1.0, slack);
}

OrderingReport power_ordering(const RadialSolution& h_small, const RadialSolution& h_big, double alpha, double slack) {
    return ordering(h_small, h_big, alpha, slack);
}

PowerComparison lambda_power_comparison(const RadialSolution& h_small, const RadialSolution& h_big, double slack) {
    if (h_small.m() != h_big.m() || h_small.p != h_big.p || h_small.R() != h_big.R() ||
        h_small.manifold.sigma().text() != h_big.manifold.sigma().text())
        throw GridMismatch("comparison needs the same sigma, m, p and R");
    const auto& ls = h_small.lambda;
    const auto& lb = h_big.lambda;
    const double p = h_small.p;
    if (ls.kind() != LambdaSpec::Kind::PowerLaw || lb.kind() != LambdaSpec::Kind::PowerLaw || std::fabs(ls.xi() - (p - 1)) > 1e-12 ||
        std::fabs(lb.xi() - (p - 1)) > 1e-12)
        throw EvalError("comparison needs right-hand sides lambda u^{p-1}");
    if (ls.lambda() > lb.lambda()) throw EvalError("comparison needs lambda_small <= lambda");
    const double alpha = std::pow(lb.lambda() / ls.lambda(), 1 / (p - 1));
    return {alpha, ordering(h_small, h_big, alpha, slack)};
}

}  // namespace pfeller
