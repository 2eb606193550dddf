#include "pfeller/quadrature.hpp"

#include "pfeller/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace pfeller::quad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// A log-integrand varying by more than this across one panel is treated as
// exponentially steep.
constexpr double kSteepRange = 30.0;

// log((exp(d) - 1) / d)
double log_exp_mean(double d) {
    if (d == 0.0) return 0.0;
    if (std::fabs(d) < 1e-8) return std::log1p(0.5 * d);
    if (d > 0.0) return d + std::log(-std::expm1(-d)) - std::log(d);
    return std::log(-std::expm1(d)) - std::log(-d);
}

double eval_checked(const LogIntegrand& f, double t) {
    const double g = f(t);
    if (std::isnan(g)) {
        std::ostringstream os;
        os.precision(17);
        os << "integrand is not a number at t=" << t;
        throw EvalError(os.str());
    }
    return g;
}

struct Panel {
    double a;
    double b;
    double log_value;
    double log_error;
    bool frozen;  // too narrow to split further
};

struct PanelOrder {
    bool operator()(const Panel& x, const Panel& y) const { return x.log_error < y.log_error; }
};

// Integral of exp(g) over the piecewise-linear interpolant of g through
// (xs[i], gs[i]) taken with the given stride.
double log_linear_rule(const std::array<double, 17>& xs, const std::array<double, 17>& gs, int stride) {
    double acc = -kInf;
    int prev = -1;
    for (int i = 0; i < 17; i += stride) {
        if (!std::isfinite(gs[i]) && gs[i] < 0) {
            prev = -1;
            continue;
        }
        if (prev >= 0) {
            const double dx = xs[i] - xs[prev];
            if (dx > 0) acc = log_add(acc, std::log(dx) + gs[prev] + log_exp_mean(gs[i] - gs[prev]));
        }
        prev = i;
    }
    return acc;
}

Panel evaluate_panel(const LogIntegrand& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);

    // xs sorted ascending: a, 15 Kronrod nodes, b
    std::array<double, 17> xs{};
    std::array<double, 17> gs{};
    xs[0] = a;
    xs[16] = b;
    for (int j = 0; j < 7; ++j) {
        xs[1 + j] = center - half * kXgk[j];
        xs[15 - j] = center + half * kXgk[j];
    }
    xs[8] = center;
    for (int i = 1; i < 16; ++i) gs[i] = eval_checked(f, xs[i]);

    double gmax = -kInf;
    double gmin = kInf;
    for (int i = 1; i < 16; ++i) {
        gmax = std::max(gmax, gs[i]);
        gmin = std::min(gmin, gs[i]);
    }
    if (gmax == kInf) throw EvalError("integrand overflows log scale");

    Panel p{a, b, -kInf, -kInf, false};
    if (gmax == -kInf) {
        // identically zero at the interior nodes; trust it only if the ends agree
        gs[0] = f(a);
        gs[16] = f(b);
        if (!(gs[0] > -kInf) && !(gs[16] > -kInf)) return p;
    }

    double kron = 0.0;
    double gauss = 0.0;
    if (gmax > -kInf) {
        for (int j = 0; j < 7; ++j) {
            const double lo = std::exp(gs[1 + j] - gmax);
            const double hi = std::exp(gs[15 - j] - gmax);
            kron += kWgk[j] * (lo + hi);
            if (j % 2 == 1) gauss += kWg[j / 2] * (lo + hi);
        }
        const double mid = std::exp(gs[8] - gmax);
        kron += kWgk[7] * mid;
        gauss += kWg[3] * mid;
    }
    const double log_half = std::log(half);
    const double log_kron = kron > 0 ? gmax + log_half + std::log(kron) : -kInf;
    const double log_gk_err = kron > 0 || gauss > 0
                                  ? gmax + log_half + std::log(std::fabs(kron - gauss) + 1e-300)
                                  : -kInf;

    bool steep = gmax - gmin > kSteepRange;
    if (!steep) {
        gs[0] = eval_checked(f, a);
        gs[16] = eval_checked(f, b);
        steep = std::max(gs[0], gs[16]) > gmax + 1.0;
    }
    if (!steep) {
        p.log_value = log_kron;
        p.log_error = log_gk_err;
        return p;
    }

    gs[0] = eval_checked(f, a);
    gs[16] = eval_checked(f, b);
    if (gs[0] == kInf || gs[16] == kInf) throw EvalError("integrand overflows log scale");
    const double fine = log_linear_rule(xs, gs, 1);
    const double coarse = log_linear_rule(xs, gs, 2);
    p.log_value = fine;
    if (fine == -kInf && coarse == -kInf) {
        p.log_error = -kInf;
    } else if (fine >= coarse) {
        p.log_error = log_sub(fine, coarse);
    } else {
        p.log_error = log_sub(coarse, fine);
    }
    return p;
}

}  // namespace

double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -kInf) return a;
    if (a == kInf) return kInf;
    return a + std::log1p(std::exp(b - a));
}

double log_sub(double a, double b) {
    if (b == -kInf) return a;
    if (a <= b) return -kInf;
    return a + std::log(-std::expm1(b - a));
}

LogIntegral integrate_log(const LogIntegrand& log_f, double a, double b, const AdaptiveOptions& options) {
    if (!(b > a)) return {-kInf, -kInf, 0};
    std::priority_queue<Panel, std::vector<Panel>, PanelOrder> queue;
    std::vector<Panel> done;
    queue.push(evaluate_panel(log_f, a, b));
    int panels = 1;
    const double log_tol = std::log(options.rel_tol);

    for (;;) {
        double total = -kInf;
        double error = -kInf;
        auto accumulate = [&](const Panel& p) {
            total = log_add(total, p.log_value);
            error = log_add(error, p.log_error);
        };
        for (const Panel& p : done) accumulate(p);
        // priority_queue has no iteration; copy is cheap at these sizes
        auto copy = queue;
        while (!copy.empty()) {
            accumulate(copy.top());
            copy.pop();
        }
        // exp(g) carries a relative rounding error of about eps |g|
        const double floor = 64 * std::numeric_limits<double>::epsilon() * std::fabs(total);
        const double tol = std::max(log_tol, std::isfinite(total) && floor > 0 ? std::log(floor) : -kInf);
        const bool converged = error == -kInf || error <= total + tol;
        if (converged || queue.empty() || panels >= options.max_panels) {
            return {total, error, panels};
        }
        Panel worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const double scale = std::max(std::fabs(worst.a), std::fabs(worst.b));
        if (!(mid > worst.a && mid < worst.b) || worst.b - worst.a < 1e-13 * scale) {
            worst.frozen = true;
            done.push_back(worst);
            continue;
        }
        queue.push(evaluate_panel(log_f, worst.a, mid));
        queue.push(evaluate_panel(log_f, mid, worst.b));
        ++panels;
    }
}

LogCumulative::LogCumulative(LogIntegrand log_f, double lo, double hi, int knots_per_octave,
                             const AdaptiveOptions& options)
    : log_f_(std::move(log_f)), options_(options) {
    if (!(hi > lo) || lo < 0) throw EvalError("cumulative integral needs 0 <= lo < hi");
    const double step = std::pow(2.0, 1.0 / knots_per_octave);
    knots_.push_back(lo);
    double t = lo > 0 ? lo * step : std::min(std::pow(2.0, -10.0), hi);
    while (t < hi * (1 - 1e-9)) {
        knots_.push_back(t);
        t *= step;
    }
    knots_.push_back(hi);

    const std::size_t n = knots_.size();
    std::vector<double> pieces(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        pieces[i] = integrate_log(log_f_, knots_[i], knots_[i + 1], options_).log_value;
    }
    forward_.assign(n, -kInf);
    for (std::size_t i = 1; i < n; ++i) forward_[i] = log_add(forward_[i - 1], pieces[i - 1]);

    // remainder beyond hi: the octave [hi, 2hi] plus a geometric series seeded by [2hi, 4hi]
    double remainder = -kInf;
    if (hi >= 4 * lo && hi > 0) {
        double first = -kInf;
        double second;
        try {
            first = integrate_log(log_f_, hi, 2 * hi, options_).log_value;
            second = integrate_log(log_f_, 2 * hi, 4 * hi, options_).log_value;
        } catch (const EvalError&) {
            // f is not evaluable beyond hi: extrapolate from the last two octaves instead
            first = -kInf;
            second = integrate_log(log_f_, hi / 2, hi, options_).log_value;
            const double prev = integrate_log(log_f_, hi / 4, hi / 2, options_).log_value;
            if (second > -kInf && second >= prev) {
                tail_finite_ = false;
                remainder = kInf;
            } else if (second > -kInf) {
                const double log_q = second - prev;
                remainder = second + log_q - std::log(-std::expm1(log_q));
            }
        }
        if (first > -kInf) {
            const double log_q = second - first;
            if (log_q >= 0.0) {
                tail_finite_ = false;
                remainder = kInf;
            } else {
                remainder = log_add(first, second - std::log(-std::expm1(log_q)));
            }
        }
    }
    tail_.assign(n, -kInf);
    tail_[n - 1] = remainder;
    for (std::size_t i = n - 1; i-- > 0;) tail_[i] = log_add(tail_[i + 1], pieces[i]);
}

std::size_t LogCumulative::segment(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return 0;
    const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return std::min(i, knots_.size() - 2);
}

double LogCumulative::log_forward(double t) const {
    if (t <= knots_.front()) return -kInf;
    const std::size_t i = segment(t);
    return log_add(forward_[i], integrate_log(log_f_, knots_[i], t, options_).log_value);
}

double LogCumulative::log_tail(double t) const {
    if (t >= knots_.back()) {
        return log_sub(tail_.back(), integrate_log(log_f_, knots_.back(), t, options_).log_value);
    }
    const std::size_t i = segment(std::max(t, knots_.front()));
    return log_add(tail_[i + 1], integrate_log(log_f_, std::max(t, knots_.front()), knots_[i + 1], options_).log_value);
}

}  // namespace pfeller::quad
