#include "pfeller/radial_solver.hpp"

#include "pfeller/errors.hpp"
#include "pfeller/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace pfeller {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 5-point Gauss-Legendre on [-1, 1]
constexpr double kX[5] = {-0.906179845938663992797627, -0.538469310105683091036314, 0.0,
                          0.538469310105683091036314, 0.906179845938663992797627};
constexpr double kW[5] = {0.236926885056189087514264, 0.478628670499366468041292, 0.568888888888888888888889,
                          0.478628670499366468041292, 0.236926885056189087514264};

std::string fmt(double x, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    return os.str();
}

// phi_{p,eps}(s) = (s^2 + eps^2)^{(p-2)/2} s and its derivative
double flux(double s, double p, double eps) {
    if (p == 2.0) return s;
    if (eps == 0.0) return s == 0.0 ? 0.0 : std::copysign(std::pow(std::fabs(s), p - 1), s);
    return std::pow(s * s + eps * eps, 0.5 * (p - 2)) * s;
}

double flux_derivative(double s, double p, double eps) {
    if (p == 2.0) return 1.0;
    const double q = s * s + eps * eps;
    if (q == 0.0) return p > 2 ? 0.0 : kInf;
    return std::pow(q, 0.5 * (p - 4)) * ((p - 1) * s * s + eps * eps);
}

// Log weights sigma^{m-1} at the nodes, and per cell the weight that makes the zero-load flux exact:
// (mean of w^{-1/(p-1)})^{-(p-1)}.
struct Weights {
    std::vector<double> node;
    std::vector<double> mid;
};

Weights log_weights(const ModelManifold& manifold, const Grid& grid, double p) {
    Weights w;
    const std::size_t n = grid.size();
    w.node.resize(n);
    w.mid.resize(n - 1);
    for (std::size_t i = 0; i < n; ++i) w.node[i] = log_sigma_pow(manifold, grid[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double c = 0.5 * (grid[i] + grid[i + 1]);
        const double half = 0.5 * (grid[i + 1] - grid[i]);
        std::array<double, 5> e{};
        for (std::size_t q = 0; q < 5; ++q) e[q] = -log_sigma_pow(manifold, c + half * kX[q]) / (p - 1);
        const double top = *std::max_element(e.begin(), e.end());
        double sum = 0.0;
        for (std::size_t q = 0; q < 5; ++q) sum += 0.5 * kW[q] * std::exp(e[q] - top);
        w.mid[i] = -(p - 1) * (top + std::log(sum));
    }
    return w;
}

// Row i (interior node) divided by the largest weight it touches: ratios stay <= 1
// however fast sigma^{m-1} grows or decays across the grid.
struct ScaledRow {
    double left;   // w_{i-1/2}
    double center; // w_i
    double right;  // w_{i+1/2}
};

std::vector<ScaledRow> scaled_rows(const Weights& w) {
    const std::size_t n = w.node.size();
    std::vector<ScaledRow> rows(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double s = std::max({w.mid[i - 1], w.node[i], w.mid[i]});
        rows[i] = {std::exp(w.mid[i - 1] - s), std::exp(w.node[i] - s), std::exp(w.mid[i] - s)};
    }
    return rows;
}

double dual_volume(const Grid& g, std::size_t i) { return 0.5 * (g[i + 1] - g[i - 1]); }

// Solves the tridiagonal system lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i].
std::vector<double> thomas(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                           std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double f = lower[i] / diag[i - 1];
        diag[i] -= f * upper[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

void check_boundary(double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0)) {
        throw InvalidBoundary("boundary values must be nonnegative, got a=" + fmt(a) + ", b=" + fmt(b));
    }
}

// Residual and Jacobian of the scaled conservative scheme at the interior nodes.
struct System {
    const ExteriorProblem& problem;
    const Grid& grid;
    std::vector<ScaledRow> rows;
    // Lambda' is singular at 0 when xi < 1; below this the tangent is frozen
    double derivative_floor = 1e-200;

    std::vector<double> residual(const std::vector<double>& u, double eps) const {
        const std::size_t n = grid.size();
        std::vector<double> g(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double dl = (u[i] - u[i - 1]) / (grid[i] - grid[i - 1]);
            const double dr = (u[i + 1] - u[i]) / (grid[i + 1] - grid[i]);
            g[i] = rows[i].right * flux(dr, problem.p, eps) - rows[i].left * flux(dl, problem.p, eps) -
                   dual_volume(grid, i) * rows[i].center * problem.lambda.value(u[i]);
        }
        return g;
    }

    // max |G_i| / dr_i
    double norm(const std::vector<double>& g) const {
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) worst = std::max(worst, std::fabs(g[i]) / dual_volume(grid, i));
        return worst;
    }

    // Newton merit function: half the squared residual
    static double merit(const std::vector<double>& g) {
        double m = 0.0;
        for (double x : g) m += x * x;
        return 0.5 * m;
    }

    // Residual size explained by one rounding of every nodal value, in the units of norm().
    double rounding_floor(const std::vector<double>& u, double eps) const {
        constexpr double ulp = std::numeric_limits<double>::epsilon();
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            const double hl = grid[i] - grid[i - 1];
            const double hr = grid[i + 1] - grid[i];
            const double kl = rows[i].left * flux_derivative((u[i] - u[i - 1]) / hl, problem.p, eps) / hl;
            const double kr = rows[i].right * flux_derivative((u[i + 1] - u[i]) / hr, problem.p, eps) / hr;
            const double load = dual_volume(grid, i) * rows[i].center * problem.lambda.value(u[i]);
            const double spread = kl * (u[i] + u[i - 1]) + kr * (u[i + 1] + u[i]) + load;
            if (std::isfinite(spread)) worst = std::max(worst, ulp * spread / dual_volume(grid, i));
        }
        return worst;
    }

    // Tridiagonal Jacobian of residual() restricted to the interior nodes.
    void jacobian(const std::vector<double>& u, double eps, std::vector<double>& lower, std::vector<double>& diag,
                  std::vector<double>& upper) const {
        const std::size_t n = grid.size() - 2;
        lower.assign(n, 0.0);
        diag.assign(n, 0.0);
        upper.assign(n, 0.0);
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            const double hl = grid[i] - grid[i - 1];
            const double hr = grid[i + 1] - grid[i];
            const double kl = rows[i].left * flux_derivative((u[i] - u[i - 1]) / hl, problem.p, eps) / hl;
            const double kr = rows[i].right * flux_derivative((u[i + 1] - u[i]) / hr, problem.p, eps) / hr;
            const double load = dual_volume(grid, i) * rows[i].center * problem.lambda.derivative(std::max(u[i], derivative_floor));
            const std::size_t k = i - 1;
            lower[k] = kl;
            upper[k] = kr;
            diag[k] = -kl - kr - load;
        }
    }
};

std::vector<double> linear_interpolant(const Grid& grid, double a, double b) {
    std::vector<double> u(grid.size());
    const double span = grid.back() - grid.front();
    for (std::size_t i = 0; i < grid.size(); ++i) u[i] = a + (b - a) * (grid[i] - grid.front()) / span;
    return u;
}

std::vector<double> resample(const std::vector<double>& xs, const std::vector<double>& ys, const Grid& grid,
                             double beyond) {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid[i];
        if (r >= xs.back()) {
            out[i] = beyond;
            continue;
        }
        auto it = std::upper_bound(xs.begin(), xs.end(), r);
        if (it == xs.begin()) {
            out[i] = ys.front();
            continue;
        }
        const std::size_t j = static_cast<std::size_t>(it - xs.begin()) - 1;
        const double t = (r - xs[j]) / (xs[j + 1] - xs[j]);
        out[i] = ys[j] + t * (ys[j + 1] - ys[j]);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- LambdaSpec

LambdaSpec LambdaSpec::power_law(double lambda, double xi) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda > 0", 0.0, "lambda=" + fmt(lambda));
    if (!(xi >= 0.0) || !std::isfinite(xi)) throw ValidationError("xi >= 0", 0.0, "xi=" + fmt(xi));
    LambdaSpec s;
    s.kind_ = Kind::PowerLaw;
    s.lambda_ = lambda;
    s.xi_ = xi;
    return s;
}

LambdaSpec LambdaSpec::zero() { return LambdaSpec{}; }

LambdaSpec LambdaSpec::custom(std::string_view text, std::optional<std::string_view> primitive, double probe) {
    LambdaSpec s;
    s.kind_ = Kind::CustomMonotone;
    s.expr_ = parse_expression(text, "u");
    s.deriv_ = s.expr_->derivative();
    if (primitive) s.primitive_ = parse_expression(*primitive, "u");

    const double at0 = s.expr_->eval(0.0);
    if (!(std::fabs(at0) <= 1e-12)) throw ValidationError("Lambda(0) = 0", 0.0, "Lambda(0)=" + fmt(at0));
    double prev = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double u = probe * k / 200.0;
        const double v = s.expr_->eval(u);
        if (!(v > 0.0)) throw ValidationError("Lambda(u) > 0", u, "Lambda=" + fmt(v));
        if (v < prev * (1 - 1e-12)) throw ValidationError("Lambda nondecreasing", u, "Lambda decreases");
        prev = v;
    }
    if (s.primitive_) {
        const double f0 = s.primitive_->eval(0.0);
        if (!(std::fabs(f0) <= 1e-12)) throw ValidationError("F(0) = 0", 0.0, "F(0)=" + fmt(f0));
        for (double u : {0.25 * probe, probe}) {
            const double h = 1e-6 * std::max(1.0, u);
            const double fd = (s.primitive_->eval(u + h) - s.primitive_->eval(u - h)) / (2 * h);
            const double v = s.expr_->eval(u);
            if (std::fabs(fd - v) > 1e-5 * std::max(1.0, std::fabs(v))) {
                throw ValidationError("F' = Lambda", u, "F'=" + fmt(fd) + " but Lambda=" + fmt(v));
            }
        }
    }
    return s;
}

double LambdaSpec::value(double u) const {
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::PowerLaw: return u > 0.0 ? lambda_ * std::pow(u, xi_) : 0.0;
        case Kind::CustomMonotone: return u > 0.0 ? expr_->eval(u) : 0.0;
    }
    return 0.0;
}

double LambdaSpec::derivative(double u) const {
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::PowerLaw:
            if (xi_ == 0.0) return 0.0;
            return lambda_ * xi_ * std::pow(u, xi_ - 1);
        case Kind::CustomMonotone: return std::max(0.0, deriv_->eval(u));
    }
    return 0.0;
}

double LambdaSpec::primitive(double u) const {
    if (!(u > 0.0)) return 0.0;
    switch (kind_) {
        case Kind::Zero: return 0.0;
        case Kind::PowerLaw: return lambda_ * std::pow(u, xi_ + 1) / (xi_ + 1);
        case Kind::CustomMonotone:
            if (primitive_) return primitive_->eval(u);
            {
                const auto log_l = [this](double v) {
                    const double l = value(v);
                    return l > 0.0 ? std::log(l) : -kInf;
                };
                return std::exp(quad::integrate_log(log_l, 0.0, u, {1e-12, 400}).log_value);
            }
    }
    return 0.0;
}

std::string LambdaSpec::describe() const {
    switch (kind_) {
        case Kind::Zero: return "zero";
        case Kind::PowerLaw: return fmt(lambda_, 17) + "*u^" + fmt(xi_, 17);
        case Kind::CustomMonotone: return expr_->to_string("u");
    }
    return "zero";
}

std::string LambdaSpec::expression_text() const { return expr_ ? expr_->to_string("u") : std::string(); }

std::optional<std::string> LambdaSpec::primitive_text() const {
    if (!primitive_) return std::nullopt;
    return primitive_->to_string("u");
}

void ExteriorProblem::validate() const {
    if (!(R > 0.0) || !std::isfinite(R)) throw EvalError("inner radius must be positive, got " + fmt(R));
    if (!(p > 1.0) || !std::isfinite(p)) throw EvalError("exponent p must lie in (1, inf), got " + fmt(p));
    if (!(inner_value >= 0.0)) throw InvalidBoundary("inner value must be nonnegative, got " + fmt(inner_value));
}

// ---------------------------------------------------------------- Grid

Grid::Grid(std::vector<double> nodes, Spacing spacing) : nodes_(std::move(nodes)), spacing_(spacing) {}

Grid Grid::from_nodes(std::vector<double> nodes, Spacing spacing) {
    if (nodes.size() < 17) throw GridMismatch("grid needs at least 16 cells, got " + std::to_string(nodes.size()));
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (!(nodes[i] > nodes[i - 1])) throw GridMismatch("grid nodes must increase strictly at index " + std::to_string(i));
    }
    return Grid(std::move(nodes), spacing);
}

Grid Grid::uniform(double a, double b, int cells) {
    if (!(b > a)) throw GridMismatch("empty interval");
    if (cells < 16) throw GridMismatch("grid needs at least 16 cells");
    std::vector<double> nodes(static_cast<std::size_t>(cells) + 1);
    for (int i = 0; i <= cells; ++i) nodes[static_cast<std::size_t>(i)] = a + (b - a) * i / cells;
    nodes.back() = b;
    return from_nodes(std::move(nodes), Spacing::Uniform);
}

Grid Grid::graded(double R, double W, double L, int window_cells, double ratio) {
    if (!(W > 0.0) || !(L > 0.0)) throw GridMismatch("widths must be positive");
    if (!(ratio >= 1.0)) throw GridMismatch("grading ratio must be at least 1");
    if (L <= W * (1 + 1e-12)) {
        const int cells = std::max(16, static_cast<int>(std::ceil(window_cells * L / W)));
        Grid g = uniform(R, R + L, cells);
        return g;
    }
    std::vector<double> nodes(static_cast<std::size_t>(window_cells) + 1);
    for (int i = 0; i <= window_cells; ++i) nodes[static_cast<std::size_t>(i)] = R + W * i / window_cells;
    nodes.back() = R + W;
    const double end = R + L;
    double h = W / window_cells;
    double r = R + W;
    for (;;) {
        h *= ratio;
        if (r + h >= end - 0.5 * h) break;
        r += h;
        nodes.push_back(r);
    }
    nodes.push_back(end);
    return from_nodes(std::move(nodes), Spacing::Graded);
}

Grid Grid::weight_resolved(const ModelManifold& manifold, double R, double W, double L, int window_cells,
                           double ratio, double max_log_step) {
    const Grid base = graded(R, W, L, window_cells, ratio);
    if (!(max_log_step > 0.0) || manifold.m() == 1) return base;
    const auto slope = [&](double r) { return std::fabs((manifold.m() - 1) * manifold.sigma().log_slope(r)); };
    std::vector<double> nodes{base[0]};
    for (std::size_t i = 0; i + 1 < base.size(); ++i) {
        const double a = base[i];
        const double b = base[i + 1];
        int pieces = 1;
        if (b <= R + W * (1 + 1e-12)) {
            const double steep = std::max({slope(a), slope(0.5 * (a + b)), slope(b)});
            pieces = static_cast<int>(std::min(1e6, std::ceil(steep * (b - a) / max_log_step)));
            pieces = std::max(pieces, 1);
        }
        for (int k = 1; k < pieces; ++k) nodes.push_back(a + (b - a) * k / pieces);
        nodes.push_back(b);
    }
    return from_nodes(std::move(nodes), base.spacing());
}

std::string to_string(Grid::Spacing spacing) { return spacing == Grid::Spacing::Uniform ? "uniform" : "graded"; }

std::string to_string(Provenance provenance) {
    switch (provenance) {
        case Provenance::Newton: return "newton";
        case Provenance::Energy: return "energy";
        case Provenance::ExhaustionLimit: return "exhaustion-limit";
    }
    return "newton";
}

// ---------------------------------------------------------------- Newton

RadialSolution solve_annulus_bvp(const ExteriorProblem& problem, double outer_value, const Grid& grid,
                                 const SolverOptions& options, const std::vector<double>* initial) {
    problem.validate();
    check_boundary(problem.inner_value, outer_value);
    if (std::fabs(grid.front() - problem.R) > 1e-12 * std::max(1.0, problem.R)) {
        throw GridMismatch("grid starts at " + fmt(grid.front()) + " but R=" + fmt(problem.R));
    }
    if (initial && initial->size() != grid.size()) throw GridMismatch("initial guess does not match the grid");

    const double a = problem.inner_value;
    const double b = outer_value;
    const double cap = std::max(a, b);
    const System sys{problem, grid, scaled_rows(log_weights(problem.manifold, grid, problem.p)), 1e-14 * cap};

    RadialSolution sol{problem.manifold, problem.p, problem.lambda, a, b, grid, {}, 0.0, options.tol, 0.0, Provenance::Newton, 0,
                       {}, std::nullopt};
    std::vector<double> u = initial ? *initial : linear_interpolant(grid, a, b);
    u.front() = a;
    u.back() = b;
    for (double& v : u) v = std::clamp(v, 0.0, cap);

    if (cap == 0.0) {
        sol.values = u;
        sol.epsilon_final = options.epsilon_final;
        sol.residual_norm = 0.0;
        return sol;
    }

    std::vector<double> levels;
    if (problem.p == 2.0) {
        levels.push_back(0.0);
    } else {
        for (double eps = options.epsilon_start; eps > options.epsilon_final; eps *= options.epsilon_factor) {
            levels.push_back(eps);
        }
        levels.push_back(options.epsilon_final);
    }

    std::vector<double> lower, diag, upper;
    int total = 0;
    for (std::size_t level = 0; level < levels.size(); ++level) {
        const double eps = levels[level];
        const bool last = level + 1 == levels.size();
        const double level_tol = last ? options.tol : std::max(options.tol, 1e-6);
        std::vector<double> g = sys.residual(u, eps);
        double norm = sys.norm(g);
        double effective_tol = std::max(level_tol, sys.rounding_floor(u, eps));
        int it = 0;
        double last_step = kInf;
        while (norm > effective_tol || (last && last_step > options.step_tol * cap)) {
            if (it >= options.max_iterations) {
                sol.trace.push_back("eps=" + fmt(eps) + ": iteration limit at residual " + fmt(norm));
                if (last && norm > effective_tol) {
                    throw NonConvergence("Newton iteration limit at eps=" + fmt(eps), sol.trace);
                }
                break;
            }
            sys.jacobian(u, eps, lower, diag, upper);
            std::vector<double> rhs(grid.size() - 2);
            for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -g[i + 1];
            const std::vector<double> d = thomas(lower, diag, upper, rhs);

            double alpha = 1.0;
            bool accepted = false;
            std::vector<double> trial(u);
            std::vector<double> g_trial;
            double norm_trial = kInf;
            const double merit = System::merit(g);
            for (int ls = 0; ls < 40; ++ls) {
                for (std::size_t i = 0; i < d.size(); ++i) trial[i + 1] = std::clamp(u[i + 1] + alpha * d[i], 0.0, cap);
                g_trial = sys.residual(trial, eps);
                norm_trial = sys.norm(g_trial);
                if (System::merit(g_trial) <= (1 - 1e-4 * alpha) * merit) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            ++it;
            ++total;
            std::ostringstream line;
            line << "eps=" << fmt(eps) << " it=" << it << " residual=" << fmt(norm_trial) << " step=" << fmt(alpha);
            sol.trace.push_back(line.str());
            if (!accepted) {
                if (last && norm > effective_tol) {
                    throw NonConvergence("Newton line search stalled at residual " + fmt(norm), sol.trace);
                }
                break;
            }
            last_step = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) last_step = std::max(last_step, std::fabs(trial[i] - u[i]));
            u.swap(trial);
            g.swap(g_trial);
            norm = norm_trial;
            effective_tol = std::max(level_tol, sys.rounding_floor(u, eps));
        }
        sol.residual_norm = norm;
        sol.tolerance = effective_tol;
        sol.epsilon_final = eps;
    }
    sol.values = std::move(u);
    sol.iterations = total;
    return sol;
}

// ---------------------------------------------------------------- energy

namespace {

double energy_with(const ExteriorProblem& problem, const Grid& grid, const Weights& w, double top,
                   const std::vector<double>& u) {
    const std::size_t n = grid.size();
    double gradient_part = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = grid[i + 1] - grid[i];
        const double d = (u[i + 1] - u[i]) / h;
        gradient_part += std::exp(w.mid[i] - top) * h * std::pow(std::fabs(d), problem.p) / problem.p;
    }
    double load = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        load += std::exp(w.node[i] - top) * dual_volume(grid, i) * problem.lambda.primitive(u[i]);
    }
    return gradient_part + load;
}

double top_weight(const Weights& w) {
    double top = -kInf;
    for (double x : w.node) top = std::max(top, x);
    for (double x : w.mid) top = std::max(top, x);
    return top;
}

}  // namespace

double discrete_energy(const ExteriorProblem& problem, const Grid& grid, const std::vector<double>& values) {
    if (values.size() != grid.size()) throw GridMismatch("values do not match the grid");
    const Weights w = log_weights(problem.manifold, grid, problem.p);
    return energy_with(problem, grid, w, top_weight(w), values);
}

RadialSolution minimize_energy(const ExteriorProblem& problem, double outer_value, const Grid& grid,
                               const EnergyOptions& options) {
    problem.validate();
    check_boundary(problem.inner_value, outer_value);
    if (std::fabs(grid.front() - problem.R) > 1e-12 * std::max(1.0, problem.R)) {
        throw GridMismatch("grid starts at " + fmt(grid.front()) + " but R=" + fmt(problem.R));
    }
    const double a = problem.inner_value;
    const double b = outer_value;
    const double cap = std::max(a, b);
    const Weights w = log_weights(problem.manifold, grid, problem.p);
    const double top = top_weight(w);
    const System sys{problem, grid, scaled_rows(w), 1e-14 * cap};
    const std::size_t n = grid.size();

    RadialSolution sol{problem.manifold, problem.p, problem.lambda, a, b, grid, {}, 0.0, options.tol, 0.0, Provenance::Energy, 0,
                       {}, std::nullopt};
    std::vector<double> u = linear_interpolant(grid, a, b);
    if (cap == 0.0) {
        sol.values = u;
        return sol;
    }

    // -G is the row-scaled energy gradient; zero it where the box blocks descent
    const auto projected = [&](const std::vector<double>& u_, const std::vector<double>& g) {
        std::vector<double> out(g);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double grad = -g[i];
            if ((u_[i] <= 0.0 && grad > 0.0) || (u_[i] >= cap && grad < 0.0)) out[i] = 0.0;
        }
        return out;
    };

    double energy = energy_with(problem, grid, w, top, u);
    std::vector<double> lower, diag, upper;
    int it = 0;
    double norm = kInf;
    for (; it < options.max_iterations; ++it) {
        const std::vector<double> g = sys.residual(u, 0.0);
        const std::vector<double> pg = projected(u, g);
        norm = sys.norm(pg);
        sol.tolerance = std::max(options.tol, sys.rounding_floor(u, 0.0));
        if (norm <= sol.tolerance) break;

        double max_slope = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) max_slope = std::max(max_slope, std::fabs(u[i + 1] - u[i]) / (grid[i + 1] - grid[i]));
        const double eps_reg = problem.p == 2.0 ? 0.0 : 1e-6 * std::max(max_slope, 1e-12);
        sys.jacobian(u, eps_reg, lower, diag, upper);
        std::vector<double> rhs(n - 2);
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            rhs[i] = -pg[i + 1];
            if (pg[i + 1] == 0.0 && g[i + 1] != 0.0) {
                // frozen at the box: decouple the row
                lower[i] = 0.0;
                upper[i] = 0.0;
                diag[i] = 1.0;
                if (i > 0) upper[i - 1] = 0.0;
                if (i + 1 < rhs.size()) lower[i + 1] = 0.0;
            }
        }
        const std::vector<double> d = thomas(lower, diag, upper, rhs);

        // unscaled gradient . step, for the Armijo test
        const auto descent = [&](const std::vector<double>& trial) {
            double s = 0.0;
            for (std::size_t i = 1; i + 1 < n; ++i) {
                const double scale = std::exp(std::max({w.mid[i - 1], w.node[i], w.mid[i]}) - top);
                s += -g[i] * scale * (trial[i] - u[i]);
            }
            return s;
        };
        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial(u);
        double e_trial = energy;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < d.size(); ++i) trial[i + 1] = std::clamp(u[i + 1] + alpha * d[i], 0.0, cap);
            e_trial = energy_with(problem, grid, w, top, trial);
            if (e_trial <= energy + 1e-4 * descent(trial)) {
                accepted = true;
                break;
            }
            // below the energy's rounding level the gradient decides
            const double noise = 64 * std::numeric_limits<double>::epsilon() * std::fabs(energy);
            if (std::fabs(e_trial - energy) <= noise && sys.norm(projected(trial, sys.residual(trial, 0.0))) < norm) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) moved = std::max(moved, std::fabs(trial[i] - u[i]));
        sol.trace.push_back("it=" + std::to_string(it + 1) + " energy=" + fmt(e_trial, 17) + " gradient=" + fmt(norm) +
                            " step=" + fmt(alpha));
        if (!accepted || moved <= 1e-15 * cap) {
            // the energy no longer resolves the remaining gradient
            if (norm <= 1e3 * sol.tolerance) break;
            throw NonConvergence("energy descent stalled at projected gradient " + fmt(norm), sol.trace);
        }
        u.swap(trial);
        energy = e_trial;
    }
    if (it >= options.max_iterations) throw NonConvergence("energy descent iteration limit", sol.trace);
    sol.values = std::move(u);
    sol.residual_norm = norm;
    sol.iterations = it;
    return sol;
}

// ---------------------------------------------------------------- exhaustion

RadialSolution minimal_exterior_solution(const ExteriorProblem& problem, double W, const ExhaustionOptions& options) {
    problem.validate();
    if (!(problem.inner_value > 0.0)) throw InvalidBoundary("minimal solutions need a positive inner value");
    if (!(W > 0.0)) throw GridMismatch("report window must have positive width");

    std::size_t window_nodes = 0;
    ExhaustionInfo info;
    std::vector<double> previous_window;
    std::vector<double> prev_nodes;
    std::vector<double> prev_values;
    std::optional<RadialSolution> last;

    for (int k = 0; k <= options.k_max; ++k) {
        const double L = options.additive_step > 0.0 ? W + k * options.additive_step : W * std::ldexp(1.0, k);
        const Grid grid = Grid::weight_resolved(problem.manifold, problem.R, W, L, options.window_cells,
                                                options.grading, options.max_log_weight_step);
        std::vector<double> guess;
        if (!prev_nodes.empty()) guess = resample(prev_nodes, prev_values, grid, 0.0);
        window_nodes = static_cast<std::size_t>(
            std::upper_bound(grid.nodes().begin(), grid.nodes().end(), problem.R + W * (1 + 1e-12)) -
            grid.nodes().begin());
        RadialSolution s = solve_annulus_bvp(problem, 0.0, grid, options.solver, guess.empty() ? nullptr : &guess);
        info.widths.push_back(L);

        std::vector<double> window(s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(window_nodes));
        if (!previous_window.empty()) {
            double diff = 0.0;
            double drop = 0.0;
            for (std::size_t i = 0; i < window_nodes; ++i) {
                diff = std::max(diff, std::fabs(window[i] - previous_window[i]));
                drop = std::max(drop, previous_window[i] - window[i]);
            }
            info.sup_differences.push_back(diff);
            info.max_monotonicity_violation = std::max(info.max_monotonicity_violation, drop);
            if (diff < options.tol) info.settled = true;
        }
        previous_window = window;
        prev_nodes = grid.nodes();
        prev_values = s.values;
        last = std::move(s);
        if (info.settled) break;
    }

    RadialSolution& s = *last;
    info.last_nodes = prev_nodes;
    info.last_values = prev_values;
    std::vector<double> nodes(s.grid.nodes().begin(), s.grid.nodes().begin() + static_cast<std::ptrdiff_t>(window_nodes));
    const double h0 = nodes[1] - nodes[0];
    const bool even = std::all_of(nodes.begin() + 1, nodes.end(), [&, prev = nodes[0]](double x) mutable {
        const bool same = std::fabs((x - prev) - h0) <= 1e-9 * h0;
        prev = x;
        return same;
    });
    const Grid::Spacing spacing = even ? Grid::Spacing::Uniform : Grid::Spacing::Graded;
    RadialSolution out{problem.manifold,
                       problem.p,
                       problem.lambda,
                       problem.inner_value,
                       previous_window.back(),
                       Grid::from_nodes(std::move(nodes), spacing),
                       previous_window,
                       s.residual_norm,
                       s.tolerance,
                       s.epsilon_final,
                       Provenance::ExhaustionLimit,
                       s.iterations,
                       s.trace,
                       std::move(info)};
    if (!out.exhaustion->settled) {
        out.trace.push_back("ExhaustionNotSettled: last window difference " +
                            fmt(out.exhaustion->sup_differences.empty() ? kInf : out.exhaustion->sup_differences.back()));
    }
    return out;
}

// ---------------------------------------------------------------- weak residual

double weak_residual(const RadialSolution& sol) {
    const Grid& g = sol.grid;
    const std::size_t n = g.size();
    if (n < 17) throw GridMismatch("weak residual needs at least 16 cells");

    // log weights at the Gauss points of every cell
    std::vector<std::array<double, 5>> lw(n - 1);
    for (std::size_t c = 0; c + 1 < n; ++c) {
        const double mid = 0.5 * (g[c] + g[c + 1]);
        const double half = 0.5 * (g[c + 1] - g[c]);
        for (int q = 0; q < 5; ++q) lw[c][static_cast<std::size_t>(q)] = log_sigma_pow(sol.manifold, mid + half * kX[q]);
    }

    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double scale = -kInf;
        for (std::size_t c : {i - 1, i}) {
            for (double x : lw[c]) scale = std::max(scale, x);
        }
        double residual = 0.0;
        double mass = 0.0;
        for (std::size_t c : {i - 1, i}) {
            const double h = g[c + 1] - g[c];
            const double half = 0.5 * h;
            const double slope = (sol.values[c + 1] - sol.values[c]) / h;
            // hat function of node i on cell c and its derivative
            const bool rising = c + 1 == i;
            const double dhat = rising ? 1.0 / h : -1.0 / h;
            const double fl = flux(slope, sol.p, 0.0);
            for (int q = 0; q < 5; ++q) {
                const double t = 0.5 * (1 + kX[q]);
                const double hat = rising ? t : 1 - t;
                const double u = sol.values[c] + t * (sol.values[c + 1] - sol.values[c]);
                const double wq = std::exp(lw[c][static_cast<std::size_t>(q)] - scale) * kW[q] * half;
                residual += wq * (fl * dhat + sol.lambda.value(u) * hat);
                mass += wq * hat;
            }
        }
        worst = std::max(worst, std::fabs(residual) / mass);
    }
    return worst;
}

std::vector<double> nodal_flux(const RadialSolution& sol) {
    const Grid& g = sol.grid;
    const std::size_t n = g.size();
    std::vector<double> lw(n);
    double top = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
        lw[i] = log_sigma_pow(sol.manifold, g[i]);
        top = std::max(top, lw[i]);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double slope;
        if (i == 0) {
            slope = (sol.values[1] - sol.values[0]) / (g[1] - g[0]);
        } else if (i + 1 == n) {
            slope = (sol.values[i] - sol.values[i - 1]) / (g[i] - g[i - 1]);
        } else {
            slope = (sol.values[i + 1] - sol.values[i - 1]) / (g[i + 1] - g[i - 1]);
        }
        out[i] = std::exp(lw[i] - top) * flux(slope, sol.p, 0.0);
    }
    return out;
}

}  // namespace pfeller
