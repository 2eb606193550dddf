#pragma once

#include "pfeller/expr.hpp"
#include "pfeller/warping.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pfeller {

/// Right-hand side Lambda(u) of Delta_p u = Lambda(u) together with its primitive F.
class LambdaSpec {
public:
    enum class Kind { PowerLaw, Zero, CustomMonotone };

    /// lambda u^xi with lambda > 0 and xi >= 0.
    static LambdaSpec power_law(double lambda, double xi);
    static LambdaSpec zero();
    /// Expression in the variable u. Without a primitive, F is integrated numerically.
    /// Throws ValidationError unless Lambda(0)=0 and Lambda is nondecreasing and positive on (0, probe].
    static LambdaSpec custom(std::string_view text, std::optional<std::string_view> primitive = std::nullopt,
                             double probe = 2.0);

    Kind kind() const { return kind_; }
    double lambda() const { return lambda_; }
    double xi() const { return xi_; }

    double value(double u) const;
    double derivative(double u) const;
    double primitive(double u) const;

    std::string describe() const;
    /// Expression texts of a CustomMonotone spec; empty otherwise.
    std::string expression_text() const;
    std::optional<std::string> primitive_text() const;

private:
    Kind kind_ = Kind::Zero;
    double lambda_ = 0.0;
    double xi_ = 0.0;
    std::optional<Expr> expr_;
    std::optional<Expr> deriv_;
    std::optional<Expr> primitive_;
};

struct ExteriorProblem {
    ModelManifold manifold;
    double R;
    double p;
    LambdaSpec lambda;
    double inner_value = 1.0;

    /// Throws InvalidBoundary on a negative inner value, EvalError on R <= 0 or p <= 1.
    void validate() const;
};

class Grid {
public:
    enum class Spacing { Uniform, Graded };

    /// `cells` equal cells on [a, b].
    static Grid uniform(double a, double b, int cells);
    /// `window_cells` equal cells on [R, R+W], then cells growing by `ratio` up to R+L.
    static Grid graded(double R, double W, double L, int window_cells, double ratio = 1.05);
    /// graded() with every window cell split until sigma^{m-1} changes by at most
    /// exp(max_log_step) across a cell.
    static Grid weight_resolved(const ModelManifold& manifold, double R, double W, double L, int window_cells,
                                double ratio = 1.05, double max_log_step = 0.25);
    /// Throws GridMismatch unless nodes are strictly increasing with at least 16 cells.
    static Grid from_nodes(std::vector<double> nodes, Spacing spacing);

    const std::vector<double>& nodes() const { return nodes_; }
    Spacing spacing() const { return spacing_; }
    std::size_t size() const { return nodes_.size(); }
    int cells() const { return static_cast<int>(nodes_.size()) - 1; }
    double front() const { return nodes_.front(); }
    double back() const { return nodes_.back(); }
    double operator[](std::size_t i) const { return nodes_[i]; }

private:
    Grid(std::vector<double> nodes, Spacing spacing);

    std::vector<double> nodes_;
    Spacing spacing_;
};

std::string to_string(Grid::Spacing spacing);

enum class Provenance { Newton, Energy, ExhaustionLimit };

std::string to_string(Provenance provenance);

struct ExhaustionInfo {
    std::vector<double> widths;
    /// sup-distance on the window between consecutive widths
    std::vector<double> sup_differences;
    /// largest drop u_k - u_{k+1} on the window; the exhaustion should be nondecreasing
    double max_monotonicity_violation = 0.0;
    bool settled = false;
    /// the full solution on the last (widest) annulus
    std::vector<double> last_nodes;
    std::vector<double> last_values;
};

struct RadialSolution {
    ModelManifold manifold;
    double p;
    LambdaSpec lambda;
    double inner_value;
    double outer_value;
    Grid grid;
    std::vector<double> values;
    double residual_norm = 0.0;
    /// the tolerance residual_norm was held to: the requested one or the rounding floor of the data
    double tolerance = 0.0;
    double epsilon_final = 0.0;
    Provenance provenance = Provenance::Newton;
    int iterations = 0;
    std::vector<std::string> trace;
    std::optional<ExhaustionInfo> exhaustion;

    int m() const { return manifold.m(); }
    double R() const { return grid.front(); }
};

struct SolverOptions {
    /// bound on the row-scaled strong residual at the final regularization
    double tol = 1e-9;
    double epsilon_start = 1e-2;
    double epsilon_final = 1e-10;
    double epsilon_factor = 0.25;
    /// at the final regularization Newton also runs until a step moves u by less than this times max(a, b)
    double step_tol = 1e-12;
    int max_iterations = 400;
};

/// Conservative scheme for (sigma^{m-1} phi_{p,eps}(u'))' = sigma^{m-1} Lambda(u) on the grid,
/// u = inner_value at grid.front() and u = outer_value at grid.back(). Damped Newton with
/// eps-continuation. Throws InvalidBoundary, GridMismatch, NonConvergence.
RadialSolution solve_annulus_bvp(const ExteriorProblem& problem, double outer_value, const Grid& grid,
                                 const SolverOptions& options = {}, const std::vector<double>* initial = nullptr);

/// Discrete energy sum w h |delta|^p / p + sum w dr F(u), weights normalized by their grid maximum.
double discrete_energy(const ExteriorProblem& problem, const Grid& grid, const std::vector<double>& values);

struct EnergyOptions {
    /// bound on the row-scaled projected gradient
    double tol = 1e-9;
    int max_iterations = 2000;
};

/// Minimizes discrete_energy over 0 <= u <= max(a, b) with fixed boundary values.
/// Throws InvalidBoundary, GridMismatch, NonConvergence.
RadialSolution minimize_energy(const ExteriorProblem& problem, double outer_value, const Grid& grid,
                               const EnergyOptions& options = {});

struct ExhaustionOptions {
    int window_cells = 1024;
    double grading = 1.05;
    /// window cells are split until log sigma^{m-1} varies by at most this per cell; 0 disables
    double max_log_weight_step = 0.25;
    int k_max = 12;
    /// settle when consecutive window solutions differ by less than this
    double tol = 1e-10;
    /// widths W 2^k when zero, otherwise W + k * additive_step
    double additive_step = 0.0;
    SolverOptions solver{};
};

/// Increasing limit of annulus solutions with zero outer data, reported on [R, R+W].
/// A run that never settles is flagged in `exhaustion->settled`, not thrown.
RadialSolution minimal_exterior_solution(const ExteriorProblem& problem, double W,
                                         const ExhaustionOptions& options = {});

/// Max over interior hat functions of the weak-form residual with the exact flux,
/// each row divided by the integral of the weight against its hat function.
double weak_residual(const RadialSolution& solution);

/// sigma^{m-1} |u'|^{p-2} u' at the nodes (one-sided at the ends), with sigma^{m-1}
/// divided by its maximum over the grid.
std::vector<double> nodal_flux(const RadialSolution& solution);

}  // namespace pfeller
