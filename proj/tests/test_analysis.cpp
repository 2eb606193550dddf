#include "pfeller/analysis.hpp"
#include "pfeller/errors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>

using namespace pfeller;

namespace {

ModelManifold model(const char* family, int m) { return ModelManifold(m, WarpingFunction::family(family)); }

RadialSolution sampled(const ModelManifold& manifold, double p, LambdaSpec lambda, const Grid& grid,
                       const std::function<double(double)>& f, Provenance provenance = Provenance::ExhaustionLimit) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid[i]);
    return RadialSolution{manifold, p, std::move(lambda), v.front(), v.back(), grid, v, 0.0, 0.0, 0.0, provenance,
                          0, {}, std::nullopt};
}

double euclid_h(double r) { return std::exp(-(r - 1)) / r; }

RadialSolution exact_h() {
    return sampled(model("euclidean", 3), 2.0, LambdaSpec::power_law(1, 1), Grid::uniform(1, 41, 8000), euclid_h);
}

RadialSolution minimal(const char* family, int m, double p, double lambda, double W = 12.0, int cells = 512) {
    const ExteriorProblem prob{model(family, m), 1.0, p, LambdaSpec::power_law(lambda, p - 1), 1.0};
    ExhaustionOptions o;
    o.window_cells = cells;
    return minimal_exterior_solution(prob, W, o);
}

// composite Simpson on [a, b]
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
    return s * h / 3;
}

}  // namespace

TEST_CASE("decay limits") {
    const auto h = decay_limit(exact_h());
    CHECK(h.classification == DecayClass::DecaysToZero);
    CHECK(h.limit_estimate >= 0.0);
    CHECK(h.limit_estimate < 1e-6);
    CHECK(h.window_start == doctest::Approx(31.0));
    CHECK(h.window_end == doctest::Approx(41.0));

    const auto c = decay_limit(sampled(model("euclidean", 3), 2.0, LambdaSpec::zero(), Grid::uniform(1, 6, 100),
                                       [](double) { return 0.7; }));
    CHECK(c.classification == DecayClass::PositiveLimit);
    CHECK(c.limit_estimate == doctest::Approx(0.7).epsilon(1e-12));

    const auto short_window = decay_limit(sampled(model("euclidean", 3), 2.0, LambdaSpec::zero(),
                                                  Grid::uniform(1, 3, 100), [](double) { return 0.7; }));
    CHECK(short_window.classification == DecayClass::Undetermined);
}

TEST_CASE("cusp minimal solution has a positive limit") {
    const auto s = minimal("cusp_cubic", 3, 2.0, 1.0, 20.0);
    const auto d = decay_limit(s);
    CHECK(d.classification == DecayClass::PositiveLimit);
    // inward ODE integration gives u(21) = 0.853812; beyond, u'/u ~ -1/(6 r^2)
    CHECK(d.limit_estimate == doctest::Approx(0.853812 * std::exp(-1.0 / 126)).epsilon(2e-3));
}

TEST_CASE("decay on Feller fixtures") {
    for (const char* fam : {"euclidean", "hyperbolic"}) {
        for (double p : {1.5, 2.0, 3.0}) {
            CAPTURE(fam);
            CAPTURE(p);
            const auto d = decay_limit(minimal(fam, 3, p, 1.0, 20.0, 256));
            CHECK(d.classification == DecayClass::DecaysToZero);
        }
    }
}

TEST_CASE("compact support") {
    // u'' = sqrt(u) on the half line: u = (s0 - s)^4 / 144 with s0 = 1 + 2 sqrt 3
    const ExteriorProblem line{ModelManifold(1, WarpingFunction::euclidean()), 1.0, 2.0,
                               LambdaSpec::power_law(1, 0.5), 1.0};
    ExhaustionOptions o;
    o.window_cells = 2048;
    const auto s = minimal_exterior_solution(line, 8.0, o);
    const double s0 = 1 + 2 * std::sqrt(3.0);
    const auto rep = detect_compact_support(s);
    REQUIRE(rep.support_radius);
    REQUIRE(rep.extrapolated_radius);
    CHECK(std::fabs(*rep.extrapolated_radius - s0) <= 1e-3);
    // u < 1e-8 once s0 - r < 144^{1/4} 1e-2
    CHECK(*rep.support_radius <= s0);
    CHECK(*rep.support_radius >= s0 - 0.05);
    CHECK(*rep.support_radius >= s.grid.front());
    CHECK(*rep.support_radius <= s.grid.back());

    CHECK_FALSE(detect_compact_support(exact_h()).support_radius);
    CHECK_FALSE(detect_compact_support(minimal("euclidean", 3, 2.0, 1.0)).support_radius);

    const auto zero = sampled(model("euclidean", 3), 2.0, LambdaSpec::zero(), Grid::uniform(2, 5, 64),
                              [](double) { return 0.0; });
    const auto z = detect_compact_support(zero);
    REQUIRE(z.support_radius);
    CHECK(*z.support_radius == 2.0);
}

TEST_CASE("compact support in three dimensions") {
    std::ifstream in(PFELLER_FIXTURE_DIR "/support_m3_xi_half.json");
    REQUIRE(in);
    const double oracle = nlohmann::json::parse(in).at("support_radius").get<double>();
    const ExteriorProblem prob{model("euclidean", 3), 1.0, 2.0, LambdaSpec::power_law(1, 0.5), 1.0};
    ExhaustionOptions o;
    o.window_cells = 2048;
    const auto rep = detect_compact_support(minimal_exterior_solution(prob, 8.0, o));
    REQUIRE(rep.support_radius);
    REQUIRE(rep.extrapolated_radius);
    CHECK(std::fabs(*rep.extrapolated_radius - oracle) <= 1e-3);
    CHECK(*rep.support_radius <= oracle);
    CHECK(*rep.support_radius >= oracle - 0.05);
}

TEST_CASE("Lq norms") {
    // 4 pi int_1^inf e^{-2(r-1)} dr = 2 pi
    const auto two = lq_norm(exact_h(), 2.0);
    CHECK(two.value == doctest::Approx(std::sqrt(2 * M_PI)).epsilon(1e-4));
    CHECK(two.trend == TailTrend::Finite);
    CHECK(lq_norm(exact_h(), INFINITY).value == doctest::Approx(1.0));

    for (double p : {1.5, 2.0, 3.0}) {
        CAPTURE(p);
        const auto s = minimal("hyperbolic", 3, p, 1.0);
        for (double q : {p - 1, p}) CHECK(lq_norm(s, q).trend == TailTrend::Finite);
        CHECK(lq_norm(s, INFINITY).value == doctest::Approx(1.0));
    }

    const auto flat = sampled(model("euclidean", 3), 2.0, LambdaSpec::zero(), Grid::uniform(1, 21, 400),
                              [](double) { return 1.0; });
    CHECK(lq_norm(flat, 1.0).trend == TailTrend::Divergent);
}

TEST_CASE("weighted Sobolev norm") {
    const auto h = exact_h();
    // e^{1.2 r}(h^2 + h'^2) 4 pi r^2 with h' = -e^{-(r-1)}(1/r + 1/r^2)
    const auto integrand = [](double r) {
        const double a = 1 / r;
        return 4 * M_PI * std::exp(1.2 * r - 2 * (r - 1)) * (1 + (1 + a) * (1 + a));
    };
    const double oracle = simpson(integrand, 1.0, 60.0, 200000);
    const auto w = weighted_sobolev_norm(h, 1.2);
    CHECK(w.trend == TailTrend::Finite);
    CHECK(w.hypothesis_holds);
    CHECK(w.value == doctest::Approx(oracle).epsilon(1e-4));

    const auto big = weighted_sobolev_norm(h, 2.5);
    CHECK(big.trend == TailTrend::Divergent);
    CHECK_FALSE(big.hypothesis_holds);

    const auto zero = sampled(model("euclidean", 3), 2.0, LambdaSpec::power_law(1, 1), Grid::uniform(1, 5, 64),
                              [](double) { return 0.0; });
    CHECK(weighted_sobolev_norm(zero, 1.0).value == 0.0);
}

TEST_CASE("gradient integrability away from the boundary") {
    const auto g = gradient_lp_check(exact_h(), 0.1);
    CHECK_FALSE(g.skipped);
    CHECK(g.trend == TailTrend::Finite);
    CHECK(g.value > 0.0);

    const auto constant = sampled(model("euclidean", 3), 2.0, LambdaSpec::zero(), Grid::uniform(1, 3, 64),
                                  [](double) { return 0.5; }, Provenance::Newton);
    const auto c = gradient_lp_check(constant);
    CHECK_FALSE(c.skipped);
    CHECK(c.trend == TailTrend::Finite);
    CHECK(c.value == 0.0);

    // bounded increasing profile on a stochastically incomplete manifold
    const auto rising = sampled(model("flare_cubic", 3), 2.0, LambdaSpec::power_law(1, 1), Grid::uniform(1, 4, 300),
                                [](double r) { return 1 - 0.5 / r; });
    const auto f = gradient_lp_check(rising, 0.1);
    CHECK(f.skipped);
    CHECK_FALSE(f.explanation.empty());
}

TEST_CASE("ordering of solutions") {
    const auto one = minimal("euclidean", 3, 2.0, 1.0);
    const auto two = minimal("euclidean", 3, 2.0, 2.0);
    const auto below = compare_ordering(two, one);
    CHECK(below.holds);
    CHECK_FALSE(compare_ordering(one, two).holds);

    const auto self = compare_ordering(one, one);
    CHECK(self.holds);
    CHECK(self.max_violation == 0.0);

    // Dirichlet iterates on growing annuli increase
    const ExteriorProblem prob{model("hyperbolic", 3), 1.0, 3.0, LambdaSpec::power_law(1, 2), 1.0};
    const auto k0 = solve_annulus_bvp(prob, 0.0, Grid::uniform(1, 5, 400));
    const auto k1 = solve_annulus_bvp(prob, 0.0, Grid::uniform(1, 9, 800));
    CHECK(compare_ordering(k0, k1).holds);

    const ExteriorProblem shifted{model("hyperbolic", 3), 10.0, 3.0, LambdaSpec::power_law(1, 2), 1.0};
    const auto far = solve_annulus_bvp(shifted, 0.0, Grid::uniform(10, 12, 64));
    CHECK_THROWS_AS((void)compare_ordering(k0, far), GridMismatch);
}

TEST_CASE("power comparison across lambda") {
    const auto half = minimal("euclidean", 3, 2.0, 0.5);
    const auto one = minimal("euclidean", 3, 2.0, 1.0);
    const auto c = lambda_power_comparison(half, one);
    CHECK(c.alpha == doctest::Approx(2.0));
    CHECK(c.ordering.holds);
    CHECK_FALSE(power_ordering(half, one, 1 / c.alpha).holds);

    const auto same = lambda_power_comparison(one, one);
    CHECK(same.alpha == 1.0);
    CHECK(same.ordering.holds);
    CHECK(std::fabs(same.ordering.max_violation) <= 1e-12);

    // (8/1)^{1/2}
    const auto h1 = minimal("hyperbolic", 3, 3.0, 1.0);
    const auto h8 = minimal("hyperbolic", 3, 3.0, 8.0);
    const auto hc = lambda_power_comparison(h1, h8);
    CHECK(hc.alpha == doctest::Approx(std::sqrt(8.0)));
    CHECK(hc.ordering.holds);

    CHECK_THROWS_AS((void)lambda_power_comparison(one, half), EvalError);
    CHECK_THROWS_AS((void)lambda_power_comparison(minimal("euclidean", 2, 2.0, 0.5), one), GridMismatch);
}
