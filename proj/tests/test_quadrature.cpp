#include "pfeller/errors.hpp"
#include "pfeller/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace pfeller::quad;

TEST_CASE("log_add and log_sub") {
    CHECK(log_add(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)));
    CHECK(log_add(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
    CHECK(log_add(-std::numeric_limits<double>::infinity(), 4.0) == 4.0);
    CHECK(log_sub(std::log(5.0), std::log(3.0)) == doctest::Approx(std::log(2.0)));
    CHECK(log_sub(1.0, 1.0) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("smooth integrands") {
    const auto r = integrate_log([](double t) { return -2.0 * std::log(t); }, 1.0, 1e6);
    CHECK(std::exp(r.log_value) == doctest::Approx(1.0 - 1e-6).epsilon(1e-11));

    const auto g = integrate_log([](double t) { return -t * t; }, -8.0, 8.0);
    CHECK(std::exp(g.log_value) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-11));
}

TEST_CASE("super-exponential integrands far beyond double range") {
    // int_a^b exp(2 t^3) dt ~ e^{2 b^3}/(6 b^2) for large b
    for (double b : {50.0, 1e3, 1e6}) {
        CAPTURE(b);
        const auto r = integrate_log([](double t) { return 2.0 * t * t * t; }, b / 2, b);
        // Laplace endpoint expansion: e^g/g' (1 + g''/g'^2 + O(b^-6)), g''/g'^2 = 1/(3 b^3)
        const double asym = 2 * b * b * b - std::log(6 * b * b) + 1.0 / (3 * b * b * b);
        CHECK(std::fabs(r.log_value - asym) <= 1e-9 + 1e-14 * asym);
    }
    // decaying steep: int_r^inf t^2 exp(-2 t^3) = exp(-2 r^3)/6 exactly
    for (double r : {1.0, 3.0, 20.0}) {
        CAPTURE(r);
        const auto v = integrate_log([](double t) { return 2 * std::log(t) - 2 * t * t * t; }, r, 2 * r);
        const double exact = -2 * r * r * r - std::log(6.0) + std::log(-std::expm1(-2 * 7 * r * r * r));
        CHECK(v.log_value == doctest::Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("cumulative integrals without cancellation") {
    // f = t^2 e^{-2t^3}: forward(r) = (1 - e^{-2r^3})/6, tail(r) = e^{-2r^3}/6
    LogCumulative c([](double t) { return t > 0 ? 2 * std::log(t) - 2 * t * t * t : -INFINITY; }, 0.0, 64.0);
    for (double r : {0.5, 1.0, 2.0, 5.0, 10.0}) {
        CAPTURE(r);
        CHECK(c.log_tail(r) == doctest::Approx(-2 * r * r * r - std::log(6.0)).epsilon(1e-9));
        CHECK(std::exp(c.log_forward(r)) == doctest::Approx(-std::expm1(-2 * r * r * r) / 6).epsilon(1e-10));
    }
    CHECK(c.tail_finite());

    // 1/t^2 on [1, 2^20]: tail beyond the grid is extrapolated geometrically
    LogCumulative p([](double t) { return -2 * std::log(t); }, 1.0, std::pow(2.0, 20));
    CHECK(std::exp(p.log_tail(4.0)) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(p.tail_finite());

    LogCumulative lin([](double t) { return std::log(t); }, 1.0, 1024.0);
    CHECK_FALSE(lin.tail_finite());
    CHECK(std::exp(lin.log_forward(10.0)) == doctest::Approx(49.5).epsilon(1e-12));
}

TEST_CASE("NaN integrand is an evaluation error") {
    CHECK_THROWS_AS((void)integrate_log([](double) { return std::nan(""); }, 0.0, 1.0), pfeller::EvalError);
}
