#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "chimera/averaging.hpp"
#include "chimera/rng.hpp"
#include "chimera/ws.hpp"

using namespace chimera;
using core::StarParams;

TEST_CASE("P, Q, R at the origin") {
    REQUIRE(averaging::p_function(0.0) == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(averaging::q_function(0.0) == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(averaging::r_function(0.0) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("P matches its odd series with coefficients 1, 3/4, 5/8") {
    const double x = 0.1;
    const double series = x + 0.75 * x * x * x + 0.625 * std::pow(x, 5);
    REQUIRE(averaging::p_function(x) == Catch::Approx(series).margin(1e-7));
    // And the full truncated series oracle agrees far more tightly.
    for (double v : {-0.5, -0.3, 0.05, 0.2, 0.45})
        REQUIRE(averaging::p_function(v) == Catch::Approx(averaging::p_series(v)).margin(1e-12));
}

TEST_CASE("Q = 1 + (x/2) P throughout [-0.9, 0.9]") {
    for (int i = -18; i <= 18; ++i) {
        const double x = i / 20.0;
        REQUIRE(std::abs(averaging::q_function(x) - 1.0 - 0.5 * x * averaging::p_function(x)) <
                1e-10);
    }
}

TEST_CASE("dR/dx(0) = 1 by central differences") {
    const double h = 1e-4;
    const double fd = (averaging::r_function(h) - averaging::r_function(-h)) / (2.0 * h);
    REQUIRE(fd == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("P is odd and increasing on [0, 1 - delta0]") {
    double prev = 0.0;
    for (int i = 1; i <= 19; ++i) {
        const double x = 0.05 * i;
        const double px = averaging::p_function(x);
        REQUIRE(px > prev);
        REQUIRE(averaging::p_function(-x) == Catch::Approx(-px).margin(1e-12));
        prev = px;
    }
}

TEST_CASE("domain error at |x| >= 1") {
    REQUIRE_THROWS_AS(averaging::p_function(1.0), std::domain_error);
    REQUIRE_THROWS_AS(averaging::q_function(-1.3), std::domain_error);
}

TEST_CASE("averaged field: origin, sign, slope at zero") {
    StarParams p(100.0, 0.5, 0.3, 8);
    const auto f = averaging::averaged_field(p, 0.05);
    REQUIRE_FALSE(f.regime_warning);
    REQUIRE(f(0.0) == Catch::Approx(0.0).margin(1e-14));
    for (int i = 1; i <= 100; ++i) {
        const double rho = 0.95 * i / 100.0;
        REQUIRE(f(rho) < 0.0);
    }
    // The slope at the origin follows the chain rule through R(sigma*rho):
    // dF1/drho(0) = -(sigma^2/4) sin(2 delta).
    const double h = 1e-5;
    const double fd = (f(h) - f(-h)) / (2.0 * h);
    REQUIRE(fd == Catch::Approx(-(0.5 * 0.5 / 4.0) * std::sin(0.6)).margin(1e-6));

    // sigma >= 1 is outside the averaging regime: flagged, never fatal.
    StarParams hot(100.0, 1.2, 0.3, 8);
    const auto g = averaging::averaged_field(hot, 0.05);
    REQUIRE(g.regime_warning);
    REQUIRE(std::isfinite(g(0.4)));
}

TEST_CASE("slow-fast form equals the polar closed flow rescaled by 1/beta") {
    StarParams p(150.0, 0.5, 0.3, 8);
    Rng rng(7);
    for (int i = 0; i < 40; ++i) {
        const double r = 0.02 + 0.9 * rng.uniform();
        const double eta = rng.angle();
        const auto sf = averaging::slow_fast_rhs(p, r, eta);
        const auto pol = ws::closed_alpha_polar_rhs(p, r, eta);
        REQUIRE(sf.dr == Catch::Approx(pol.dr / p.beta).margin(1e-12));
        REQUIRE(sf.deta == Catch::Approx(pol.deta / p.beta).margin(1e-12));
    }
}

TEST_CASE("the fast angle keeps moving when sigma r < 1") {
    StarParams p(200.0, 0.5, 0.3, 8);
    Rng rng(11);
    for (int i = 0; i < 60; ++i) {
        const double r = 0.05 + 0.9 * rng.uniform();
        const auto sf = averaging::slow_fast_rhs(p, r, rng.angle());
        // |eta'| >= 1 - sigma r - O(1/beta); the O term is bounded by G1/beta.
        const double margin = 1.0 - p.sigma * r - (1.0 + 0.5 * p.sigma * (1.0 + r * r) / r) / p.beta;
        REQUIRE(std::abs(sf.deta) >= margin - 1e-12);
    }
}

TEST_CASE("compare_averaged: r0 = 0 stays at the origin") {
    StarParams p(100.0, 0.5, 0.3, 8);
    const auto cmp = averaging::compare_averaged(p, 0.0, 50.0);
    REQUIRE(cmp.sup_error == 0.0);
    REQUIRE(cmp.c_estimate == 0.0);
}

TEST_CASE("averaging error scales like 1/beta") {
    StarParams base(50.0, 0.5, 0.3, 8);
    std::vector<double> cs;
    for (double beta : {50.0, 100.0, 200.0}) {
        StarParams p(beta, base.sigma, base.delta, 8);
        const auto cmp = averaging::compare_averaged(p, 0.3, 400.0);
        cs.push_back(cmp.c_estimate);
    }
    const double cmax = *std::max_element(cs.begin(), cs.end());
    const double cmin = *std::min_element(cs.begin(), cs.end());
    REQUIRE((cmax - cmin) / cmin < 0.5);
}

TEST_CASE("averaged flow decays monotonically with the linearized tail rate") {
    StarParams p(100.0, 0.5, 0.3, 8);
    const auto field = averaging::averaged_field(p, 0.05);
    // Integrate rho' = (1/beta) F1(rho) directly.
    auto rhs = [&](double, std::span<const double> y, std::span<double> d) {
        d[0] = field(std::clamp(y[0], 0.0, 0.95)) / p.beta;
    };
    ode::IntegrateOptions io;
    io.sample_dt = 50.0;
    io.observers.push_back({"rho", [](double, std::span<const double> y) { return y[0]; }});
    const double horizon = 40000.0;
    auto rec = ode::integrate(rhs, {0.3}, 0.0, horizon, ode::IntegratorConfig{}, io);
    const auto& rho = rec.columns[0];
    for (std::size_t i = 1; i < rho.size(); ++i) REQUIRE(rho[i] < rho[i - 1] + 1e-12);

    // Tail: log rho decays at the linearization rate (sigma^2/4) sin(2 delta) / beta.
    std::vector<double> ts, logs;
    for (std::size_t i = 0; i < rec.times.size(); ++i)
        if (rho[i] < 0.05 && rho[i] > 1e-8) {
            ts.push_back(rec.times[i]);
            logs.push_back(std::log(rho[i]));
        }
    REQUIRE(ts.size() > 10);
    const auto fit = fit_line(ts, logs);
    const double expected = -(p.sigma * p.sigma / 4.0) * std::sin(2.0 * p.delta) / p.beta;
    REQUIRE(std::abs(fit.slope - expected) / std::abs(expected) < 0.1);
}

TEST_CASE("long-horizon slow-fast flow enters a ball around r_minus and stays") {
    StarParams p(100.0, 0.5, 0.3, 8);
    const auto fp = ws::fixed_point_async(p);
    // Same flow in the cartesian chart (regular at alpha = 0), on the slow
    // time scale tau = beta t.
    auto rhs = [&](double, std::span<const double> y, std::span<double> d) {
        const auto da = ws::closed_alpha_rhs(p, {y[0], y[1]}) / p.beta;
        d[0] = da.real();
        d[1] = da.imag();
    };
    ode::IntegrateOptions io;
    io.sample_dt = 20.0;
    io.observers.push_back(
        {"r", [](double, std::span<const double> y) { return std::hypot(y[0], y[1]); }});
    auto rec = ode::integrate(rhs, {0.3, 0.0}, 0.0, 60000.0, ode::IntegratorConfig{}, io);
    // After the transient, r sits near r_minus within the averaging error.
    const double ball = fp.r_minus + 60.0 / p.beta;
    bool entered = false;
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        const bool inside = rec.columns[0][i] < ball;
        if (inside) entered = true;
        if (entered) REQUIRE(inside);
    }
    REQUIRE(entered);
}
