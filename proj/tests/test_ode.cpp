#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "chimera/math.hpp"
#include "chimera/ode.hpp"

using namespace chimera;

namespace {

ode::IntegratorConfig tight() {
    ode::IntegratorConfig c;
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-12;
    return c;
}

}  // namespace

TEST_CASE("constant velocity integrates exactly") {
    auto rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = 1.0; };
    auto rec = ode::integrate(rhs, {0.0}, 0.0, 1.0, ode::IntegratorConfig{});
    REQUIRE(rec.terminal_state[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(rec.terminal_time == 1.0);
}

TEST_CASE("harmonic oscillator matches the closed form") {
    auto rhs = [](double, std::span<const double> y, std::span<double> d) {
        d[0] = y[1];
        d[1] = -y[0];
    };
    auto rec = ode::integrate(rhs, {1.0, 0.0}, 0.0, 10.0, ode::IntegratorConfig{});
    REQUIRE(rec.terminal_state[0] == Catch::Approx(std::cos(10.0)).margin(1e-7));
    REQUIRE(rec.terminal_state[1] == Catch::Approx(-std::sin(10.0)).margin(1e-7));
}

TEST_CASE("halving tolerances moves the answer by less than 10x the larger tolerance") {
    auto rhs = [](double t, std::span<const double> y, std::span<double> d) {
        d[0] = std::cos(t) * y[0];
    };
    ode::IntegratorConfig c1;
    c1.rel_tol = 1e-8;
    c1.abs_tol = 1e-10;
    ode::IntegratorConfig c2 = c1;
    c2.rel_tol /= 2;
    c2.abs_tol /= 2;
    auto r1 = ode::integrate(rhs, {1.0}, 0.0, 6.0, c1);
    auto r2 = ode::integrate(rhs, {1.0}, 0.0, 6.0, c2);
    REQUIRE(std::abs(r1.terminal_state[0] - r2.terminal_state[0]) < 10.0 * c1.rel_tol *
                std::abs(r1.terminal_state[0]) + 10.0 * c1.abs_tol);
    // And both sit on the analytic solution e^{sin t}.
    REQUIRE(r1.terminal_state[0] == Catch::Approx(std::exp(std::sin(6.0))).epsilon(1e-7));
}

TEST_CASE("dense output interpolates to at least 4th order") {
    auto rhs = [](double t, std::span<const double>, std::span<double> d) {
        d[0] = std::cos(t);
    };
    // Force fixed-size macro steps and probe the interpolant mid-step.
    auto max_err = [&](double hstep) {
        ode::IntegratorConfig c;
        c.rel_tol = 10.0;  // every step accepted: max_step dictates the grid
        c.abs_tol = 10.0;
        c.max_step = hstep;
        c.init_step = hstep;
        double worst = 0.0;
        auto wrapped = [&](double t, std::span<const double> y, std::span<double> d) {
            rhs(t, y, d);
        };
        ode::Dopri5<decltype(wrapped)> st(wrapped, 1, c);
        st.set_state(0.0, std::vector<double>{0.0});
        std::vector<double> out(1);
        while (st.t() < 3.0) {
            st.step_towards(3.0);
            const auto& seg = st.segment();
            for (int q = 1; q < 8; ++q) {
                const double tq = seg.t0 + seg.h * q / 8.0;
                seg.eval(tq, out);
                worst = std::max(worst, std::abs(out[0] - std::sin(tq)));
            }
        }
        return worst;
    };
    const double e1 = max_err(0.2);
    const double e2 = max_err(0.1);
    REQUIRE(e1 / e2 > 12.0);  // ~2^4 for a 4th-order interpolant
    REQUIRE(e2 < 1e-7);
}

TEST_CASE("event on a manufactured linear observable is localized to 1e-6") {
    // r(t) = 1 - eta - (t - 5) * 1e-3 crossing the threshold 1 - eta at t = 5.
    const double eta = 0.25;
    auto rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = -1e-3; };
    ode::IntegrateOptions opt;
    opt.events.push_back({"r_drop",
                          [](double, std::span<const double> y) { return y[0]; },
                          1.0 - eta,
                          -1});
    auto rec = ode::integrate(rhs, {1.0 - eta + 5e-3}, 0.0, 20.0, ode::IntegratorConfig{}, opt);
    REQUIRE(rec.event_time.has_value());
    REQUIRE(*rec.event_time == Catch::Approx(5.0).margin(1e-6));
    REQUIRE(rec.event_name == "r_drop");
    REQUIRE(rec.terminal_time == Catch::Approx(5.0).margin(1e-6));
}

TEST_CASE("event direction filtering") {
    auto rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = 1.0; };
    ode::IntegrateOptions opt;
    opt.events.push_back({"up_only",
                          [](double, std::span<const double> y) { return y[0]; },
                          0.5,
                          -1});  // downward only; an upward pass must not fire
    auto rec = ode::integrate(rhs, {0.0}, 0.0, 1.0, ode::IntegratorConfig{}, opt);
    REQUIRE_FALSE(rec.event_time.has_value());
}

TEST_CASE("time reversal returns to the start on a pendulum") {
    auto fwd = [](double, std::span<const double> y, std::span<double> d) {
        d[0] = y[1];
        d[1] = -std::sin(y[0]);
    };
    auto bwd = [](double, std::span<const double> y, std::span<double> d) {
        d[0] = -y[1];
        d[1] = std::sin(y[0]);
    };
    auto cfg = tight();
    auto there = ode::integrate(fwd, {1.2, 0.0}, 0.0, 10.0, cfg);
    auto back = ode::integrate(bwd, there.terminal_state, 0.0, 10.0, cfg);
    REQUIRE(std::abs(back.terminal_state[0] - 1.2) < 100 * cfg.rel_tol + 100 * cfg.abs_tol);
    REQUIRE(std::abs(back.terminal_state[1] - 0.0) < 100 * cfg.rel_tol + 100 * cfg.abs_tol);
}

TEST_CASE("finite-time blow-up raises an integration failure with the last good time") {
    auto rhs = [](double, std::span<const double> y, std::span<double> d) { d[0] = y[0] * y[0]; };
    try {
        ode::integrate(rhs, {1.0}, 0.0, 2.0, ode::IntegratorConfig{});
        FAIL("expected IntegrationError");
    } catch (const ode::IntegrationError& e) {
        REQUIRE(e.last_good_time > 0.9);
        REQUIRE(e.last_good_time < 1.01);
    }
}

TEST_CASE("observer cadence and strictly increasing sample times") {
    auto rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = -0.3; };
    ode::IntegrateOptions opt;
    opt.sample_dt = 0.25;
    opt.observers.push_back({"y", [](double, std::span<const double> y) { return y[0]; }});
    auto rec = ode::integrate(rhs, {1.0}, 0.0, 10.0, ode::IntegratorConfig{}, opt);
    REQUIRE(rec.times.size() == 41);
    for (std::size_t i = 1; i < rec.times.size(); ++i) REQUIRE(rec.times[i] > rec.times[i - 1]);
    REQUIRE(rec.columns[0].size() == rec.times.size());
    REQUIRE(rec.columns[0][4] == Catch::Approx(1.0 - 0.3 * 1.0).margin(1e-8));
}

TEST_CASE("on_step hook can renormalize the live state") {
    auto rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = 7.0; };
    ode::IntegrateOptions opt;
    opt.on_step = [](double, std::span<double> y) { y[0] = wrap_2pi(y[0]); };
    auto rec = ode::integrate(rhs, {0.0}, 0.0, 50.0, ode::IntegratorConfig{}, opt);
    REQUIRE(rec.terminal_state[0] >= 0.0);
    REQUIRE(rec.terminal_state[0] < two_pi);
}

TEST_CASE("adiabatic continuation: constant schedule is idempotent") {
    auto make_rhs = [](double sigma) {
        return [sigma](double, std::span<const double> y, std::span<double> d) {
            d[0] = sigma - y[0];
        };
    };
    const double schedule[] = {2.0, 2.0};
    auto pts = ode::integrate_adiabatic(
        make_rhs, schedule, 30.0, 10.0, ode::IntegratorConfig{}, {0.0},
        [](double, std::span<const double> y) { return y[0]; }, 0.1);
    REQUIRE(pts.size() == 2);
    REQUIRE(std::abs(pts[0].r_mean - pts[1].r_mean) < 1e-3);
    REQUIRE(pts[1].r_mean == Catch::Approx(2.0).margin(1e-6));
}

TEST_CASE("csv output is headered and round-trip formatted") {
    ode::RunRecord rec;
    rec.times = {0.0, 0.1};
    rec.names = {"a"};
    rec.columns = {{1.0 / 3.0, 2.0 / 3.0}};
    std::ostringstream os;
    rec.write_csv(os);
    const auto s = os.str();
    REQUIRE(s.find("t,a\n") == 0);
    REQUIRE(s.find("0.33333333333333331") != std::string::npos);
}
