#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "chimera/experiments.hpp"
#include "chimera/rng.hpp"

using namespace chimera;
using core::StarParams;
namespace ex = chimera::experiments;

TEST_CASE("chimera preparation: placement, determinism, window check") {
    StarParams p(200.0, 1.2, 0.3, 64);
    const auto cc = ws::critical_couplings(p.beta, p.delta);
    REQUIRE(cc.sigma_b < 1.2);
    REQUIRE(1.2 < cc.sigma_f);

    // No jitter: the coherent star is exactly locked, the incoherent star
    // sits on the WS chart image of alpha_I.
    const auto clean = ex::prepare_chimera_initial(p, p, 0.0, 7);
    const auto zp = core::order_parameter(clean, 0);
    REQUIRE(zp.magnitude == Catch::Approx(1.0).margin(1e-14));
    const auto zm = core::order_parameter(clean, 1);
    const auto alpha_i = ws::fixed_point_async(p).alpha_I;
    REQUIRE(std::abs(zm.value() - alpha_i) < 1e-6);

    // Same seed, same bits.
    const auto a = ex::prepare_chimera_initial(p, p, 0.01, 42);
    const auto b = ex::prepare_chimera_initial(p, p, 0.01, 42);
    REQUIRE(a.hub == b.hub);
    REQUIRE(a.leaves[0] == b.leaves[0]);
    REQUIRE(a.leaves[1] == b.leaves[1]);
    const auto c = ex::prepare_chimera_initial(p, p, 0.01, 43);
    REQUIRE(a.leaves[0] != c.leaves[0]);

    // sigma outside the bistability window is a configuration error.
    StarParams outside(200.0, 1.05, 0.3, 64);
    REQUIRE_THROWS_AS(ex::prepare_chimera_initial(outside, outside, 0.01, 1),
                      std::invalid_argument);
}

TEST_CASE("criterion eta is confined to (0,1); the r side can never fire at eta=1") {
    StarParams p(200.0, 1.2, 0.3, 64);
    // r+ < 1 - eta would need r < 0 at eta = 1, which is impossible, so the
    // type rejects the degenerate threshold outright.
    REQUIRE_THROWS_AS(ex::chimera_criterion(p, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ex::chimera_criterion(p, 0.0), std::invalid_argument);
    REQUIRE_NOTHROW(ex::chimera_criterion(p, 0.25));
}

TEST_CASE("uncoupled chimera is censored at any horizon") {
    StarParams p(200.0, 1.2, 0.3, 32);
    core::CouplingSpec off;
    off.epsilon = 0.0;
    const auto crit = ex::chimera_criterion(p, 0.25);
    const auto init = ex::prepare_chimera_initial(p, p, 0.01, 3);
    const auto res = ex::measure_lifetime(init, p, p, off, crit, 40.0 * ex::cycle);
    REQUIRE(res.censored);
    REQUIRE(res.tau == 40.0 * ex::cycle);

    // Censoring correctness: every observation sample stays strictly inside.
    const auto& rec = res.record;
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        REQUIRE(rec.columns[0][i] > 1.0 - 0.25);  // r_plus
        REQUIRE(rec.columns[2][i] < 0.25);        // dev_minus
    }
}

TEST_CASE("lifetimes shrink by roughly the coupling ratio (general family)") {
    StarParams p(200.0, 1.2, 0.3, 64);
    const auto crit = ex::chimera_criterion(p, 0.25);
    ex::LifetimeOptions opt;
    opt.keep_record = false;
    auto run = [&](double eps, std::uint64_t seed) {
        const auto init = ex::prepare_chimera_initial(p, p, 0.01, seed);
        return ex::measure_lifetime(init, p, p, ex::general_coupling(eps), crit,
                                    3000.0 * ex::cycle, opt);
    };
    double t_small = 0.0, t_large = 0.0;
    for (std::uint64_t s : {1u, 2u, 3u}) {
        t_small += run(0.1, s).tau / 3.0;
        t_large += run(0.01, s).tau / 3.0;
    }
    const double ratio = t_large / t_small;
    REQUIRE(ratio > 3.0);   // an order of magnitude in eps moves tau by
    REQUIRE(ratio < 40.0);  // roughly that order
}

TEST_CASE("lifetime sweep is deterministic and orders medians") {
    ex::LifetimeSweepConfig cfg;
    cfg.beta = 200.0;
    cfg.sigma = 1.2;
    cfg.delta = 0.3;
    cfg.n_leaves = 32;
    cfg.horizon_cycles = 400.0;
    cfg.epsilons = {0.03, 0.06, 0.12};
    cfg.seeds_per_point = 4;
    cfg.family = ex::LifetimeFamily::General;
    cfg.seed = 5;
    cfg.threads = 2;

    const auto r1 = ex::lifetime_sweep(cfg);
    const auto r2 = ex::lifetime_sweep(cfg);
    REQUIRE(r1.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(r1.points[i].tau == r2.points[i].tau);  // bitwise repeatable
        REQUIRE(r1.points[i].censored == r2.points[i].censored);
    }
    REQUIRE(r1.fit.slope == r2.fit.slope);

    // Median lifetime does not increase when the coupling doubles.
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    REQUIRE(median(r1.points[0].tau) >= median(r1.points[1].tau));
    REQUIRE(median(r1.points[1].tau) >= median(r1.points[2].tau));
    REQUIRE(r1.fit.slope < 0.0);
}

TEST_CASE("synchronization diagram shows the hysteresis window at desk scale") {
    ex::DiagramConfig cfg;
    cfg.beta = 10.0;
    cfg.delta = 0.3;
    cfg.n_leaves = 32;
    cfg.dsigma = 0.1;
    cfg.sigma_max = 2.6;
    cfg.settle = 150.0;
    cfg.measure = 50.0;
    cfg.seed = 11;
    const auto cc = ws::critical_couplings(cfg.beta, cfg.delta);

    const auto fwd = ex::sync_diagram(cfg, ex::SweepDirection::Forward);
    const auto bwd = ex::sync_diagram(cfg, ex::SweepDirection::Backward);
    REQUIRE(fwd.size() == bwd.size());

    // Forward: the jump to r ~ 1 happens near sigma_f, not before.
    double first_high = 1e9;
    for (const auto& pt : fwd)
        if (pt.r_mean > 0.99) {
            first_high = pt.sigma;
            break;
        }
    REQUIRE(first_high > cc.sigma_f - 2.5 * cfg.dsigma);
    REQUIRE(first_high < cc.sigma_f + 2.5 * cfg.dsigma);

    // Backward: synchrony holds until near sigma_b, then collapses.
    double last_high = 1e9;
    for (const auto& pt : bwd)
        if (pt.r_mean > 0.99) last_high = std::min(pt.sigma, last_high);
    for (const auto& pt : bwd)
        if (pt.sigma < cc.sigma_b - 2.5 * cfg.dsigma) REQUIRE(pt.r_mean < 0.3);
    REQUIRE(last_high < cc.sigma_b + 2.5 * cfg.dsigma);

    // Hysteresis area (forward minus backward r over the shared grid) > 0.
    double area = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        REQUIRE(fwd[i].sigma == Catch::Approx(bwd[bwd.size() - 1 - i].sigma).margin(1e-12));
        area += (bwd[bwd.size() - 1 - i].r_mean - fwd[i].r_mean) * cfg.dsigma;
    }
    REQUIRE(area > 0.0);

    // Outside the window both branches agree. Below sigma ~ 0.2 the
    // incoherent relaxation rate ~ sigma^2 is too slow for the desk-scale
    // settle window and the forward branch still carries its random-init r,
    // so the comparison starts where relaxation is meaningful.
    for (std::size_t i = 0; i < fwd.size(); ++i) {
        const double s = fwd[i].sigma;
        if ((s > 0.25 && s < cc.sigma_b - 2.5 * cfg.dsigma) || s > cc.sigma_f + 2.5 * cfg.dsigma)
            REQUIRE(std::abs(fwd[i].r_mean - bwd[bwd.size() - 1 - i].r_mean) < 0.05);
    }
}

TEST_CASE("z-alpha deviation decays geometrically in N") {
    std::vector<int> ns;
    for (int n = 4; n <= 24; ++n) ns.push_back(n);
    const auto res = ex::verify_z_alpha(ns, 0.5, 120, 9);
    REQUIRE(std::abs(res.fit.slope - std::log(0.5)) / std::abs(std::log(0.5)) < 0.15);
    // Jittered theta degrades gracefully: bounded by the uniform case plus a
    // Lipschitz term (the derivative of the action is at most (1+r)/(1-r)).
    const auto base = ex::verify_z_alpha(std::vector<int>{16}, 0.5, 120, 9);
    const auto jit = ex::verify_z_alpha(std::vector<int>{16}, 0.5, 120, 9, 0.01);
    REQUIRE(jit.rows[0].sup_dev <= base.rows[0].sup_dev + 3.0 * 0.01);
    // Sparse variant: k arbitrary entries cost at most (k/N) * B with B = 2.
    const auto sparse = ex::verify_z_alpha(std::vector<int>{256}, 0.5, 40, 9, 0.0, 8);
    REQUIRE(sparse.rows[0].sup_dev <= 2.0 * 8.0 / 256.0 + 1e-6);
}

TEST_CASE("sparse run refuses dense index sets") {
    StarParams p(200.0, 1.2, 0.3, 64);
    std::vector<int> too_many(8);
    for (int i = 0; i < 8; ++i) too_many[static_cast<std::size_t>(i)] = i;
    REQUIRE_THROWS_AS(ex::sparse_coupling_run(p, too_many, 0.007, 0.25, 1.0, 1),
                      std::invalid_argument);
}

TEST_CASE("sparse coupling persists where full coupling collapses (short horizon)") {
    StarParams p(200.0, 1.2, 0.3, 64);
    const int idx[] = {0, 1, 2};
    ex::LifetimeOptions opt;
    opt.keep_record = false;
    const auto sparse = ex::sparse_coupling_run(p, idx, 0.007, 0.25, 150.0, 21, opt);
    REQUIRE(sparse.persisted);

    const auto crit = ex::chimera_criterion(p, 0.25);
    const auto init = ex::prepare_chimera_initial(p, p, 0.01, 21);
    const auto full = ex::measure_lifetime(init, p, p, ex::general_coupling(0.05), crit,
                                           150.0 * ex::cycle, opt);
    REQUIRE_FALSE(full.censored);
}

TEST_CASE("BA generator: exact mean degree, connectivity, determinism, tail exponent") {
    const auto g = ex::generate_ba(1000, 3, 77);
    REQUIRE(g.mean_degree() == Catch::Approx(2.0 * 3 * (1000 - 3) / 1000.0).margin(1e-12));
    REQUIRE(g.mean_degree() >= 5.9);
    REQUIRE(g.mean_degree() <= 6.0);

    // Connected: depth-first search reaches every vertex.
    std::vector<int> seen(1000, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int k = g.offsets[static_cast<std::size_t>(v)];
             k < g.offsets[static_cast<std::size_t>(v) + 1]; ++k) {
            const int u = g.neighbors[static_cast<std::size_t>(k)];
            if (!seen[static_cast<std::size_t>(u)]) {
                seen[static_cast<std::size_t>(u)] = 1;
                ++count;
                stack.push_back(u);
            }
        }
    }
    REQUIRE(count == 1000);

    const auto g2 = ex::generate_ba(1000, 3, 77);
    REQUIRE(g.neighbors == g2.neighbors);
    const auto g3 = ex::generate_ba(1000, 3, 78);
    REQUIRE(g.neighbors != g3.neighbors);

    const double gamma = ex::degree_tail_exponent(g);
    REQUIRE(gamma > 2.1);
    REQUIRE(gamma < 3.1);

    REQUIRE_THROWS_AS(ex::generate_ba(3, 3, 1), std::invalid_argument);
}

TEST_CASE("coupled BA run: sigma=0, eps=0 advances each phase at its degree") {
    const auto g = ex::generate_ba(40, 3, 5);
    ex::BaRunConfig cfg;
    cfg.sigma = 0.0;
    cfg.epsilon = 0.0;
    cfg.delta = 0.3;
    cfg.horizon_cycles = 0.05;
    cfg.sample_dt = 0.05;
    std::vector<double> init(80, 0.5);
    const auto rec = ex::ba_chimera_run(g, g, cfg, init);
    const double t_end = rec.terminal_time;
    for (std::size_t i = 0; i < 80; ++i) {
        const double expect = wrap_2pi(0.5 + t_end * g.degree[i % 40]);
        REQUIRE(wrap_2pi(rec.terminal_state[i]) == Catch::Approx(expect).margin(1e-8));
    }
    REQUIRE(rec.names[0] == "r_plus");
    REQUIRE(rec.names[1] == "r_minus");
}

TEST_CASE("measure_lifetime record serializes deterministically") {
    StarParams p(200.0, 1.2, 0.3, 16);
    const auto crit = ex::chimera_criterion(p, 0.25);
    const auto init = ex::prepare_chimera_initial(p, p, 0.01, 12);
    auto once = [&] {
        const auto res = ex::measure_lifetime(init, p, p, ex::general_coupling(0.05), crit,
                                              30.0 * ex::cycle);
        std::ostringstream os;
        res.record.write_csv(os);
        return os.str();
    };
    REQUIRE(once() == once());
}
