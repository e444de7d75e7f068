#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chimera/averaging.hpp"
#include "chimera/core.hpp"
#include "chimera/math.hpp"
#include "chimera/ode.hpp"
#include "chimera/parallel.hpp"
#include "chimera/rng.hpp"
#include "chimera/ws.hpp"
#include "chimera/ws_flow.hpp"

namespace chimera::experiments {

using core::CouplingFamily;
using core::CouplingPattern;
using core::CouplingSpec;
using core::cplx;
using core::PhaseState;
using core::StarParams;

/// One cycle of the leaves' natural frequency (omega = 1 after rescaling).
inline constexpr double cycle = two_pi;

// ---------------------------------------------------------------------------
// Coupling constructors used across the experiments.
// ---------------------------------------------------------------------------

/// Canonical non-sinusoidal C^1 coupling h(x) = sin x + 0.3 sin 2x
/// (the second harmonic breaks the Mobius-compatible form).
inline CouplingSpec general_coupling(double eps,
                                     CouplingPattern pattern = CouplingPattern::LeafToLeafFull) {
    CouplingSpec cs;
    cs.epsilon = eps;
    cs.family = CouplingFamily::GeneralSmooth;
    cs.h = [](double x) { return std::sin(x) + 0.3 * std::sin(2.0 * x); };
    cs.h_on_unit = +[](cplx w) { return w.imag() * (1.0 + 0.6 * w.real()); };
    cs.pattern = pattern;
    return cs;
}

/// Kuramoto--Sakaguchi coupling h(x) = sin(x + delta).
inline CouplingSpec sinusoidal_coupling(double eps, double offset,
                                        CouplingPattern pattern = CouplingPattern::LeafToLeafFull) {
    CouplingSpec cs;
    cs.epsilon = eps;
    cs.family = CouplingFamily::Sinusoidal;
    cs.c1 = 1.0;
    cs.offset = offset;
    cs.pattern = pattern;
    return cs;
}

// ---------------------------------------------------------------------------
// Chimera criterion and preparation.
// ---------------------------------------------------------------------------

/// The chimera is considered broken at the first time
/// |z^- - alpha_I| > eta  or  r^+ < 1 - eta.
struct ChimeraCriterion {
    double eta;
    cplx alpha_I_ref;
};

inline ChimeraCriterion chimera_criterion(const StarParams& minus, double eta) {
    require(eta > 0.0 && eta < 1.0, "chimera_criterion: eta must be in (0,1)");
    return {eta, ws::fixed_point_async(minus).alpha_I};
}

/// Star + locked at phi^C, star - on the incoherent branch (uniform theta
/// pushed through the Mobius chart at alpha_I), plus seeded uniform jitter in
/// [0, jitter_amplitude) on every coordinate. Requires sigma inside the
/// bistability window of both stars.
inline PhaseState prepare_chimera_initial(const StarParams& plus, const StarParams& minus,
                                          double jitter_amplitude, std::uint64_t seed) {
    for (const StarParams* p : {&plus, &minus}) {
        const auto cc = ws::critical_couplings(p->beta, p->delta);
        require(p->sigma > cc.sigma_b && p->sigma < cc.sigma_f,
                "prepare_chimera_initial: sigma outside the bistability window (sigma_b, sigma_f)");
    }
    const double phi_c = ws::fixed_point_sync(plus).phi_C;
    const cplx alpha_i = ws::fixed_point_async(minus).alpha_I;
    const auto theta = ws::uniform_theta(minus.n_leaves);
    ws::WsState incoherent(alpha_i, 0.0, theta);
    const auto rel_minus = ws::reconstruct_phases(incoherent);

    Rng rng(seed);
    auto jit = [&] { return jitter_amplitude > 0.0 ? rng.uniform(0.0, jitter_amplitude) : 0.0; };

    const double hub_plus = jit();
    std::vector<double> leaves_plus(static_cast<std::size_t>(plus.n_leaves));
    for (auto& p : leaves_plus) p = hub_plus + phi_c + jit();
    const double hub_minus = jit();
    std::vector<double> leaves_minus(rel_minus.size());
    for (std::size_t j = 0; j < rel_minus.size(); ++j) leaves_minus[j] = hub_minus + rel_minus[j] + jit();
    return PhaseState::coupled(hub_plus, std::move(leaves_plus), hub_minus,
                               std::move(leaves_minus));
}

// ---------------------------------------------------------------------------
// Lifetime measurement.
// ---------------------------------------------------------------------------

struct LifetimeResult {
    double tau = 0.0;      // first criterion crossing, or the horizon when censored
    bool censored = false;
    ode::RunRecord record;
};

struct LifetimeOptions {
    double sample_dt = cycle / 10.0;  // 10 samples per natural-frequency cycle
    bool keep_record = true;
    ode::IntegratorConfig ode;
};

/// Integrates the coupled system from `initial` with event detection on both
/// criterion observables; halts at the first crossing.
inline LifetimeResult measure_lifetime(const PhaseState& initial, const StarParams& plus,
                                       const StarParams& minus, const CouplingSpec& coupling,
                                       const ChimeraCriterion& criterion, double horizon,
                                       const LifetimeOptions& opt = {}) {
    require(horizon > 0.0, "measure_lifetime: horizon must be > 0");
    core::CoupledRelativeRhs rhs(plus, minus, coupling);
    const auto n = static_cast<std::size_t>(plus.n_leaves);
    std::vector<double> y = core::to_relative(initial);

    auto r_plus = [n](double, std::span<const double> s) {
        return std::abs(core::order_parameter_relative(s.subspan(0, n)));
    };
    auto dev_minus = [n, a = criterion.alpha_I_ref](double, std::span<const double> s) {
        return std::abs(core::order_parameter_relative(s.subspan(n, n)) - a);
    };

    ode::IntegrateOptions io;
    io.sample_dt = opt.sample_dt;
    if (opt.keep_record) {
        io.observers.push_back({"r_plus", r_plus});
        io.observers.push_back(
            {"r_minus", [n](double, std::span<const double> s) {
                 return std::abs(core::order_parameter_relative(s.subspan(n, n)));
             }});
        io.observers.push_back({"dev_minus", dev_minus});
    }
    io.events.push_back({"incoherent_escape", dev_minus, criterion.eta, +1});
    io.events.push_back({"coherent_breakdown", r_plus, 1.0 - criterion.eta, -1});
    io.halt_on_event = true;
    io.on_step = [](double, std::span<double> s) {
        for (auto& v : s) v = wrap_2pi(v);
    };

    // A state already outside the thresholds has no crossing to detect.
    if (dev_minus(0.0, y) > criterion.eta || r_plus(0.0, y) < 1.0 - criterion.eta)
        return {0.0, false, {}};

    auto rec = ode::integrate(rhs, std::move(y), 0.0, horizon, opt.ode, io);
    LifetimeResult out;
    out.censored = !rec.event_time.has_value();
    out.tau = out.censored ? horizon : *rec.event_time;
    if (opt.keep_record) out.record = std::move(rec);
    return out;
}

// ---------------------------------------------------------------------------
// Lifetime sweep over epsilon.
// ---------------------------------------------------------------------------

enum class LifetimeFamily { General, Sinusoidal };

struct LifetimeSweepConfig {
    double beta = 200.0;
    double sigma = 1.2;
    double delta = 0.3;
    int n_leaves = 64;
    double eta = 0.25;
    double jitter = 0.01;
    double horizon_cycles = 1e4;
    std::vector<double> epsilons;  // see log_spaced()
    int seeds_per_point = 10;
    LifetimeFamily family = LifetimeFamily::General;
    std::uint64_t seed = 1;
    int threads = 0;
    LifetimeOptions run;
    std::function<void(int done, int total)> progress;  // called after each run
};

inline std::vector<double> log_spaced(double lo, double hi, int n) {
    require(lo > 0.0 && hi > lo && n >= 2, "log_spaced: need hi > lo > 0 and n >= 2");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return v;
}

struct SweepPoint {
    double epsilon = 0.0;
    std::vector<double> tau;        // per seed
    std::vector<std::uint8_t> censored;
    std::vector<std::uint8_t> failed;  // integration failure (tau is NaN)
    double mean_tau = 0.0;          // over non-censored, non-failed samples
    double sd_tau = 0.0;
    int censored_count = 0;
    int failed_count = 0;
    bool excluded = false;          // no usable samples -> not in the fit
};

struct SweepResult {
    std::vector<SweepPoint> points;
    LineFit fit;  // slope of log<tau> vs log eps over included points
    bool fit_valid = false;  // false when fewer than 2 points had usable samples
    bool has_failures = false;
};

inline SweepResult lifetime_sweep(const LifetimeSweepConfig& cfg) {
    require(cfg.epsilons.size() >= 2, "lifetime_sweep: need at least 2 epsilon points");
    require(cfg.seeds_per_point >= 1, "lifetime_sweep: need at least 1 seed per point");
    const StarParams params(cfg.beta, cfg.sigma, cfg.delta, cfg.n_leaves);
    const auto criterion = chimera_criterion(params, cfg.eta);
    const double horizon = cfg.horizon_cycles * cycle;

    const int ne = static_cast<int>(cfg.epsilons.size());
    const int total = ne * cfg.seeds_per_point;
    std::vector<double> taus(static_cast<std::size_t>(total));
    std::vector<std::uint8_t> cens(static_cast<std::size_t>(total));
    std::vector<std::uint8_t> fails(static_cast<std::size_t>(total), 0);
    std::atomic<int> done{0};

    LifetimeOptions run_opt = cfg.run;
    run_opt.keep_record = false;

    parallel_for(total, cfg.threads, [&](int idx) {
        const int ei = idx / cfg.seeds_per_point;
        const int si = idx % cfg.seeds_per_point;
        const double eps = cfg.epsilons[static_cast<std::size_t>(ei)];
        const auto coupling = cfg.family == LifetimeFamily::General
                                  ? general_coupling(eps)
                                  : sinusoidal_coupling(eps, cfg.delta);
        const std::uint64_t run_seed =
            derive_seed(cfg.seed, {0x11fe, static_cast<std::uint64_t>(ei),
                                   static_cast<std::uint64_t>(si)});
        const auto initial = prepare_chimera_initial(params, params, cfg.jitter, run_seed);
        try {
            const auto res =
                measure_lifetime(initial, params, params, coupling, criterion, horizon, run_opt);
            taus[static_cast<std::size_t>(idx)] = res.tau;
            cens[static_cast<std::size_t>(idx)] = res.censored ? 1 : 0;
        } catch (const ode::IntegrationError&) {
            taus[static_cast<std::size_t>(idx)] = std::numeric_limits<double>::quiet_NaN();
            fails[static_cast<std::size_t>(idx)] = 1;
        }
        if (cfg.progress) cfg.progress(done.fetch_add(1) + 1, total);
    });

    SweepResult out;
    std::vector<double> log_eps, log_tau;
    for (int ei = 0; ei < ne; ++ei) {
        SweepPoint pt;
        pt.epsilon = cfg.epsilons[static_cast<std::size_t>(ei)];
        double sum = 0.0, sum2 = 0.0;
        int kept = 0;
        for (int si = 0; si < cfg.seeds_per_point; ++si) {
            const auto idx = static_cast<std::size_t>(ei * cfg.seeds_per_point + si);
            pt.tau.push_back(taus[idx]);
            pt.censored.push_back(cens[idx]);
            pt.failed.push_back(fails[idx]);
            if (fails[idx]) {
                ++pt.failed_count;
                out.has_failures = true;
            } else if (cens[idx]) {
                ++pt.censored_count;
            } else {
                sum += taus[idx];
                sum2 += taus[idx] * taus[idx];
                ++kept;
            }
        }
        if (kept > 0) {
            pt.mean_tau = sum / kept;
            pt.sd_tau = kept > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / kept) / (kept - 1)))
                                 : 0.0;
            log_eps.push_back(std::log(pt.epsilon));
            log_tau.push_back(std::log(pt.mean_tau));
        } else {
            pt.excluded = true;
        }
        out.points.push_back(std::move(pt));
    }
    if (log_eps.size() >= 2) {
        out.fit = fit_line(log_eps, log_tau);
        out.fit_valid = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synchronization diagram (adiabatic continuation of a single star).
// ---------------------------------------------------------------------------

/// Relative leaf phases of an isolated star; the hub equation decouples.
class SingleStarLeafRhs {
  public:
    SingleStarLeafRhs(double beta, double sigma, double delta, int n)
        : beta_(beta), sigma_(sigma), delta_(delta), n_(static_cast<std::size_t>(n)),
          sbuf_(n_), cbuf_(n_) {}

    void operator()(double, std::span<const double> y, std::span<double> dydt) const {
        const double sd = std::sin(delta_), cd = std::cos(delta_);
        double* sb = sbuf_.data();
        double* cb = cbuf_.data();
        fast_sincos_span(y.data(), sb, cb, n_);
        double sum_s = 0.0, sum_c = 0.0;
        const double base = 1.0 - beta_;
        for (std::size_t i = 0; i < n_; ++i) {
            sum_s += sb[i];
            sum_c += cb[i];
            dydt[i] = base - sigma_ * (sb[i] * cd - cb[i] * sd);
        }
        const double mf = beta_ * sigma_ / static_cast<double>(n_) * (sum_s * cd + sum_c * sd);
        for (std::size_t i = 0; i < n_; ++i) dydt[i] -= mf;
    }

  private:
    double beta_, sigma_, delta_;
    std::size_t n_;
    mutable std::vector<double> sbuf_, cbuf_;
};

enum class SweepDirection { Forward, Backward };

struct DiagramConfig {
    double beta = 10.0;
    double delta = 0.3;
    int n_leaves = 200;
    double dsigma = 0.02;
    double sigma_max = 2.6;
    double settle = 400.0;
    double measure = 100.0;
    double jitter = 0.01;    // per-step jitter, backward direction only
    std::uint64_t seed = 1;
    double sample_dt = cycle / 10.0;
    ode::IntegratorConfig ode;
};

struct DiagramPoint {
    double sigma;
    double r_mean;
};

inline std::vector<DiagramPoint> sync_diagram(const DiagramConfig& cfg,
                                              SweepDirection direction) {
    require(cfg.dsigma > 0.0, "sync_diagram: dsigma must be > 0");
    const int n_pts = static_cast<int>(std::floor(cfg.sigma_max / cfg.dsigma + 1e-9)) + 1;
    std::vector<double> schedule(static_cast<std::size_t>(n_pts));
    for (int i = 0; i < n_pts; ++i) {
        const double s = cfg.dsigma * i;
        schedule[static_cast<std::size_t>(direction == SweepDirection::Forward
                                              ? i
                                              : n_pts - 1 - i)] = s;
    }

    Rng rng(derive_seed(cfg.seed, {0xd1a6, direction == SweepDirection::Forward ? 0u : 1u}));
    std::vector<double> y0(static_cast<std::size_t>(cfg.n_leaves));
    if (direction == SweepDirection::Forward) {
        for (auto& p : y0) p = rng.uniform(0.0, two_pi);
    } else {
        StarParams top(cfg.beta, cfg.sigma_max, cfg.delta, cfg.n_leaves);
        const double phi_c = ws::fixed_point_sync(top).phi_C;
        std::fill(y0.begin(), y0.end(), wrap_2pi(phi_c));
    }

    auto make_rhs = [&](double sigma) {
        return SingleStarLeafRhs(cfg.beta, sigma, cfg.delta, cfg.n_leaves);
    };
    auto r_obs = [](double, std::span<const double> y) {
        return std::abs(core::order_parameter_relative(y));
    };
    ode::StepHook wrap = [](double, std::span<double> y) {
        for (auto& v : y) v = wrap_2pi(v);
    };
    std::function<void(std::span<double>)> jitter;
    if (direction == SweepDirection::Backward && cfg.jitter > 0.0)
        jitter = [&rng, amp = cfg.jitter](std::span<double> y) {
            for (auto& v : y) v += rng.uniform(0.0, amp);
        };

    const auto pts = ode::integrate_adiabatic(make_rhs, schedule, cfg.settle, cfg.measure,
                                              cfg.ode, std::move(y0), r_obs, cfg.sample_dt, wrap,
                                              jitter);
    std::vector<DiagramPoint> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back({p.sigma, p.r_mean});
    return out;
}

// ---------------------------------------------------------------------------
// Direct verification that z(alpha, psi, theta) stays near alpha.
// ---------------------------------------------------------------------------

struct ZAlphaRow {
    int n = 0;
    double sup_dev = 0.0;
};

struct ZAlphaResult {
    std::vector<ZAlphaRow> rows;
    LineFit fit;  // log sup-deviation vs N; slope ~ log(r_disk)
};

/// For theta uniform (optionally jittered, optionally with k arbitrary
/// entries) and random |alpha| <= r_disk, psi: records sup |z - alpha| per N.
inline ZAlphaResult verify_z_alpha(std::span<const int> n_values, double r_disk, int samples,
                                   std::uint64_t seed, double theta_jitter = 0.0,
                                   int arbitrary_k = 0) {
    require(r_disk > 0.0 && r_disk < 1.0, "verify_z_alpha: r_disk must be in (0,1)");
    ZAlphaResult out;
    std::vector<double> xs, ys;
    for (int n : n_values) {
        Rng rng(derive_seed(seed, {0x2a1f, static_cast<std::uint64_t>(n)}));
        double sup = 0.0;
        for (int s = 0; s < samples; ++s) {
            // Radius biased toward the disk edge, where the bound is extremal.
            const double r = r_disk * std::pow(rng.uniform(), 0.25);
            const cplx alpha = std::polar(r, rng.angle());
            const double psi = rng.angle();
            auto theta = ws::uniform_theta(n, rng.angle());
            for (auto& t : theta)
                if (theta_jitter > 0.0) t = wrap_2pi(t + rng.uniform(0.0, theta_jitter));
            for (int k = 0; k < std::min(arbitrary_k, n); ++k)
                theta[static_cast<std::size_t>(k)] = rng.angle();
            const cplx z = ws::ws_order_parameter(ws::WsState(alpha, psi, std::move(theta)));
            sup = std::max(sup, std::abs(z - alpha));
        }
        out.rows.push_back({n, sup});
        xs.push_back(static_cast<double>(n));
        ys.push_back(std::log(sup));
    }
    if (xs.size() >= 2) out.fit = fit_line(xs, ys);
    return out;
}

// ---------------------------------------------------------------------------
// WS equivalence: the module's master property, as a measurable quantity.
// ---------------------------------------------------------------------------

/// Integrates the full relative-phase system and the exact-z WS reduction
/// from the same initial data and returns the sup-norm phase discrepancy of
/// the reconstructed leaves over [0, t_end].
inline double ws_equivalence_error(const StarParams& p, const ws::WsState& w0, double t_end,
                                   const ode::IntegratorConfig& cfg, double sample_dt = 0.25) {
    const auto n = static_cast<std::size_t>(p.n_leaves);
    require(w0.theta.size() == n, "ws_equivalence_error: theta size mismatch");

    // Full system: leaves relative to the hub, plus the (decoupled) hub phase.
    std::vector<double> y0 = ws::reconstruct_phases(w0);
    y0.push_back(0.0);
    auto full_rhs = [&p](double, std::span<const double> y, std::span<double> d) {
        core::single_star_relative_rhs(p, y, d);
    };
    ode::IntegrateOptions io;
    io.sample_dt = sample_dt;
    for (std::size_t j = 0; j < n; ++j)
        io.observers.push_back({"phi" + std::to_string(j),
                                [j](double, std::span<const double> y) { return y[j]; }});
    auto full = ode::integrate(full_rhs, std::move(y0), 0.0, t_end, cfg, io);

    const auto ws_traj =
        ws::ws_integrate_star(p, w0, 0.0, t_end, ws::Closure::ExactZ, cfg, sample_dt);

    double sup = 0.0;
    const std::size_t rows = std::min(full.times.size(), ws_traj.times.size());
    for (std::size_t i = 0; i < rows; ++i) {
        ws::WsState s(ws_traj.alpha[i], ws_traj.psi[i], w0.theta);
        const auto rec = ws::reconstruct_phases(s);
        for (std::size_t j = 0; j < n; ++j)
            sup = std::max(sup, std::abs(angle_diff(full.columns[j][i], rec[j])));
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Sparse-coupling persistence run.
// ---------------------------------------------------------------------------

struct SparseRunResult {
    bool persisted = false;
    double breach_time = 0.0;  // valid when !persisted
    ode::RunRecord record;
};

/// Chimera-prepared initial condition, |I| = k coupled leaves, integrated to
/// the horizon; reports whether the criterion stayed silent.
inline SparseRunResult sparse_coupling_run(const StarParams& params,
                                           std::span<const int> coupled_leaves, double epsilon,
                                           double eta, double horizon_cycles, std::uint64_t seed,
                                           const LifetimeOptions& opt = {}) {
    require(static_cast<double>(coupled_leaves.size()) / params.n_leaves <= 0.05,
            "sparse_coupling_run: requires k/N <= 0.05");
    auto coupling = general_coupling(epsilon, CouplingPattern::LeafToLeafSparse);
    coupling.coupled_leaves.assign(coupled_leaves.begin(), coupled_leaves.end());
    const auto criterion = chimera_criterion(params, eta);
    const auto initial = prepare_chimera_initial(params, params, 0.01, seed);
    auto res = measure_lifetime(initial, params, params, coupling, criterion,
                                horizon_cycles * cycle, opt);
    SparseRunResult out;
    out.persisted = res.censored;
    out.breach_time = res.censored ? 0.0 : res.tau;
    out.record = std::move(res.record);
    return out;
}

// ---------------------------------------------------------------------------
// Barabasi--Albert graphs and coupled-network chimera runs.
// ---------------------------------------------------------------------------

struct BaGraph {
    int n = 0;
    int m = 0;
    std::uint64_t seed = 0;
    std::vector<int> offsets;    // CSR
    std::vector<int> neighbors;
    std::vector<int> degree;

    int max_degree_vertex() const {
        return static_cast<int>(std::max_element(degree.begin(), degree.end()) - degree.begin());
    }
    double mean_degree() const {
        double s = 0;
        for (int d : degree) s += d;
        return s / n;
    }
};

/// Preferential attachment: m isolated seed vertices, each new vertex
/// attaches to m distinct existing vertices with probability proportional to
/// degree (uniformly while all degrees are zero).
inline BaGraph generate_ba(int n_nodes, int m, std::uint64_t seed) {
    require(n_nodes > m && m >= 1, "generate_ba: need n_nodes > m >= 1");
    Rng rng(derive_seed(seed, {0xba, static_cast<std::uint64_t>(n_nodes),
                               static_cast<std::uint64_t>(m)}));
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_nodes));
    std::vector<int> endpoint_bag;  // one entry per edge endpoint
    endpoint_bag.reserve(static_cast<std::size_t>(2 * m * (n_nodes - m)));

    auto add_edge = [&](int u, int v) {
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
        endpoint_bag.push_back(u);
        endpoint_bag.push_back(v);
    };

    for (int t = m; t < n_nodes; ++t) {
        std::vector<int> targets;
        if (t == m) {
            for (int v = 0; v < m; ++v) targets.push_back(v);  // all seeds, degree 0
        } else {
            while (static_cast<int>(targets.size()) < m) {
                const int v = endpoint_bag[static_cast<std::size_t>(
                    rng.next_u64() % endpoint_bag.size())];
                if (std::find(targets.begin(), targets.end(), v) == targets.end())
                    targets.push_back(v);
            }
        }
        for (int v : targets) add_edge(t, v);
    }

    BaGraph g;
    g.n = n_nodes;
    g.m = m;
    g.seed = seed;
    g.offsets.assign(1, 0);
    for (int v = 0; v < n_nodes; ++v) {
        auto& nb = adj[static_cast<std::size_t>(v)];
        std::sort(nb.begin(), nb.end());
        g.neighbors.insert(g.neighbors.end(), nb.begin(), nb.end());
        g.offsets.push_back(static_cast<int>(g.neighbors.size()));
        g.degree.push_back(static_cast<int>(nb.size()));
    }
    return g;
}

/// Discrete power-law tail exponent (maximum-likelihood, Clauset-style) for
/// degrees >= k_min.
inline double degree_tail_exponent(const BaGraph& g, int k_min = 6) {
    double acc = 0.0;
    int cnt = 0;
    for (int d : g.degree) {
        if (d >= k_min) {
            acc += std::log(static_cast<double>(d) / (k_min - 0.5));
            ++cnt;
        }
    }
    require(cnt > 10, "degree_tail_exponent: too few tail samples");
    return 1.0 + cnt / acc;
}

struct BaRunConfig {
    double sigma = 0.5;
    double epsilon = 0.01;
    double delta = 0.03;
    double horizon_cycles = 50.0;
    double sample_dt = cycle / 10.0;
    std::uint64_t seed = 1;
    ode::IntegratorConfig ode;
};

/// Two isomorphically labelled networks, vertex k coupled to vertex k with
/// Kuramoto--Sakaguchi coupling eps*sin(own - other + delta). Records the
/// order parameters of both copies (phases taken relative to each copy's
/// maximum-degree vertex).
inline ode::RunRecord ba_chimera_run(const BaGraph& gp, const BaGraph& gm,
                                     const BaRunConfig& cfg,
                                     std::span<const double> initial = {}) {
    require(gp.n == gm.n, "ba_chimera_run: networks must have matching vertex counts");
    const auto n = static_cast<std::size_t>(gp.n);
    core::NetworkRhs rp(gp.offsets, gp.neighbors, gp.degree, cfg.sigma, cfg.delta);
    core::NetworkRhs rm(gm.offsets, gm.neighbors, gm.degree, cfg.sigma, cfg.delta);

    auto rhs = [&](double t, std::span<const double> y, std::span<double> d) {
        rp(t, y.subspan(0, n), d.subspan(0, n));
        rm(t, y.subspan(n, n), d.subspan(n, n));
        if (cfg.epsilon > 0.0) {
            const double sd = std::sin(cfg.delta), cd = std::cos(cfg.delta);
            for (std::size_t i = 0; i < n; ++i) {
                double s, c;
                core::sin_cos(y[i] - y[n + i], s, c);
                d[i] += cfg.epsilon * (s * cd + c * sd);
                d[n + i] += cfg.epsilon * (-s * cd + c * sd);
            }
        }
    };

    std::vector<double> y0;
    if (!initial.empty()) {
        require(initial.size() == 2 * n, "ba_chimera_run: initial state dimension mismatch");
        y0.assign(initial.begin(), initial.end());
    } else {
        // Plus copy near synchrony, minus copy incoherent.
        Rng rng(derive_seed(cfg.seed, {0xbac0}));
        y0.assign(2 * n, 0.0);
        for (std::size_t i = n; i < 2 * n; ++i) y0[i] = rng.uniform(0.0, two_pi);
    }

    const int hub_p = gp.max_degree_vertex(), hub_m = gm.max_degree_vertex();
    ode::IntegrateOptions io;
    io.sample_dt = cfg.sample_dt;
    io.observers.push_back({"r_plus", [n](double, std::span<const double> y) {
                                return std::abs(core::order_parameter_relative(y.subspan(0, n)));
                            }});
    io.observers.push_back({"r_minus", [n](double, std::span<const double> y) {
                                return std::abs(core::order_parameter_relative(y.subspan(n, n)));
                            }});
    io.observers.push_back(
        {"arg_z_plus", [n, hub_p](double, std::span<const double> y) {
             const auto z = core::order_parameter_relative(y.subspan(0, n));
             return wrap_2pi(std::arg(z) - y[static_cast<std::size_t>(hub_p)]);
         }});
    io.observers.push_back(
        {"arg_z_minus", [n, hub_m](double, std::span<const double> y) {
             const auto z = core::order_parameter_relative(y.subspan(n, n));
             return wrap_2pi(std::arg(z) - y[n + static_cast<std::size_t>(hub_m)]);
         }});
    io.on_step = [](double, std::span<double> y) {
        for (auto& v : y) v = wrap_2pi(v);
    };
    return ode::integrate(rhs, std::move(y0), 0.0, cfg.horizon_cycles * cycle, cfg.ode, io);
}

}  // namespace chimera::experiments
