#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chimera/averaging.hpp"
#include "chimera/core.hpp"
#include "chimera/experiments.hpp"
#include "chimera/io.hpp"
#include "chimera/ode.hpp"
#include "chimera/ws.hpp"
#include "chimera/ws_flow.hpp"

namespace chimera::cli {

inline constexpr int schema_version = 1;
inline constexpr const char* code_version = "1.0.0";

namespace fs = std::filesystem;
using nlohmann::json;

// Exit codes: 0 success, 2 validation failure, 3 integration failure,
// 4 sweep completed partially (partial results preserved).
enum ExitCode { exit_ok = 0, exit_validation = 2, exit_runtime = 3, exit_partial = 4 };

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config handling. Defaults <- config file <- command-line flags, in that
// order; the resolved config is echoed into the manifest and can be re-run.
// ---------------------------------------------------------------------------

inline json default_config() {
    return json{
        {"schema_version", schema_version},
        {"experiment", ""},
        {"out_dir", ""},
        {"seed", 1},
        {"threads", 0},
        {"model", {{"beta", 10.0}, {"sigma", 1.2}, {"delta", 0.3}, {"n_leaves", 64}}},
        {"integrator",
         {{"rel_tol", 1e-8}, {"abs_tol", 1e-10}, {"max_step", 0.5}, {"scheme", "dopri5"}}},
        {"observation", {{"samples_per_cycle", 10.0}}},
        {"simulate",
         {{"epsilon", 0.007},
          {"family", "sinusoidal"},
          {"pattern", "full"},
          {"k", 5},
          {"eta", 0.25},
          {"jitter", 0.01},
          {"horizon_cycles", 200.0},
          {"halt_on_break", false}}},
        {"diagram",
         {{"dsigma", 0.02},
          {"sigma_max", 2.6},
          {"settle", 400.0},
          {"measure", 100.0},
          {"jitter", 0.01},
          {"direction", "both"}}},
        {"lifetime",
         {{"eta", 0.25},
          {"jitter", 0.01},
          {"horizon_cycles", 1e4},
          {"eps_min", 0.01},
          {"eps_max", 0.1},
          {"eps_points", 5},
          {"seeds_per_point", 10},
          {"family", "general"}}},
        {"ws_check",
         {{"r_disk", 0.5}, {"samples", 200}, {"n_min", 4}, {"n_max", 32}, {"equiv_t", 10.0}}},
        {"averaging_check",
         {{"betas", json::array({50.0, 100.0, 200.0})},
          {"r0", 0.3},
          {"horizon", 400.0},
          {"delta0", 0.05}}},
        {"ba",
         {{"n_nodes", 1000},
          {"m", 3},
          {"epsilon", 0.01},
          {"horizon_cycles", 50.0}}},
    };
}

inline void merge_into(json& base, const json& upd) {
    for (auto it = upd.begin(); it != upd.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

template <class T>
T field(const json& j, const std::string& dotted) {
    const json* cur = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = dotted.find('.', pos);
        const std::string key = dotted.substr(pos, dot - pos);
        if (!cur->contains(key))
            throw ValidationError("missing required field: " + dotted);
        cur = &(*cur)[key];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    try {
        return cur->get<T>();
    } catch (const json::exception&) {
        throw ValidationError("field has wrong type: " + dotted);
    }
}

inline core::StarParams model_params(const json& cfg) {
    return core::StarParams(field<double>(cfg, "model.beta"), field<double>(cfg, "model.sigma"),
                            field<double>(cfg, "model.delta"), field<int>(cfg, "model.n_leaves"));
}

inline ode::IntegratorConfig integrator_config(const json& cfg) {
    ode::IntegratorConfig c;
    c.rel_tol = field<double>(cfg, "integrator.rel_tol");
    c.abs_tol = field<double>(cfg, "integrator.abs_tol");
    c.max_step = field<double>(cfg, "integrator.max_step");
    c.scheme = field<std::string>(cfg, "integrator.scheme");
    c.validate();
    return c;
}

inline double sample_dt(const json& cfg) {
    return experiments::cycle / field<double>(cfg, "observation.samples_per_cycle");
}

struct RunContext {
    json cfg;
    fs::path out_dir;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point t_start = std::chrono::steady_clock::now();

    void note_output(const fs::path& p) { outputs.push_back(p.filename().string()); }

    void write_manifest() const {
        json m;
        m["schema_version"] = schema_version;
        m["code_version"] = code_version;
        m["config"] = cfg;
        m["seed"] = cfg["seed"];
        m["outputs"] = outputs;
        m["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        io::save_json(m, out_dir / "manifest.json");
    }
};

// ---------------------------------------------------------------------------
// Experiment handlers. Each writes CSVs (+ optional SVG) and returns an exit
// code; progress lines go to stderr only.
// ---------------------------------------------------------------------------

inline int run_simulate(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto params = model_params(cfg);
    const double eps = field<double>(cfg, "simulate.epsilon");
    const std::string family = field<std::string>(cfg, "simulate.family");
    const std::string pattern = field<std::string>(cfg, "simulate.pattern");
    const double eta = field<double>(cfg, "simulate.eta");

    core::CouplingSpec coupling;
    core::CouplingPattern pat;
    if (pattern == "full")
        pat = core::CouplingPattern::LeafToLeafFull;
    else if (pattern == "sparse")
        pat = core::CouplingPattern::LeafToLeafSparse;
    else if (pattern == "hub")
        pat = core::CouplingPattern::HubToHub;
    else
        throw ValidationError("simulate.pattern must be full|sparse|hub");
    if (family == "general")
        coupling = experiments::general_coupling(eps, pat);
    else if (family == "sinusoidal")
        coupling = experiments::sinusoidal_coupling(eps, params.delta, pat);
    else
        throw ValidationError("simulate.family must be general|sinusoidal");
    if (pat == core::CouplingPattern::LeafToLeafSparse) {
        const int k = field<int>(cfg, "simulate.k");
        require(k >= 0 && k <= params.n_leaves, "simulate.k out of range");
        for (int i = 0; i < k; ++i) coupling.coupled_leaves.push_back(i);
    }

    const auto criterion = experiments::chimera_criterion(params, eta);
    const auto initial = experiments::prepare_chimera_initial(
        params, params, field<double>(cfg, "simulate.jitter"), field<std::uint64_t>(cfg, "seed"));
    experiments::LifetimeOptions opt;
    opt.sample_dt = sample_dt(cfg);
    opt.ode = integrator_config(cfg);
    opt.keep_record = true;

    const double horizon = field<double>(cfg, "simulate.horizon_cycles") * experiments::cycle;
    core::CoupledRelativeRhs rhs(params, params, coupling);
    auto y = core::to_relative(initial);
    const auto n = static_cast<std::size_t>(params.n_leaves);

    ode::IntegrateOptions io_opt;
    io_opt.sample_dt = opt.sample_dt;
    io_opt.halt_on_event = field<bool>(cfg, "simulate.halt_on_break");
    io_opt.on_step = [](double, std::span<double> s) {
        for (auto& v : s) v = wrap_2pi(v);
    };
    io_opt.observers.push_back({"r_plus", [n](double, std::span<const double> s) {
                                    return std::abs(core::order_parameter_relative(s.subspan(0, n)));
                                }});
    io_opt.observers.push_back({"r_minus", [n](double, std::span<const double> s) {
                                    return std::abs(core::order_parameter_relative(s.subspan(n, n)));
                                }});
    io_opt.observers.push_back(
        {"dev_minus", [n, a = criterion.alpha_I_ref](double, std::span<const double> s) {
             return std::abs(core::order_parameter_relative(s.subspan(n, n)) - a);
         }});
    io_opt.events.push_back({"incoherent_escape", io_opt.observers[2].fn, criterion.eta, +1});
    io_opt.events.push_back({"coherent_breakdown", io_opt.observers[0].fn, 1.0 - criterion.eta, -1});

    auto rec = ode::integrate(rhs, std::move(y), 0.0, horizon, opt.ode, io_opt);
    {
        std::ofstream f(ctx.out_dir / "timeseries.csv", std::ios::binary);
        rec.write_csv(f);
        ctx.note_output(ctx.out_dir / "timeseries.csv");
    }
    if (rec.event_time)
        std::cerr << "simulate: criterion '" << rec.event_name << "' fired at t=" << *rec.event_time
                  << " (" << *rec.event_time / experiments::cycle << " cycles)\n";
    else
        std::cerr << "simulate: criterion silent to horizon\n";
    return exit_ok;
}

inline int run_diagram(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    experiments::DiagramConfig dc;
    dc.beta = field<double>(cfg, "model.beta");
    dc.delta = field<double>(cfg, "model.delta");
    dc.n_leaves = field<int>(cfg, "model.n_leaves");
    dc.dsigma = field<double>(cfg, "diagram.dsigma");
    dc.sigma_max = field<double>(cfg, "diagram.sigma_max");
    dc.settle = field<double>(cfg, "diagram.settle");
    dc.measure = field<double>(cfg, "diagram.measure");
    dc.jitter = field<double>(cfg, "diagram.jitter");
    dc.seed = field<std::uint64_t>(cfg, "seed");
    dc.sample_dt = sample_dt(cfg);
    dc.ode = integrator_config(cfg);

    const std::string direction = field<std::string>(cfg, "diagram.direction");
    io::SvgPlot plot;
    plot.title = "synchronization diagram";
    plot.xlabel = "sigma";
    plot.ylabel = "r";

    auto emit = [&](experiments::SweepDirection dir, const std::string& name,
                    const std::string& color) {
        const auto pts = experiments::sync_diagram(dc, dir);
        io::CsvTable t;
        t.header = {"sigma", "r"};
        t.columns.resize(2);
        io::SvgSeries s;
        s.color = color;
        s.markers = true;
        for (const auto& p : pts) {
            t.columns[0].push_back(p.sigma);
            t.columns[1].push_back(p.r_mean);
            s.x.push_back(p.sigma);
            s.y.push_back(p.r_mean);
        }
        t.save(ctx.out_dir / (name + ".csv"));
        ctx.note_output(ctx.out_dir / (name + ".csv"));
        plot.series.push_back(std::move(s));
        std::cerr << "diagram: " << name << " done (" << pts.size() << " points)\n";
    };

    if (direction == "both" || direction == "forward")
        emit(experiments::SweepDirection::Forward, "forward", "#1f6fb2");
    if (direction == "both" || direction == "backward")
        emit(experiments::SweepDirection::Backward, "backward", "#b23a1f");
    if (direction != "both" && direction != "forward" && direction != "backward")
        throw ValidationError("diagram.direction must be both|forward|backward");

    plot.save(ctx.out_dir / "diagram.svg");
    ctx.note_output(ctx.out_dir / "diagram.svg");
    return exit_ok;
}

inline int run_lifetime(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    experiments::LifetimeSweepConfig lc;
    lc.beta = field<double>(cfg, "model.beta");
    lc.sigma = field<double>(cfg, "model.sigma");
    lc.delta = field<double>(cfg, "model.delta");
    lc.n_leaves = field<int>(cfg, "model.n_leaves");
    lc.eta = field<double>(cfg, "lifetime.eta");
    lc.jitter = field<double>(cfg, "lifetime.jitter");
    lc.horizon_cycles = field<double>(cfg, "lifetime.horizon_cycles");
    lc.epsilons = experiments::log_spaced(field<double>(cfg, "lifetime.eps_min"),
                                          field<double>(cfg, "lifetime.eps_max"),
                                          field<int>(cfg, "lifetime.eps_points"));
    lc.seeds_per_point = field<int>(cfg, "lifetime.seeds_per_point");
    const std::string family = field<std::string>(cfg, "lifetime.family");
    if (family == "general")
        lc.family = experiments::LifetimeFamily::General;
    else if (family == "sinusoidal")
        lc.family = experiments::LifetimeFamily::Sinusoidal;
    else
        throw ValidationError("lifetime.family must be general|sinusoidal");
    lc.seed = field<std::uint64_t>(cfg, "seed");
    lc.threads = field<int>(cfg, "threads");
    lc.run.sample_dt = sample_dt(cfg);
    lc.run.ode = integrator_config(cfg);
    lc.progress = [](int done, int total) {
        std::cerr << "lifetime: " << done << "/" << total << " runs complete\n";
    };

    const auto res = experiments::lifetime_sweep(lc);

    io::CsvTable agg;
    agg.header = {"epsilon",  "mean_tau", "sd_tau",    "n_seeds",
                  "n_censored", "n_failed", "excluded", "slope",
                  "intercept", "fit_residual"};
    agg.columns.resize(agg.header.size());
    io::CsvTable samples;
    samples.header = {"epsilon", "seed_index", "tau", "censored", "failed"};
    samples.columns.resize(samples.header.size());
    io::SvgSeries pts;
    pts.markers = true;
    pts.line = false;
    for (const auto& p : res.points) {
        agg.columns[0].push_back(p.epsilon);
        agg.columns[1].push_back(p.mean_tau);
        agg.columns[2].push_back(p.sd_tau);
        agg.columns[3].push_back(static_cast<double>(p.tau.size()));
        agg.columns[4].push_back(p.censored_count);
        agg.columns[5].push_back(p.failed_count);
        agg.columns[6].push_back(p.excluded ? 1.0 : 0.0);
        agg.columns[7].push_back(res.fit.slope);
        agg.columns[8].push_back(res.fit.intercept);
        agg.columns[9].push_back(res.fit.residual);
        for (std::size_t s = 0; s < p.tau.size(); ++s) {
            samples.columns[0].push_back(p.epsilon);
            samples.columns[1].push_back(static_cast<double>(s));
            samples.columns[2].push_back(p.tau[s]);
            samples.columns[3].push_back(p.censored[s]);
            samples.columns[4].push_back(p.failed[s]);
        }
        if (!p.excluded) {
            pts.x.push_back(p.epsilon);
            pts.y.push_back(p.mean_tau);
        }
    }
    agg.save(ctx.out_dir / "sweep.csv");
    ctx.note_output(ctx.out_dir / "sweep.csv");
    samples.save(ctx.out_dir / "samples.csv");
    ctx.note_output(ctx.out_dir / "samples.csv");

    io::SvgPlot plot;
    plot.title = "chimera lifetime vs coupling strength";
    plot.xlabel = "epsilon";
    plot.ylabel = "mean tau";
    plot.logx = plot.logy = true;
    if (!pts.x.empty()) {
        const double ax = pts.x.front(), ay = pts.y.front();
        plot.guides.push_back({-1.0, ax, ay, "slope -1"});
        plot.guides.push_back({-2.0, ax, ay, "slope -2"});
    }
    plot.series.push_back(std::move(pts));
    plot.save(ctx.out_dir / "sweep.svg");
    ctx.note_output(ctx.out_dir / "sweep.svg");

    if (res.fit_valid)
        std::cerr << "lifetime: fitted slope " << res.fit.slope << "\n";
    else
        std::cerr << "lifetime: no usable points for a fit (all censored or failed)\n";
    return res.has_failures ? exit_partial : exit_ok;
}

inline int run_ws_check(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    const double r_disk = field<double>(cfg, "ws_check.r_disk");
    const int samples = field<int>(cfg, "ws_check.samples");
    const int n_min = field<int>(cfg, "ws_check.n_min");
    const int n_max = field<int>(cfg, "ws_check.n_max");
    std::vector<int> ns;
    for (int n = n_min; n <= n_max; ++n) ns.push_back(n);
    const auto za = experiments::verify_z_alpha(ns, r_disk, samples,
                                                field<std::uint64_t>(cfg, "seed"));
    io::CsvTable t;
    t.header = {"n", "sup_dev", "fit_slope", "log_r_disk"};
    t.columns.resize(4);
    for (const auto& row : za.rows) {
        t.columns[0].push_back(row.n);
        t.columns[1].push_back(row.sup_dev);
        t.columns[2].push_back(za.fit.slope);
        t.columns[3].push_back(std::log(r_disk));
    }
    t.save(ctx.out_dir / "z_alpha.csv");
    ctx.note_output(ctx.out_dir / "z_alpha.csv");

    // WS equivalence: full integration vs reduced + reconstruction. The
    // comparison needs integration error well below its own 1e-6 scale.
    const auto params = model_params(cfg);
    const double t_end = field<double>(cfg, "ws_check.equiv_t");
    ode::IntegratorConfig tight = integrator_config(cfg);
    tight.rel_tol = std::min(tight.rel_tol, 1e-10);
    tight.abs_tol = std::min(tight.abs_tol, 1e-12);
    Rng rng(derive_seed(field<std::uint64_t>(cfg, "seed"), {0x5fe9}));
    io::CsvTable eq;
    eq.header = {"n", "sup_phase_error"};
    eq.columns.resize(2);
    for (int n : {8, 16, 64}) {
        core::StarParams p(params.beta, params.sigma, params.delta, n);
        auto theta = ws::uniform_theta(n, rng.angle());
        for (auto& th : theta) th = wrap_2pi(th + rng.uniform(-0.05, 0.05));
        ws::WsState w0({0.15, 0.1}, rng.angle(), theta);
        const double err = experiments::ws_equivalence_error(p, w0, t_end, tight);
        eq.columns[0].push_back(n);
        eq.columns[1].push_back(err);
        std::cerr << "ws-check: N=" << n << " sup phase error " << err << "\n";
    }
    eq.save(ctx.out_dir / "equivalence.csv");
    ctx.note_output(ctx.out_dir / "equivalence.csv");
    return exit_ok;
}

inline int run_averaging_check(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    io::CsvTable pq;
    pq.header = {"x", "p", "q", "r", "identity_residual"};
    pq.columns.resize(5);
    for (int i = -18; i <= 18; ++i) {
        const double x = i / 20.0;
        const double p = averaging::p_function(x), q = averaging::q_function(x);
        pq.columns[0].push_back(x);
        pq.columns[1].push_back(p);
        pq.columns[2].push_back(q);
        pq.columns[3].push_back(p / q);
        pq.columns[4].push_back(q - 1.0 - 0.5 * x * p);
    }
    pq.save(ctx.out_dir / "pqr.csv");
    ctx.note_output(ctx.out_dir / "pqr.csv");

    const double r0 = field<double>(cfg, "averaging_check.r0");
    const double horizon = field<double>(cfg, "averaging_check.horizon");
    const double delta0 = field<double>(cfg, "averaging_check.delta0");
    io::CsvTable ce;
    ce.header = {"beta", "sup_error", "c_estimate"};
    ce.columns.resize(3);
    for (double beta : field<std::vector<double>>(cfg, "averaging_check.betas")) {
        core::StarParams p(beta, field<double>(cfg, "model.sigma"),
                           field<double>(cfg, "model.delta"), 1);
        const auto cmp = averaging::compare_averaged(p, r0, horizon, delta0, integrator_config(cfg));
        ce.columns[0].push_back(beta);
        ce.columns[1].push_back(cmp.sup_error);
        ce.columns[2].push_back(cmp.c_estimate);
        std::cerr << "averaging-check: beta=" << beta << " c=" << cmp.c_estimate << "\n";
    }
    ce.save(ctx.out_dir / "c_estimates.csv");
    ctx.note_output(ctx.out_dir / "c_estimates.csv");
    return exit_ok;
}

inline int run_ba(RunContext& ctx) {
    const auto& cfg = ctx.cfg;
    const int n_nodes = field<int>(cfg, "ba.n_nodes");
    const int m = field<int>(cfg, "ba.m");
    const auto seed = field<std::uint64_t>(cfg, "seed");
    const auto gp = experiments::generate_ba(n_nodes, m, derive_seed(seed, {0xba, 0}));
    const auto gm = experiments::generate_ba(n_nodes, m, derive_seed(seed, {0xba, 1}));

    io::CsvTable deg;
    deg.header = {"vertex", "degree_plus", "degree_minus"};
    deg.columns.resize(3);
    for (int v = 0; v < n_nodes; ++v) {
        deg.columns[0].push_back(v);
        deg.columns[1].push_back(gp.degree[static_cast<std::size_t>(v)]);
        deg.columns[2].push_back(gm.degree[static_cast<std::size_t>(v)]);
    }
    deg.save(ctx.out_dir / "degrees.csv");
    ctx.note_output(ctx.out_dir / "degrees.csv");
    std::cerr << "ba: mean degree " << gp.mean_degree() << ", tail exponent "
              << experiments::degree_tail_exponent(gp) << "\n";

    experiments::BaRunConfig rc;
    rc.sigma = field<double>(cfg, "model.sigma");
    rc.delta = field<double>(cfg, "model.delta");
    rc.epsilon = field<double>(cfg, "ba.epsilon");
    rc.horizon_cycles = field<double>(cfg, "ba.horizon_cycles");
    rc.sample_dt = sample_dt(cfg);
    rc.seed = seed;
    rc.ode = integrator_config(cfg);
    auto rec = experiments::ba_chimera_run(gp, gm, rc);
    {
        std::ofstream f(ctx.out_dir / "ba_timeseries.csv", std::ios::binary);
        rec.write_csv(f);
        ctx.note_output(ctx.out_dir / "ba_timeseries.csv");
    }
    return exit_ok;
}

int run_selftest();  // defined below

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

inline void emit_error(const fs::path& out_dir, int code, const std::string& kind,
                       const std::string& message) {
    std::cerr << "error (" << kind << "): " << message << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (!ec) {
            json e{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
            io::save_json(e, out_dir / "error.json");
        }
    }
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"coupled star networks: synchronization diagrams, chimera lifetimes, "
                 "Watanabe-Strogatz reduction checks"};
    app.require_subcommand(1);

    std::string config_path, out_dir_flag;
    json flag_overrides = json::object();

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out-dir", out_dir_flag, "output directory (required here or in config)");
        auto opt = [&flag_overrides](const std::string& flag, const std::string& dotted) {
            return [&flag_overrides, dotted](const std::string& v) {
                json* cur = &flag_overrides;
                std::size_t pos = 0;
                std::string d = dotted;
                for (auto dot = d.find('.'); dot != std::string::npos;
                     dot = d.find('.', pos)) {
                    cur = &(*cur)[d.substr(pos, dot - pos)];
                    pos = dot + 1;
                }
                try {
                    (*cur)[d.substr(pos)] = json::parse(v);
                } catch (const json::exception&) {
                    (*cur)[d.substr(pos)] = v;  // plain string (e.g. family names)
                }
            };
        };
        for (const auto& [flag, dotted] :
             std::vector<std::pair<std::string, std::string>>{
                 {"--seed", "seed"},
                 {"--threads", "threads"},
                 {"--beta", "model.beta"},
                 {"--sigma", "model.sigma"},
                 {"--delta", "model.delta"},
                 {"--n-leaves", "model.n_leaves"},
                 {"--rel-tol", "integrator.rel_tol"},
                 {"--abs-tol", "integrator.abs_tol"},
                 {"--max-step", "integrator.max_step"},
                 {"--samples-per-cycle", "observation.samples_per_cycle"}})
            sub->add_option_function<std::string>(flag, opt(flag, dotted));
        return opt;
    };

    struct Sub {
        CLI::App* app;
        std::string name;
        std::function<int(RunContext&)> handler;
    };
    std::vector<Sub> subs;

    auto add_sub = [&](const std::string& name, const std::string& desc,
                       std::function<int(RunContext&)> h) {
        CLI::App* s = app.add_subcommand(name, desc);
        auto opt = add_common(s);
        subs.push_back({s, name, std::move(h)});
        return std::pair{s, opt};
    };

    {
        auto [s, opt] = add_sub("simulate", "single coupled-star run with criterion events",
                                run_simulate);
        s->add_option_function<std::string>("--epsilon", opt("--epsilon", "simulate.epsilon"));
        s->add_option_function<std::string>("--family", opt("--family", "simulate.family"));
        s->add_option_function<std::string>("--pattern", opt("--pattern", "simulate.pattern"));
        s->add_option_function<std::string>("--k", opt("--k", "simulate.k"));
        s->add_option_function<std::string>("--eta", opt("--eta", "simulate.eta"));
        s->add_option_function<std::string>("--horizon-cycles",
                                            opt("--horizon-cycles", "simulate.horizon_cycles"));
        s->add_option_function<std::string>("--halt-on-break",
                                            opt("--halt-on-break", "simulate.halt_on_break"));
    }
    {
        auto [s, opt] = add_sub("diagram", "forward/backward synchronization diagram", run_diagram);
        s->add_option_function<std::string>("--dsigma", opt("--dsigma", "diagram.dsigma"));
        s->add_option_function<std::string>("--sigma-max", opt("--sigma-max", "diagram.sigma_max"));
        s->add_option_function<std::string>("--settle", opt("--settle", "diagram.settle"));
        s->add_option_function<std::string>("--measure", opt("--measure", "diagram.measure"));
        s->add_option_function<std::string>("--direction", opt("--direction", "diagram.direction"));
    }
    {
        auto [s, opt] = add_sub("lifetime", "chimera lifetime sweep over epsilon", run_lifetime);
        s->add_option_function<std::string>("--eta", opt("--eta", "lifetime.eta"));
        s->add_option_function<std::string>("--eps-min", opt("--eps-min", "lifetime.eps_min"));
        s->add_option_function<std::string>("--eps-max", opt("--eps-max", "lifetime.eps_max"));
        s->add_option_function<std::string>("--eps-points",
                                            opt("--eps-points", "lifetime.eps_points"));
        s->add_option_function<std::string>("--seeds-per-point",
                                            opt("--seeds-per-point", "lifetime.seeds_per_point"));
        s->add_option_function<std::string>("--family", opt("--family", "lifetime.family"));
        s->add_option_function<std::string>("--horizon-cycles",
                                            opt("--horizon-cycles", "lifetime.horizon_cycles"));
    }
    {
        auto [s, opt] = add_sub("ws-check", "z-alpha decay table and WS equivalence", run_ws_check);
        s->add_option_function<std::string>("--r-disk", opt("--r-disk", "ws_check.r_disk"));
        s->add_option_function<std::string>("--samples", opt("--samples", "ws_check.samples"));
    }
    {
        auto [s, opt] =
            add_sub("averaging-check", "P/Q/R identities and averaged-flow error", run_averaging_check);
        s->add_option_function<std::string>("--r0", opt("--r0", "averaging_check.r0"));
        s->add_option_function<std::string>("--horizon",
                                            opt("--horizon", "averaging_check.horizon"));
    }
    {
        auto [s, opt] = add_sub("ba", "coupled Barabasi-Albert networks", run_ba);
        s->add_option_function<std::string>("--n-nodes", opt("--n-nodes", "ba.n_nodes"));
        s->add_option_function<std::string>("--m", opt("--m", "ba.m"));
        s->add_option_function<std::string>("--epsilon", opt("--epsilon", "ba.epsilon"));
        s->add_option_function<std::string>("--horizon-cycles",
                                            opt("--horizon-cycles", "ba.horizon_cycles"));
    }
    CLI::App* selftest_cmd = app.add_subcommand("selftest", "fast invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    if (selftest_cmd->parsed()) return run_selftest();

    for (const auto& sub : subs) {
        if (!sub.app->parsed()) continue;
        json cfg = default_config();
        fs::path out_dir;
        try {
            if (!config_path.empty()) {
                std::ifstream f(config_path);
                if (!f.good()) throw ValidationError("cannot open config file: " + config_path);
                json file_cfg = json::parse(f, nullptr, true, true);
                merge_into(cfg, file_cfg);
            }
            merge_into(cfg, flag_overrides);
            cfg["experiment"] = sub.name;
            if (!out_dir_flag.empty()) cfg["out_dir"] = out_dir_flag;
            if (field<std::string>(cfg, "out_dir").empty())
                throw ValidationError("missing required field: out_dir");
            if (field<int>(cfg, "schema_version") != schema_version)
                throw ValidationError("unsupported schema_version (expected " +
                                      std::to_string(schema_version) + ")");
            out_dir = field<std::string>(cfg, "out_dir");
            fs::create_directories(out_dir);

            RunContext ctx;
            ctx.cfg = cfg;
            ctx.out_dir = out_dir;
            const int code = sub.handler(ctx);
            ctx.write_manifest();
            return code;
        } catch (const ValidationError& e) {
            emit_error(out_dir, exit_validation, "validation", e.what());
            return exit_validation;
        } catch (const std::invalid_argument& e) {
            emit_error(out_dir, exit_validation, "validation", e.what());
            return exit_validation;
        } catch (const ode::IntegrationError& e) {
            emit_error(out_dir, exit_runtime, "integration",
                       std::string(e.what()) + " (last good t=" + std::to_string(e.last_good_time) +
                           ")");
            return exit_runtime;
        } catch (const json::exception& e) {
            emit_error(out_dir, exit_validation, "validation", e.what());
            return exit_validation;
        }
    }
    return exit_validation;
}

// ---------------------------------------------------------------------------
// Self test: the fast invariant catalog.
// ---------------------------------------------------------------------------

inline int run_selftest() {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok, const std::string& detail = "") {
        std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                    detail.empty() ? "" : " -- ", detail.c_str());
        if (!ok) ++failures;
    };
    char buf[128];

    std::printf("selftest (config schema_version %d, code %s)\n", schema_version, code_version);

    {
        const auto cc = ws::critical_couplings(10.0, 0.3);
        std::snprintf(buf, sizeof buf, "sigma_b=%.5f sigma_f=%.5f", cc.sigma_b, cc.sigma_f);
        check("critical couplings (beta=10, delta=0.3)",
              std::abs(cc.sigma_b - 0.9726) < 1e-3 && std::abs(cc.sigma_f - 2.1510) < 1e-3, buf);
    }
    {
        double worst = 0.0;
        for (double beta : {5.0, 10.0, 50.0})
            for (double frac : {0.3, 0.7}) {
                const auto cc = ws::critical_couplings(beta, 0.3);
                core::StarParams ps(beta, cc.sigma_b + frac * (3.0 - cc.sigma_b), 0.3, 8);
                worst = std::max(worst, std::abs(ws::sync_state_residual(
                                            ps, ws::fixed_point_sync(ps).phi_C)));
                core::StarParams pa(beta, frac * cc.sigma_f, 0.3, 8);
                worst = std::max(worst, std::abs(ws::closed_alpha_rhs(
                                            pa, ws::fixed_point_async(pa).alpha_I)));
            }
        std::snprintf(buf, sizeof buf, "worst residual %.3e", worst);
        check("fixed point residuals", worst < 1e-10, buf);
    }
    {
        Rng rng(7);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto a1 = std::polar(0.7 * rng.uniform(), rng.angle());
            const auto a2 = std::polar(0.7 * rng.uniform(), rng.angle());
            const double p1 = rng.angle(), p2 = rng.angle();
            const auto w = unit(rng.angle());
            // Compose the fractional-linear coefficient matrices as the oracle.
            const core::cplx m1[4] = {unit(p1), a1, std::conj(a1) * unit(p1), 1.0};
            const core::cplx m2[4] = {unit(p2), a2, std::conj(a2) * unit(p2), 1.0};
            const core::cplx comp[4] = {m2[0] * m1[0] + m2[1] * m1[2],
                                        m2[0] * m1[1] + m2[1] * m1[3],
                                        m2[2] * m1[0] + m2[3] * m1[2],
                                        m2[2] * m1[1] + m2[3] * m1[3]};
            const auto direct = ws::mobius_apply(a2, p2, ws::mobius_apply(a1, p1, w));
            const auto via = (comp[0] * w + comp[1]) / (comp[2] * w + comp[3]);
            worst = std::max(worst, std::abs(direct - via));
        }
        std::snprintf(buf, sizeof buf, "worst deviation %.3e", worst);
        check("Mobius group composition (100 draws)", worst < 1e-12, buf);
    }
    {
        double worst = 0.0;
        for (int i = -9; i <= 9; ++i) {
            const double x = 0.1 * i;
            worst = std::max(worst, std::abs(averaging::q_function(x) - 1.0 -
                                             0.5 * x * averaging::p_function(x)));
        }
        std::snprintf(buf, sizeof buf, "worst identity residual %.3e", worst);
        check("Q = 1 + (x/2) P on [-0.9, 0.9]", worst < 1e-10, buf);
    }
    {
        core::StarParams p(10.0, 0.8, 0.3, 8);
        ws::WsState w0({0.2, 0.1}, 0.3, ws::uniform_theta(8, 0.41));
        ode::IntegratorConfig cfg;
        cfg.rel_tol = 1e-10;
        cfg.abs_tol = 1e-12;
        const double err = experiments::ws_equivalence_error(p, w0, 5.0, cfg);
        std::snprintf(buf, sizeof buf, "sup phase error %.3e", err);
        check("WS equivalence (N=8, t<=5)", err < 1e-6, buf);
    }
    {
        auto rhs = [](double, std::span<const double>, std::span<double> d) { d[0] = -1e-3; };
        ode::IntegrateOptions io_opt;
        io_opt.events.push_back(
            {"cross", [](double, std::span<const double> y) { return y[0]; }, 0.75, -1});
        auto rec = ode::integrate(rhs, {0.75 + 5e-3}, 0.0, 10.0, ode::IntegratorConfig{}, io_opt);
        const double terr = rec.event_time ? std::abs(*rec.event_time - 5.0) : 1e99;
        std::snprintf(buf, sizeof buf, "event time error %.3e", terr);
        check("event localization", terr < 1e-6, buf);
    }

    std::printf("%s\n", failures == 0 ? "selftest: all checks passed"
                                      : "selftest: FAILURES detected");
    return failures == 0 ? 0 : 1;
}

}  // namespace chimera::cli
