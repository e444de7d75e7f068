#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chimera/math.hpp"

namespace chimera::ode {

struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = 0.5;
    double init_step = 0.0;  // 0 = choose automatically
    long max_steps = 400'000'000L;
    std::string scheme = "dopri5";  // embedded explicit RK 5(4)

    void validate() const {
        require(rel_tol > 0.0 && abs_tol > 0.0, "IntegratorConfig: tolerances must be > 0");
        require(max_step > 0.0, "IntegratorConfig: max_step must be > 0");
        require(scheme == "dopri5", "IntegratorConfig: unknown scheme '" + scheme + "'");
    }
};

/// Named scalar function of (t, state), sampled at the observer cadence.
struct Observer {
    std::string name;
    std::function<double(double, std::span<const double>)> fn;
};

/// Threshold crossing detector on a named observable.
/// direction: +1 upward crossings, -1 downward, 0 either.
struct EventSpec {
    std::string name;
    std::function<double(double, std::span<const double>)> observable;
    double threshold = 0.0;
    int direction = 0;
};

/// Integration failure (step-size underflow, blow-up, domain exit).
/// Carries the last time the integrator held a valid state.
class IntegrationError : public std::runtime_error {
  public:
    IntegrationError(const std::string& what, double last_time)
        : std::runtime_error(what), last_good_time(last_time) {}
    double last_good_time;
};

struct RunRecord {
    std::vector<double> times;
    std::vector<std::string> names;             // one per column
    std::vector<std::vector<double>> columns;   // same length as times
    std::optional<double> event_time;
    std::string event_name;
    std::vector<double> terminal_state;
    double terminal_time = 0.0;

    /// CSV with a header row; %.17g round-trips IEEE-754 doubles.
    void write_csv(std::ostream& os) const {
        os << 't';
        for (const auto& n : names) os << ',' << n;
        os << '\n';
        char buf[32];
        for (std::size_t i = 0; i < times.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", times[i]);
            os << buf;
            for (const auto& col : columns) {
                std::snprintf(buf, sizeof buf, "%.17g", col[i]);
                os << ',' << buf;
            }
            os << '\n';
        }
    }
};

namespace detail {

// Dormand--Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// b - bhat, for the embedded order-4 error estimate.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output coefficients (Hairer & Wanner's contd5).
inline constexpr double d1 = -12715105075.0 / 11282082432.0;
inline constexpr double d3 = 87487479700.0 / 32700410799.0;
inline constexpr double d4 = -10690763975.0 / 1880347072.0;
inline constexpr double d5 = 701980252875.0 / 199316789632.0;
inline constexpr double d6 = -1453857185.0 / 822651844.0;
inline constexpr double d7 = 69997945.0 / 29380423.0;

}  // namespace detail

/// Quartic interpolant over one accepted step, 4th-order accurate.
/// Event localization bisects on this; no re-integration.
class DenseSegment {
  public:
    double t0 = 0.0, h = 0.0;

    void build(double t_start, double step, std::span<const double> y0,
               std::span<const double> y1, std::span<const double> k1,
               std::span<const double> k3, std::span<const double> k4,
               std::span<const double> k5, std::span<const double> k6,
               std::span<const double> k7) {
        using namespace detail;
        t0 = t_start;
        h = step;
        const std::size_t n = y0.size();
        r1_.assign(y0.begin(), y0.end());
        r2_.resize(n);
        r3_.resize(n);
        r4_.resize(n);
        r5_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double ydiff = y1[i] - y0[i];
            const double bspl = h * k1[i] - ydiff;
            r2_[i] = ydiff;
            r3_[i] = bspl;
            r4_[i] = ydiff - h * k7[i] - bspl;
            r5_[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                          d7 * k7[i]);
        }
    }

    void eval(double t, std::span<double> out) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = r1_[i] + th * (r2_[i] + th1 * (r3_[i] + th * (r4_[i] + th1 * r5_[i])));
    }

    std::size_t size() const { return r1_.size(); }

  private:
    std::vector<double> r1_, r2_, r3_, r4_, r5_;
};

/// Hook applied to the live state after each accepted step (phase wrapping,
/// domain checks). The dense interpolant of the finished step is built before
/// the hook runs, so interpolation never spans a renormalization.
using StepHook = std::function<void(double t, std::span<double> y)>;

struct IntegrateOptions {
    double sample_dt = 0.0;  // 0 = record only endpoints
    std::vector<Observer> observers;
    std::vector<EventSpec> events;
    bool halt_on_event = true;
    StepHook on_step;   // e.g. wrap phases mod 2*pi
};

template <class F>
class Dopri5 {
  public:
    Dopri5(F& rhs, std::size_t n, const IntegratorConfig& cfg)
        : f_(rhs), n_(n), cfg_(cfg) {
        cfg_.validate();
        for (auto* v : {&y_, &ynew_, &ytmp_, &k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_})
            v->resize(n_);
    }

    double t() const { return t_; }
    std::span<const double> state() const { return y_; }
    std::span<double> state() { return y_; }
    const DenseSegment& segment() const { return seg_; }
    long steps_taken() const { return nsteps_; }

    void set_state(double t, std::span<const double> y) {
        t_ = t;
        std::copy(y.begin(), y.end(), y_.begin());
        fsal_valid_ = false;
    }

    /// Advance by exactly one accepted step, not beyond t_end.
    /// Returns false when t_end has been reached.
    bool step_towards(double t_end) {
        if (t_ >= t_end) return false;
        if (!fsal_valid_) {
            f_(t_, std::span<const double>(y_), std::span<double>(k1_));
            fsal_valid_ = true;
        }
        if (h_ <= 0.0)
            h_ = cfg_.init_step > 0.0 ? std::min(cfg_.init_step, cfg_.max_step)
                                      : initial_step(t_end);
        bool rejected_before = false;
        for (;;) {
            if (++nsteps_ > cfg_.max_steps)
                throw IntegrationError("dopri5: max step count exceeded", t_);
            double h = std::min(h_, cfg_.max_step);
            const bool clipped = t_ + h >= t_end;
            if (clipped) h = t_end - t_;
            if (!(h > std::abs(t_) * 1e-14 + 1e-300))
                throw IntegrationError("dopri5: step size underflow", t_);

            const double err = attempt(h);
            if (err <= 1.0) {
                seg_.build(t_, h, y_, ynew_, k1_, k3_, k4_, k5_, k6_, k7_);
                t_ = clipped ? t_end : t_ + h;  // land exactly on clipped targets
                y_.swap(ynew_);
                k1_.swap(k7_);  // FSAL
                double fac = 0.9 * std::pow(err > 1e-30 ? err : 1e-30, -0.2);
                fac = std::clamp(fac, 0.2, rejected_before ? 1.0 : 10.0);
                h_ = h * fac;
                return true;
            }
            rejected_before = true;
            const double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
            h_ = h * fac;
            if (clipped) h_ = std::min(h_, t_end - t_);
        }
    }

    void invalidate_fsal() { fsal_valid_ = false; }

  private:
    double attempt(double h) {
        using namespace detail;
        auto stage = [&](std::span<double> k, double c) {
            f_(t_ + c * h, std::span<const double>(ytmp_), k);
        };
        for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h * a21 * k1_[i];
        stage(k2_, c2);
        for (std::size_t i = 0; i < n_; ++i)
            ytmp_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        stage(k3_, c3);
        for (std::size_t i = 0; i < n_; ++i)
            ytmp_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
        stage(k4_, c4);
        for (std::size_t i = 0; i < n_; ++i)
            ytmp_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
        stage(k5_, c5);
        for (std::size_t i = 0; i < n_; ++i)
            ytmp_[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                                    a65 * k5_[i]);
        stage(k6_, 1.0);
        for (std::size_t i = 0; i < n_; ++i)
            ynew_[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] +
                                    a76 * k6_[i]);
        f_(t_ + h, std::span<const double>(ynew_), std::span<double>(k7_));

        double err = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double ei = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                                   e6 * k6_[i] + e7 * k7_[i]);
            const double sc =
                cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
            const double q = ei / sc;
            err += q * q;
        }
        return std::sqrt(err / static_cast<double>(n_));
    }

    double initial_step(double t_end) {
        // Hairer-style starting step from the first two derivative scales.
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
            d0 = std::max(d0, std::abs(y_[i]) / sc);
            d1n = std::max(d1n, std::abs(k1_[i]) / sc);
        }
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min({h0, cfg_.max_step, t_end - t_});
        for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y_[i] + h0 * k1_[i];
        f_(t_ + h0, std::span<const double>(ytmp_), std::span<double>(k2_));
        double d2 = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
            d2 = std::max(d2, std::abs(k2_[i] - k1_[i]) / sc / h0);
        }
        double h1;
        if (std::max(d1n, d2) <= 1e-15)
            h1 = std::max(1e-6, h0 * 1e-3);
        else
            h1 = std::pow(0.01 / std::max(d1n, d2), 0.2);
        return std::min({100.0 * h0, h1, cfg_.max_step, t_end - t_});
    }

    F& f_;
    std::size_t n_;
    IntegratorConfig cfg_;
    double t_ = 0.0, h_ = 0.0;
    long nsteps_ = 0;
    bool fsal_valid_ = false;
    std::vector<double> y_, ynew_, ytmp_, k1_, k2_, k3_, k4_, k5_, k6_, k7_;
    DenseSegment seg_;
};

namespace detail {

struct EventState {
    double prev_value = 0.0;
    bool fired = false;
};

/// Returns the crossing time inside [seg.t0, seg.t0+seg.h], or nullopt.
template <class Obs>
inline std::optional<double> locate_crossing(const DenseSegment& seg, const Obs& obs,
                                             double threshold, int direction, double v0,
                                             double v1, double t_tol,
                                             std::vector<double>& scratch) {
    const double g0 = v0 - threshold, g1 = v1 - threshold;
    const bool up = g0 < 0.0 && g1 >= 0.0;
    const bool down = g0 > 0.0 && g1 <= 0.0;
    if (!((direction >= 0 && up) || (direction <= 0 && down))) return std::nullopt;
    double lo = seg.t0, hi = seg.t0 + seg.h;
    double glo = g0;
    scratch.resize(seg.size());
    while (hi - lo > t_tol) {
        const double mid = 0.5 * (lo + hi);
        seg.eval(mid, scratch);
        const double gm = obs(mid, std::span<const double>(scratch)) - threshold;
        if ((glo <= 0.0) == (gm <= 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Integrate rhs over [t0, t1], sampling observers at the given cadence and
/// localizing the first threshold crossing of each event on dense output.
/// Steps land exactly on sample times; the on_step hook may renormalize the
/// live state (e.g. wrap phases) at accepted-step boundaries.
template <class F>
RunRecord integrate(F&& rhs, std::vector<double> y0, double t0, double t1,
                    const IntegratorConfig& cfg, const IntegrateOptions& opt = {}) {
    require(t1 > t0, "integrate: need t1 > t0");
    Dopri5<F> stepper(rhs, y0.size(), cfg);
    stepper.set_state(t0, y0);

    RunRecord rec;
    for (const auto& o : opt.observers) rec.names.push_back(o.name);
    rec.columns.resize(opt.observers.size());

    std::vector<detail::EventState> ev(opt.events.size());
    std::vector<double> scratch;

    auto record_sample = [&](double t, std::span<const double> y) {
        rec.times.push_back(t);
        for (std::size_t i = 0; i < opt.observers.size(); ++i)
            rec.columns[i].push_back(opt.observers[i].fn(t, y));
    };

    record_sample(t0, y0);
    for (std::size_t i = 0; i < opt.events.size(); ++i)
        ev[i].prev_value = opt.events[i].observable(t0, y0);

    const double dt = opt.sample_dt > 0.0 ? opt.sample_dt : (t1 - t0);
    const long n_samples = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));

    bool halted = false;
    for (long s = 1; s <= n_samples && !halted; ++s) {
        const double t_target = (s == n_samples) ? t1 : t0 + static_cast<double>(s) * dt;
        while (stepper.t() < t_target) {
            stepper.step_towards(t_target);
            const double tn = stepper.t();
            // Event scan on the step endpoint; bisect on dense output.
            double t_hit = std::numeric_limits<double>::infinity();
            std::size_t hit_idx = 0;
            for (std::size_t i = 0; i < opt.events.size(); ++i) {
                if (ev[i].fired) continue;
                const double v = opt.events[i].observable(tn, stepper.state());
                const double t_tol = cfg.rel_tol * std::abs(tn) + cfg.abs_tol;
                auto hit = detail::locate_crossing(stepper.segment(), opt.events[i].observable,
                                                   opt.events[i].threshold,
                                                   opt.events[i].direction, ev[i].prev_value, v,
                                                   t_tol, scratch);
                ev[i].prev_value = v;
                if (hit && *hit < t_hit) {
                    t_hit = *hit;
                    hit_idx = i;
                }
            }
            if (std::isfinite(t_hit)) {
                ev[hit_idx].fired = true;
                if (!rec.event_time) {
                    rec.event_time = t_hit;
                    rec.event_name = opt.events[hit_idx].name;
                }
                if (opt.halt_on_event) {
                    scratch.resize(y0.size());
                    stepper.segment().eval(t_hit, scratch);
                    stepper.set_state(t_hit, scratch);
                    record_sample(t_hit, stepper.state());
                    halted = true;
                    break;
                }
            }
            if (opt.on_step) {
                opt.on_step(tn, stepper.state());
                stepper.invalidate_fsal();
            }
        }
        if (!halted) record_sample(stepper.t(), stepper.state());
    }

    rec.terminal_time = stepper.t();
    rec.terminal_state.assign(stepper.state().begin(), stepper.state().end());
    return rec;
}

/// One point of an adiabatic continuation.
struct AdiabaticPoint {
    double sigma = 0.0;
    double r_mean = 0.0;  // trapezoid average of the observable over measure_time
};

/// Steps a parameter along `schedule`, carrying the terminal state forward,
/// integrating settle_time (discarded) then averaging the observable over
/// measure_time. `make_rhs(sigma)` yields the vector field at each sigma;
/// `jitter` (optional) perturbs the carried state before each point.
template <class MakeRhs>
std::vector<AdiabaticPoint> integrate_adiabatic(
    MakeRhs&& make_rhs, std::span<const double> schedule, double settle_time,
    double measure_time, const IntegratorConfig& cfg, std::vector<double> y0,
    const std::function<double(double, std::span<const double>)>& observable,
    double sample_dt, const StepHook& on_step = {},
    const std::function<void(std::span<double>)>& jitter = {}) {
    require(!schedule.empty(), "integrate_adiabatic: empty schedule");
    std::vector<AdiabaticPoint> out;
    out.reserve(schedule.size());
    std::vector<double> y = std::move(y0);
    double t = 0.0;
    for (double sigma : schedule) {
        if (jitter) jitter(y);
        auto rhs = make_rhs(sigma);
        try {
            IntegrateOptions settle_opt;
            settle_opt.on_step = on_step;
            auto settled = integrate(rhs, y, t, t + settle_time, cfg, settle_opt);
            IntegrateOptions measure_opt;
            measure_opt.on_step = on_step;
            measure_opt.sample_dt = sample_dt;
            measure_opt.observers.push_back({"obs", observable});
            auto measured = integrate(rhs, settled.terminal_state, settled.terminal_time,
                                      settled.terminal_time + measure_time, cfg, measure_opt);
            // Trapezoid rule on the observer samples.
            const auto& ts = measured.times;
            const auto& vs = measured.columns[0];
            double area = 0.0;
            for (std::size_t i = 1; i < ts.size(); ++i)
                area += 0.5 * (vs[i] + vs[i - 1]) * (ts[i] - ts[i - 1]);
            out.push_back({sigma, area / (ts.back() - ts.front())});
            y = measured.terminal_state;
            t = measured.terminal_time;
        } catch (const IntegrationError& e) {
            throw IntegrationError("adiabatic point sigma=" + std::to_string(sigma) + ": " +
                                       e.what(),
                                   e.last_good_time);
        }
    }
    return out;
}

}  // namespace chimera::ode
