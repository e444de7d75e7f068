#pragma once

#include <complex>
#include <vector>

#include "chimera/ode.hpp"
#include "chimera/ws.hpp"

namespace chimera::ws {

/// Raised when |alpha| reaches 1 - 1e-9 during integration; the WS chart has
/// degenerated (synchrony) and the caller decides what to do.
class DomainExit : public ode::IntegrationError {
  public:
    using ode::IntegrationError::IntegrationError;
};

inline ode::StepHook ws_domain_guard(std::size_t alpha_offset = 0) {
    return [alpha_offset](double t, std::span<double> y) {
        const double mag = std::hypot(y[alpha_offset], y[alpha_offset + 1]);
        if (mag >= 1.0 - 1e-9)
            throw DomainExit("WS chart degenerated: |alpha| reached 1 - 1e-9", t);
        y[alpha_offset + 2] = wrap_2pi(y[alpha_offset + 2]);
    };
}

struct WsTrajectory {
    std::vector<double> times;
    std::vector<cplx> alpha;
    std::vector<double> psi;
    WsState terminal;
};

/// Integrates the single-star WS flow (alpha, psi) with theta fixed.
/// State layout: [Re alpha, Im alpha, psi].
inline WsTrajectory ws_integrate_star(const StarParams& p, const WsState& initial, double t0,
                                      double t1, Closure closure,
                                      const ode::IntegratorConfig& cfg, double sample_dt) {
    const auto drive = star_drive(p);
    const auto& theta = initial.theta;
    auto rhs = [&](double, std::span<const double> y, std::span<double> d) {
        WsState s({y[0], y[1]}, y[2], theta);
        const auto v = ws_rhs(drive, s, closure);
        d[0] = v.dalpha.real();
        d[1] = v.dalpha.imag();
        d[2] = v.dpsi;
    };
    ode::IntegrateOptions io;
    io.sample_dt = sample_dt;
    io.on_step = ws_domain_guard();
    io.observers.push_back({"re_a", [](double, std::span<const double> y) { return y[0]; }});
    io.observers.push_back({"im_a", [](double, std::span<const double> y) { return y[1]; }});
    io.observers.push_back({"psi", [](double, std::span<const double> y) { return y[2]; }});
    auto rec = ode::integrate(rhs, {initial.alpha.real(), initial.alpha.imag(), initial.psi},
                              t0, t1, cfg, io);
    WsTrajectory out{std::move(rec.times),
                     {},
                     std::move(rec.columns[2]),
                     WsState({rec.terminal_state[0], rec.terminal_state[1]},
                             rec.terminal_state[2], theta)};
    out.alpha.reserve(out.times.size());
    for (std::size_t i = 0; i < out.times.size(); ++i)
        out.alpha.emplace_back(rec.columns[0][i], rec.columns[1][i]);
    return out;
}

struct HubCoupledTrajectory {
    std::vector<double> times;
    std::vector<cplx> z_plus, z_minus;  // exact order parameters along the way
    std::vector<double> gamma;
    WsState terminal_plus, terminal_minus;
    double terminal_gamma = 0.0;
};

/// Integrates the hub-coupled reduced system (alpha+-, psi+-, Gamma) with
/// both theta sets fixed. Layout: [Re a+, Im a+, psi+, Re a-, Im a-, psi-, Gamma].
inline HubCoupledTrajectory hub_coupled_integrate(const StarParams& plus,
                                                  const StarParams& minus, double eps,
                                                  const WsState& sp0, const WsState& sm0,
                                                  double gamma0, double t1,
                                                  const ode::IntegratorConfig& cfg,
                                                  double sample_dt,
                                                  Closure closure = Closure::ExactZ) {
    const auto &thp = sp0.theta, &thm = sm0.theta;
    auto rhs = [&](double, std::span<const double> y, std::span<double> d) {
        WsState sp({y[0], y[1]}, y[2], thp);
        WsState sm({y[3], y[4]}, y[5], thm);
        const auto v = hub_coupled_ws_rhs(plus, minus, eps, sp, sm, y[6], closure);
        d[0] = v.dalpha_plus.real();
        d[1] = v.dalpha_plus.imag();
        d[2] = v.dpsi_plus;
        d[3] = v.dalpha_minus.real();
        d[4] = v.dalpha_minus.imag();
        d[5] = v.dpsi_minus;
        d[6] = v.dgamma;
    };
    ode::IntegrateOptions io;
    io.sample_dt = sample_dt;
    io.on_step = [](double t, std::span<double> y) {
        for (std::size_t off : {std::size_t{0}, std::size_t{3}}) {
            if (std::hypot(y[off], y[off + 1]) >= 1.0 - 1e-9)
                throw DomainExit("WS chart degenerated: |alpha| reached 1 - 1e-9", t);
            y[off + 2] = wrap_2pi(y[off + 2]);
        }
        y[6] = wrap_2pi(y[6]);
    };
    for (int i = 0; i < 7; ++i)
        io.observers.push_back({"y" + std::to_string(i),
                                [i](double, std::span<const double> y) { return y[static_cast<std::size_t>(i)]; }});
    auto rec = ode::integrate(rhs,
                              {sp0.alpha.real(), sp0.alpha.imag(), sp0.psi, sm0.alpha.real(),
                               sm0.alpha.imag(), sm0.psi, gamma0},
                              0.0, t1, cfg, io);
    HubCoupledTrajectory out{std::move(rec.times),
                             {},
                             {},
                             std::move(rec.columns[6]),
                             WsState({rec.terminal_state[0], rec.terminal_state[1]},
                                     rec.terminal_state[2], thp),
                             WsState({rec.terminal_state[3], rec.terminal_state[4]},
                                     rec.terminal_state[5], thm),
                             rec.terminal_state[6]};
    out.z_plus.reserve(out.times.size());
    out.z_minus.reserve(out.times.size());
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        WsState sp({rec.columns[0][i], rec.columns[1][i]}, rec.columns[2][i], thp);
        WsState sm({rec.columns[3][i], rec.columns[4][i]}, rec.columns[5][i], thm);
        out.z_plus.push_back(ws_order_parameter(sp));
        out.z_minus.push_back(ws_order_parameter(sm));
    }
    return out;
}

}  // namespace chimera::ws
