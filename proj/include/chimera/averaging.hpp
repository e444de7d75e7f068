#pragma once

#include <cmath>
#include <vector>

#include "chimera/core.hpp"
#include "chimera/math.hpp"
#include "chimera/ode.hpp"
#include "chimera/ws.hpp"

namespace chimera::averaging {

using core::StarParams;

namespace detail {

/// Periodic trapezoid quadrature of f over [0, 2*pi), doubled until two
/// successive grids agree to `tol` (spectrally accurate for smooth
/// 2*pi-periodic integrands).
template <class F>
double periodic_quadrature(F&& f, double tol = 1e-13) {
    int m = 64;
    auto eval = [&](int grid) {
        double acc = 0.0;
        for (int k = 0; k < grid; ++k) acc += f(two_pi * k / grid);
        return acc * (two_pi / grid);
    };
    double prev = eval(m);
    for (m = 128; m <= (1 << 20); m *= 2) {
        const double cur = eval(m);
        if (std::abs(cur - prev) <= tol * (1.0 + std::abs(cur))) return cur;
        prev = cur;
    }
    return prev;
}

inline void check_domain(double x) {
    if (!(std::abs(x) < 1.0))
        throw std::domain_error("averaging: |x| must be < 1 (integrand singularity)");
}

}  // namespace detail

/// P(x) = -(1/pi) int_0^{2pi} sin(t) / (1 + x sin t) dt
inline double p_function(double x) {
    detail::check_domain(x);
    return -(1.0 / pi) *
           detail::periodic_quadrature([x](double t) { return std::sin(t) / (1.0 + x * std::sin(t)); });
}

/// Q(x) = (1/2pi) int_0^{2pi} dt / (1 + x sin t)
inline double q_function(double x) {
    detail::check_domain(x);
    return (1.0 / two_pi) *
           detail::periodic_quadrature([x](double t) { return 1.0 / (1.0 + x * std::sin(t)); });
}

/// R = P/Q.
inline double r_function(double x) { return p_function(x) / q_function(x); }

/// Truncated odd series P(x) = sum_k a_{2k} x^{2k-1} with
/// a_{2k} = (1/pi) int_0^{2pi} sin^{2k} = 2 (2k-1)!! / (2k)!!; cross-check
/// oracle for |x| <= 0.5.
inline double p_series(double x, int k_max = 25) {
    require(std::abs(x) <= 0.5, "p_series: valid for |x| <= 0.5");
    double coeff = 1.0;  // a_2 = 1
    double xp = x;
    double acc = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        acc += coeff * xp;
        // a_{2(k+1)} = a_{2k} * (2k+1) / (2k+2)
        coeff *= (2.0 * k + 1.0) / (2.0 * k + 2.0);
        xp *= x * x;
    }
    return acc;
}

/// First-order averaged radial field F1(rho) = -(sin 2 delta / 4) sigma (1 - rho^2) R(sigma rho),
/// valid on [0, 1 - delta0].
struct AveragedField {
    double sigma;
    double delta;
    double delta0;
    bool regime_warning;  // set when sigma >= 1 (outside the averaging regime)

    double operator()(double rho) const {
        require(std::abs(rho) <= 1.0 - delta0 + 1e-12, "AveragedField: rho outside [0, 1-delta0]");
        return -(std::sin(2.0 * delta) / 4.0) * sigma * (1.0 - rho * rho) * r_function(sigma * rho);
    }
};

inline AveragedField averaged_field(const StarParams& p, double delta0 = 0.05) {
    require(delta0 > 0.0 && delta0 < 1.0, "averaged_field: delta0 must be in (0,1)");
    return {p.sigma, p.delta, delta0, p.sigma >= 1.0};
}

/// Slow-fast form of the polar alpha flow on the time scale tau = beta t:
///   r'   = eps F(r, eta),   eps = 1/beta
///   eta' = -1 - sigma r sin(eta + delta) + eps G1(r, eta)
struct SlowFastVelocity {
    double dr;
    double deta;
};

inline SlowFastVelocity slow_fast_rhs(const StarParams& p, double r, double eta) {
    require(r > 0.0 && r < 1.0, "slow_fast_rhs: r must be in (0,1)");
    const double eps = 1.0 / p.beta;
    const double F = 0.5 * p.sigma * (1.0 - r * r) * std::cos(eta - p.delta);
    const double G1 = 1.0 - 0.5 * p.sigma * (1.0 + r * r) / r * std::sin(eta - p.delta);
    return {eps * F, -1.0 - p.sigma * r * std::sin(eta + p.delta) + eps * G1};
}

/// Outcome of integrating the true polar system against the averaged one.
struct AveragingComparison {
    double sup_error;   // sup_tau |r(tau) - rho(tau)|
    double c_estimate;  // beta * sup_error, the implied constant of the 1/beta law
};

/// Integrates the slow-fast system and rho' = (1/beta) F1(rho) from matched
/// initial radius r0 (eta0 = 0) over tau in [0, horizon].
inline AveragingComparison compare_averaged(const StarParams& p, double r0, double horizon,
                                            double delta0 = 0.05,
                                            const ode::IntegratorConfig& cfg = {}) {
    require(r0 >= 0.0 && r0 < 1.0 - delta0, "compare_averaged: r0 must be in [0, 1-delta0)");
    if (r0 == 0.0) return {0.0, 0.0};

    auto field = averaged_field(p, delta0);
    // Sampled values of R on a fine grid, reused by the averaged integrand;
    // the quadrature is too slow to run inside the inner RK stages.
    const int table_n = 2048;
    std::vector<double> r_table(table_n + 1);
    for (int i = 0; i <= table_n; ++i)
        r_table[static_cast<std::size_t>(i)] = r_function(p.sigma * (1.0 - delta0) * i / table_n);
    auto r_interp = [&, table_n](double x) {
        const double u = x / (p.sigma * (1.0 - delta0)) * table_n;
        const int i = std::min(static_cast<int>(u), table_n - 1);
        const double w = u - i;
        return (1.0 - w) * r_table[static_cast<std::size_t>(i)] +
               w * r_table[static_cast<std::size_t>(i) + 1];
    };

    auto true_rhs = [&](double, std::span<const double> y, std::span<double> d) {
        const auto v = slow_fast_rhs(p, y[0], y[1]);
        d[0] = v.dr;
        d[1] = v.deta;
    };
    auto avg_rhs = [&](double, std::span<const double> y, std::span<double> d) {
        const double rho = std::clamp(y[0], 0.0, 1.0 - delta0);
        d[0] = -(std::sin(2.0 * field.delta) / 4.0) * field.sigma * (1.0 - rho * rho) *
               r_interp(field.sigma * rho) / p.beta;
    };

    const double dt = horizon / 4000.0;
    ode::IntegrateOptions opt_true;
    opt_true.sample_dt = dt;
    opt_true.observers.push_back({"r", [](double, std::span<const double> y) { return y[0]; }});
    auto rec_true = ode::integrate(true_rhs, {r0, 0.0}, 0.0, horizon, cfg, opt_true);

    ode::IntegrateOptions opt_avg;
    opt_avg.sample_dt = dt;
    opt_avg.observers.push_back({"rho", [](double, std::span<const double> y) { return y[0]; }});
    auto rec_avg = ode::integrate(avg_rhs, {r0}, 0.0, horizon, cfg, opt_avg);

    double sup = 0.0;
    const std::size_t n = std::min(rec_true.times.size(), rec_avg.times.size());
    for (std::size_t i = 0; i < n; ++i)
        sup = std::max(sup, std::abs(rec_true.columns[0][i] - rec_avg.columns[0][i]));
    return {sup, p.beta * sup};
}

}  // namespace chimera::averaging
