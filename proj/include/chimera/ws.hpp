#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "chimera/core.hpp"
#include "chimera/math.hpp"

namespace chimera::ws {

using core::cplx;
using core::StarParams;

/// Watanabe--Strogatz coordinates: Mobius parameters (alpha, psi) plus the
/// constant angles theta. |alpha| < 1 strictly; the WS chart degenerates as
/// |alpha| -> 1 (full synchrony).
struct WsState {
    cplx alpha;
    double psi = 0.0;
    std::vector<double> theta;

    WsState(cplx a, double p, std::vector<double> th)
        : alpha(a), psi(p), theta(std::move(th)) {
        check_alpha(alpha);
    }

    static void check_alpha(cplx a) {
        if (!(std::abs(a) < 1.0))
            throw std::domain_error("WsState: |alpha| must be < 1 (chart degenerates)");
    }
};

/// The driving functions of a WS-form system phi_j' = f e^{i phi_j} + g + conj(f) e^{-i phi_j};
/// both are evaluated at the complex order parameter z.
struct WsDrive {
    std::function<cplx(cplx)> f;
    std::function<double(cplx)> g;
};

/// Disk-preserving Mobius action M_{alpha,psi}(w) = (alpha + e^{i psi} w) / (1 + conj(alpha) e^{i psi} w).
inline cplx mobius_apply(cplx alpha, double psi, cplx w) {
    WsState::check_alpha(alpha);
    const cplx ew = unit(psi) * w;
    return (alpha + ew) / (1.0 + std::conj(alpha) * ew);
}

/// Derivative of the circle action, d phi / d theta = (1 - |alpha|^2) / |alpha + e^{i(psi+theta)}|^2.
inline double mobius_derivative(cplx alpha, double psi, double theta) {
    WsState::check_alpha(alpha);
    const double num = 1.0 - std::norm(alpha);
    const double den = std::norm(alpha + unit(psi + theta));
    return num / den;
}

/// phi_j = arg M_{alpha,psi}(e^{i theta_j}), as a single-star relative PhaseState.
inline std::vector<double> reconstruct_phases(const WsState& s) {
    std::vector<double> phases(s.theta.size());
    for (std::size_t j = 0; j < s.theta.size(); ++j)
        phases[j] = wrap_2pi(std::arg(mobius_apply(s.alpha, s.psi, unit(s.theta[j]))));
    return phases;
}

/// z(alpha, psi, theta) = (1/N) sum_j M_{alpha,psi}(e^{i theta_j}).
inline cplx ws_order_parameter(const WsState& s) {
    cplx z{0.0, 0.0};
    for (double th : s.theta) z += mobius_apply(s.alpha, s.psi, unit(th));
    return z / static_cast<double>(s.theta.size());
}

inline core::OrderParameter ws_order_parameter_op(const WsState& s) {
    return core::OrderParameter::from(ws_order_parameter(s));
}

enum class Closure {
    ExactZ,            // f, g at z = z(alpha, psi, theta)
    AlphaSubstituted,  // f, g at z = alpha
};

struct WsVelocity {
    cplx dalpha;
    double dpsi;
};

/// d alpha/dt = i (f alpha^2 + g alpha + conj(f)); d psi/dt = f alpha + g + conj(f) conj(alpha).
inline WsVelocity ws_rhs(const WsDrive& drive, const WsState& s, Closure closure) {
    const cplx z = closure == Closure::ExactZ ? ws_order_parameter(s) : s.alpha;
    const cplx f = drive.f(z);
    const double g = drive.g(z);
    const cplx a = s.alpha;
    const cplx dalpha = cplx{0.0, 1.0} * (f * a * a + g * a + std::conj(f));
    const double dpsi = (f * a + std::conj(f) * std::conj(a)).real() + g;
    return {dalpha, dpsi};
}

/// The star system in WS form: f = -sigma e^{-i delta} / (2i),
/// g = 1 - beta - sigma beta Im(z e^{i delta}).
inline WsDrive star_drive(const StarParams& p) {
    const cplx f_val = -p.sigma * unit(-p.delta) / cplx{0.0, 2.0};
    const double sigma_beta = p.sigma * p.beta;
    const double beta = p.beta;
    const double delta = p.delta;
    return {
        [f_val](cplx) { return f_val; },
        [sigma_beta, beta, delta](cplx z) {
            return 1.0 - beta - sigma_beta * (z * unit(delta)).imag();
        },
    };
}

/// Closed alpha equation (z = alpha substituted into the star drive):
/// alpha' = -(sigma/2)(e^{-i d} + beta e^{i d}) a^2 + i(1-beta) a
///          + (sigma/2)(beta |a|^2 e^{-i d} + e^{i d}).
inline cplx closed_alpha_rhs(const StarParams& p, cplx a) {
    const cplx ed = unit(p.delta), emd = unit(-p.delta);
    return -(p.sigma / 2.0) * (emd + p.beta * ed) * a * a + cplx{0.0, 1.0} * (1.0 - p.beta) * a +
           (p.sigma / 2.0) * (p.beta * std::norm(a) * emd + ed);
}

/// Same flow in polar coordinates alpha = r e^{i eta}:
///   r'   = (sigma/2)(1 - r^2) cos(eta - delta)
///   eta' = 1 - beta - sigma beta r sin(eta + delta) - (sigma/2)((1 + r^2)/r) sin(eta - delta)
struct PolarVelocity {
    double dr;
    double deta;
};

inline PolarVelocity closed_alpha_polar_rhs(const StarParams& p, double r, double eta) {
    require(r > 0.0 && r < 1.0, "closed_alpha_polar_rhs: r must be in (0,1)");
    const double dr = 0.5 * p.sigma * (1.0 - r * r) * std::cos(eta - p.delta);
    const double deta = 1.0 - p.beta - p.sigma * p.beta * r * std::sin(eta + p.delta) -
                        0.5 * p.sigma * (1.0 + r * r) / r * std::sin(eta - p.delta);
    return {dr, deta};
}

/// Backward and forward critical couplings of a single star.
struct CriticalCouplings {
    double sigma_b;
    double sigma_f;
};

inline CriticalCouplings critical_couplings(double beta, double delta) {
    require(beta > 1.0, "critical_couplings: beta must be > 1");
    require(delta > 0.0 && delta < pi / 4, "critical_couplings: delta must be in (0, pi/4)");
    const double c2d = std::cos(2.0 * delta);
    return {(beta - 1.0) / (1.0 + beta * c2d), (beta - 1.0) / std::sqrt(1.0 + 2.0 * beta * c2d)};
}

/// The incoherent branch: fixed point of the closed alpha equation with
/// arg(alpha_I) = -pi/2 + delta, plus the polar-coordinates Jacobian.
struct AsyncFixedPoint {
    cplx alpha_I;
    double r_minus;
    double r_plus;
    double jacobian[2][2];  // d(r', eta')/d(r, eta) at (r_minus, -pi/2 + delta)
    bool stable;
};

class BranchNonexistence : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline AsyncFixedPoint fixed_point_async(const StarParams& p) {
    require(p.sigma > 0.0, "fixed_point_async: sigma must be > 0");
    const double sf = critical_couplings(p.beta, p.delta).sigma_f;
    if (!(p.sigma < sf))
        throw BranchNonexistence("fixed_point_async: branch requires sigma < sigma_f");
    const double b1 = p.beta - 1.0;
    const double B = 1.0 + 2.0 * p.beta * std::cos(2.0 * p.delta);
    const double disc = std::sqrt(b1 * b1 - p.sigma * p.sigma * B);
    AsyncFixedPoint fp;
    fp.r_minus = (b1 - disc) / (p.sigma * B);
    fp.r_plus = (b1 + disc) / (p.sigma * B);
    fp.alpha_I = std::polar(fp.r_minus, -pi / 2.0 + p.delta);
    const double r = fp.r_minus;
    fp.jacobian[0][0] = 0.0;
    fp.jacobian[0][1] = 0.5 * p.sigma * (1.0 - r * r);
    fp.jacobian[1][0] = 0.5 * p.sigma * (B - 1.0 / (r * r));
    fp.jacobian[1][1] = -p.beta * p.sigma * r * std::sin(2.0 * p.delta);
    const double tr = fp.jacobian[0][0] + fp.jacobian[1][1];
    const double det = fp.jacobian[0][0] * fp.jacobian[1][1] - fp.jacobian[0][1] * fp.jacobian[1][0];
    fp.stable = tr < 0.0 && det > 0.0;
    return fp;
}

/// The synchronized state phi^C with its transverse eigenvalues. lambda2 has
/// multiplicity N-1 in the full (N+1)-dimensional Jacobian (not stored per copy).
struct SyncFixedPoint {
    double phi_C;
    double lambda1;
    double lambda2;
    bool stable;
};

inline SyncFixedPoint fixed_point_sync(const StarParams& p) {
    require(p.sigma > 0.0, "fixed_point_sync: sigma must be > 0");
    const double c2d = std::cos(2.0 * p.delta), s2d = std::sin(2.0 * p.delta);
    const double norm_v = std::sqrt(1.0 + p.beta * p.beta + 2.0 * p.beta * c2d);
    if (!(p.sigma * norm_v >= p.beta - 1.0))
        throw BranchNonexistence("fixed_point_sync: state requires sigma*||v|| >= beta - 1");
    SyncFixedPoint fp;
    fp.phi_C = p.delta - pi + std::atan((1.0 + p.beta * c2d) / (p.beta * s2d)) +
               std::acos(std::min(1.0, (p.beta - 1.0) / (p.sigma * norm_v)));
    fp.lambda1 = -p.sigma *
                 (std::cos(fp.phi_C - p.delta) + p.beta * std::cos(fp.phi_C + p.delta));
    fp.lambda2 = -p.sigma * std::cos(fp.phi_C - p.delta);
    fp.stable = fp.lambda1 < 0.0 && fp.lambda2 < 0.0;
    return fp;
}

/// Residual of the phase-locked condition at phi: zero at phi = phi^C.
inline double sync_state_residual(const StarParams& p, double phi) {
    return 1.0 - p.beta - p.sigma * std::sin(phi - p.delta) -
           p.beta * p.sigma * std::sin(phi + p.delta);
}

/// Lift of a node-space coupling vector field to theta coordinates:
/// theta_i' = (d phi/d theta)^{-1} * Y_i for i in the coupled set, zero
/// otherwise; alpha and psi receive no contribution under this lift.
inline std::vector<double> lift_coupling_to_theta(const WsState& s,
                                                  std::span<const int> coupled_indices,
                                                  std::span<const double> node_values) {
    require(coupled_indices.size() == node_values.size(),
            "lift_coupling_to_theta: index/value size mismatch");
    std::vector<double> dtheta(s.theta.size(), 0.0);
    for (std::size_t k = 0; k < coupled_indices.size(); ++k) {
        const auto i = static_cast<std::size_t>(coupled_indices[k]);
        require(i < s.theta.size(), "lift_coupling_to_theta: index out of range");
        dtheta[i] = node_values[k] / mobius_derivative(s.alpha, s.psi, s.theta[i]);
    }
    return dtheta;
}

// ---------------------------------------------------------------------------
// Hub-coupled pair of stars in WS coordinates (exact reduction; the hub phase
// difference Gamma acts as a common external field on each star's g).
// ---------------------------------------------------------------------------

struct HubCoupledVelocity {
    cplx dalpha_plus, dalpha_minus;
    double dpsi_plus, dpsi_minus;
    double dgamma;
};

/// g_pm picks up -eps*sin(-/+Gamma + delta) (the hub's coupling term, seen
/// with opposite sign by the relative leaf phases), and
/// Gamma' = sigma*beta*Im((z^+ - z^-) e^{i delta}) - 2 eps cos(delta) sin(Gamma).
inline HubCoupledVelocity hub_coupled_ws_rhs(const StarParams& plus, const StarParams& minus,
                                             double eps, const WsState& sp, const WsState& sm,
                                             double gamma, Closure closure = Closure::ExactZ) {
    const cplx zp = closure == Closure::ExactZ ? ws_order_parameter(sp) : sp.alpha;
    const cplx zm = closure == Closure::ExactZ ? ws_order_parameter(sm) : sm.alpha;

    auto star = [&](const StarParams& p, const WsState& s, cplx z, double hub_term) {
        const cplx f = -p.sigma * unit(-p.delta) / cplx{0.0, 2.0};
        const double g =
            1.0 - p.beta - p.sigma * p.beta * (z * unit(p.delta)).imag() - hub_term;
        const cplx a = s.alpha;
        const cplx da = cplx{0.0, 1.0} * (f * a * a + g * a + std::conj(f));
        const double dpsi = (f * a + std::conj(f) * std::conj(a)).real() + g;
        return std::pair{da, dpsi};
    };

    HubCoupledVelocity v;
    const auto [dap, dpp] = star(plus, sp, zp, eps * std::sin(-gamma + plus.delta));
    const auto [dam, dpm] = star(minus, sm, zm, eps * std::sin(gamma + minus.delta));
    v.dalpha_plus = dap;
    v.dpsi_plus = dpp;
    v.dalpha_minus = dam;
    v.dpsi_minus = dpm;
    v.dgamma = plus.sigma * plus.beta * (zp * unit(plus.delta)).imag() -
               minus.sigma * minus.beta * (zm * unit(minus.delta)).imag() -
               2.0 * eps * std::cos(plus.delta) * std::sin(gamma);
    return v;
}

// ---------------------------------------------------------------------------
// Recovery of (alpha, psi) from phases with theta known: nonlinear least
// squares over 3 real unknowns. Initialization: alpha from the order
// parameter, psi = 0, refined over a coarse psi grid if needed.
// ---------------------------------------------------------------------------

struct MobiusFit {
    cplx alpha;
    double psi;
    double residual;  // rms of |M(e^{i theta_j}) - e^{i phi_j}|
};

namespace detail {

inline double fit_residual(cplx alpha, double psi, std::span<const double> phases,
                           std::span<const double> theta) {
    if (std::abs(alpha) >= 1.0) return 1e100;
    double ss = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const cplx d = mobius_apply(alpha, psi, unit(theta[j])) - unit(phases[j]);
        ss += std::norm(d);
    }
    return std::sqrt(ss / static_cast<double>(theta.size()));
}

}  // namespace detail

inline MobiusFit fit_mobius(std::span<const double> phases, std::span<const double> theta,
                            int max_iter = 80) {
    require(phases.size() == theta.size() && theta.size() >= 3,
            "fit_mobius: need >= 3 phases with matching theta");
    cplx z{0.0, 0.0};
    for (double p : phases) z += unit(p);
    z /= static_cast<double>(phases.size());
    cplx alpha = std::abs(z) < 0.95 ? z : z * (0.95 / std::abs(z));

    double psi = 0.0, best = detail::fit_residual(alpha, psi, phases, theta);
    for (int k = 1; k < 16; ++k) {
        const double cand = two_pi * k / 16.0;
        const double r = detail::fit_residual(alpha, cand, phases, theta);
        if (r < best) {
            best = r;
            psi = cand;
        }
    }

    // Gauss-Newton on (Re alpha, Im alpha, psi) with numerical Jacobian.
    double x[3] = {alpha.real(), alpha.imag(), psi};
    const std::size_t m = 2 * theta.size();
    std::vector<double> res(m), jac(m * 3);
    auto fill_res = [&](const double* v, std::vector<double>& out) {
        const cplx a{v[0], v[1]};
        if (std::abs(a) >= 1.0) {
            std::fill(out.begin(), out.end(), 1e50);
            return;
        }
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const cplx d = mobius_apply(a, v[2], unit(theta[j])) - unit(phases[j]);
            out[2 * j] = d.real();
            out[2 * j + 1] = d.imag();
        }
    };
    for (int it = 0; it < max_iter; ++it) {
        fill_res(x, res);
        const double step = 1e-7;
        for (int col = 0; col < 3; ++col) {
            double xp[3] = {x[0], x[1], x[2]};
            xp[col] += step;
            std::vector<double> rp(m);
            fill_res(xp, rp);
            for (std::size_t r = 0; r < m; ++r) jac[r * 3 + col] = (rp[r] - res[r]) / step;
        }
        // Normal equations (3x3), with a small Levenberg damping.
        double A[3][3] = {}, b[3] = {};
        for (std::size_t r = 0; r < m; ++r)
            for (int i = 0; i < 3; ++i) {
                b[i] -= jac[r * 3 + i] * res[r];
                for (int j = 0; j < 3; ++j) A[i][j] += jac[r * 3 + i] * jac[r * 3 + j];
            }
        for (int i = 0; i < 3; ++i) A[i][i] += 1e-12;
        // Gaussian elimination.
        for (int col = 0; col < 3; ++col) {
            int piv = col;
            for (int r = col + 1; r < 3; ++r)
                if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
            std::swap(A[col], A[piv]);
            std::swap(b[col], b[piv]);
            for (int r = col + 1; r < 3; ++r) {
                const double f = A[r][col] / A[col][col];
                for (int cc = col; cc < 3; ++cc) A[r][cc] -= f * A[col][cc];
                b[r] -= f * b[col];
            }
        }
        double dx[3];
        for (int r = 2; r >= 0; --r) {
            double s = b[r];
            for (int cc = r + 1; cc < 3; ++cc) s -= A[r][cc] * dx[cc];
            dx[r] = s / A[r][r];
        }
        double scale = 1.0;
        const cplx a_try{x[0] + dx[0], x[1] + dx[1]};
        if (std::abs(a_try) >= 0.999) scale = 0.3;
        for (int i = 0; i < 3; ++i) x[i] += scale * dx[i];
        if (std::abs(dx[0]) + std::abs(dx[1]) + std::abs(dx[2]) < 1e-14) break;
    }
    MobiusFit fit;
    fit.alpha = {x[0], x[1]};
    fit.psi = wrap_2pi(x[2]);
    fit.residual = detail::fit_residual(fit.alpha, x[2], phases, theta);
    return fit;
}

/// Uniformly distributed constants of motion: theta_j = 2 pi j / N + shift.
inline std::vector<double> uniform_theta(int n, double shift = 0.0) {
    std::vector<double> th(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) th[static_cast<std::size_t>(j)] = wrap_2pi(two_pi * j / n + shift);
    return th;
}

}  // namespace chimera::ws
