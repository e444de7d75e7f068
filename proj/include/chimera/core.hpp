#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "chimera/fast_trig.hpp"
#include "chimera/math.hpp"

namespace chimera::core {

using cplx = std::complex<double>;

inline void sin_cos(double x, double& s, double& c) { fast_sincos(x, s, c); }

/// Model parameters of one star after the rescaling: hub frequency gap beta,
/// intra-star coupling sigma, phase frustration delta, leaf count. The
/// pre-rescaling parameters enter only through sigma = 1/c, eps = epsilon*sigma/lambda.
struct StarParams {
    double beta;
    double sigma;
    double delta;
    int n_leaves;

    StarParams(double beta_, double sigma_, double delta_, int n)
        : beta(beta_), sigma(sigma_), delta(delta_), n_leaves(n) {
        require(beta > 1.0, "StarParams: beta must be > 1");
        require(sigma >= 0.0, "StarParams: sigma must be >= 0");
        require(delta > 0.0 && delta < pi / 4, "StarParams: delta must be in (0, pi/4)");
        require(n_leaves >= 1, "StarParams: n_leaves must be >= 1");
    }
};

/// Phases of one or two stars. Entries are reduced to [0, 2*pi) on
/// construction; integrators keep their own unreduced copies.
struct PhaseState {
    int star_count = 1;
    std::array<double, 2> hub{0.0, 0.0};
    std::array<std::vector<double>, 2> leaves;

    static PhaseState single(double hub_phase, std::vector<double> leaf_phases) {
        PhaseState s;
        s.star_count = 1;
        s.hub[0] = wrap_2pi(hub_phase);
        s.leaves[0] = std::move(leaf_phases);
        for (auto& p : s.leaves[0]) p = wrap_2pi(p);
        return s;
    }

    static PhaseState coupled(double hub_plus, std::vector<double> leaves_plus, double hub_minus,
                              std::vector<double> leaves_minus) {
        require(leaves_plus.size() == leaves_minus.size(),
                "PhaseState: stars must have equal leaf counts");
        PhaseState s;
        s.star_count = 2;
        s.hub = {wrap_2pi(hub_plus), wrap_2pi(hub_minus)};
        s.leaves = {std::move(leaves_plus), std::move(leaves_minus)};
        for (auto& star : s.leaves)
            for (auto& p : star) p = wrap_2pi(p);
        return s;
    }

    int n_leaves() const { return static_cast<int>(leaves[0].size()); }
};

/// Complex order parameter z and its magnitude r.
struct OrderParameter {
    double re = 0.0;
    double im = 0.0;
    double magnitude = 0.0;

    static OrderParameter from(cplx z) { return {z.real(), z.imag(), std::abs(z)}; }
    cplx value() const { return {re, im}; }
};

enum class CouplingFamily {
    GeneralSmooth,      // arbitrary 2*pi-periodic h, evaluated pointwise
    Sinusoidal,         // c1 * sin(x + offset)
    KuramotoSakaguchi,  // sin(x + offset), offset playing the role of delta
};

enum class CouplingPattern {
    LeafToLeafFull,    // leaf i of one star to leaf i of the other
    LeafToLeafSparse,  // only leaves in `coupled_leaves`
    HubToHub,          // hubs only
    Adjacency,         // explicit 0/1 matrix over (hub, leaves) x (hub, leaves)
};

/// Inter-star coupling description. For the leaf and adjacency patterns the
/// coupling on node i of star s is eps * sum_j A_ij h(phi_i^s - phi_j^other);
/// the hub-to-hub pattern follows the hub-coupled model, where the hub gains
/// eps * h(phi_0^other - phi_0^own).
struct CouplingSpec {
    double epsilon = 0.0;
    CouplingFamily family = CouplingFamily::KuramotoSakaguchi;
    double c1 = 1.0;
    double offset = 0.0;
    std::function<double(double)> h;  // GeneralSmooth only
    // Optional fast form of h for the general family, evaluated at w = e^{ix}
    // (trigonometric polynomials avoid the atan2 in the hot loop).
    std::function<double(cplx)> h_on_unit;
    CouplingPattern pattern = CouplingPattern::LeafToLeafFull;
    std::vector<int> coupled_leaves;      // 0-based leaf indices, sparse pattern
    std::vector<std::uint8_t> adjacency;  // (N+1)*(N+1) row-major, index 0 = hub

    int k() const { return static_cast<int>(coupled_leaves.size()); }

    double eval(double x) const {
        switch (family) {
            case CouplingFamily::GeneralSmooth: return h(x);
            case CouplingFamily::Sinusoidal: return c1 * std::sin(x + offset);
            case CouplingFamily::KuramotoSakaguchi: return std::sin(x + offset);
        }
        return 0.0;
    }

    void validate(int n_leaves) const {
        require(epsilon >= 0.0, "CouplingSpec: epsilon must be >= 0");
        if (family == CouplingFamily::GeneralSmooth)
            require(static_cast<bool>(h), "CouplingSpec: general family needs a callable h");
        if (pattern == CouplingPattern::LeafToLeafSparse)
            for (int i : coupled_leaves)
                require(i >= 0 && i < n_leaves, "CouplingSpec: sparse index out of range");
        if (pattern == CouplingPattern::Adjacency) {
            const std::size_t side = static_cast<std::size_t>(n_leaves) + 1;
            require(adjacency.size() == side * side,
                    "CouplingSpec: adjacency must be (N+1)x(N+1)");
            for (auto a : adjacency) require(a <= 1, "CouplingSpec: adjacency entries must be 0/1");
        }
    }
};

// ---------------------------------------------------------------------------
// Single star, relative phases. Layout: y = (phi_1..phi_N, phi_0) where
// phi_i are leaf phases relative to the hub and phi_0 is the hub phase.
// ---------------------------------------------------------------------------

/// d/dt of the relative-phase system. The hub mean field
/// (sigma*beta/N) * sum_j sin(phi_j + delta) is accumulated once per call.
inline void single_star_relative_rhs(const StarParams& p, std::span<const double> y,
                                     std::span<double> dydt) {
    const std::size_t n = static_cast<std::size_t>(p.n_leaves);
    require(y.size() == n + 1 && dydt.size() == n + 1,
            "single_star_relative_rhs: state/params dimension mismatch");
    const double sd = std::sin(p.delta), cd = std::cos(p.delta);
    double sum_s = 0.0, sum_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s, c;
        sin_cos(y[i], s, c);
        sum_s += s;
        sum_c += c;
        // sin(phi_i - delta) = sin(phi_i)cos(delta) - cos(phi_i)sin(delta)
        dydt[i] = 1.0 - p.beta - p.sigma * (s * cd - c * sd);
    }
    // sum_j sin(phi_j + delta)
    const double mean_field = p.beta * p.sigma / static_cast<double>(n) *
                              (sum_s * cd + sum_c * sd);
    for (std::size_t i = 0; i < n; ++i) dydt[i] -= mean_field;
    dydt[n] = p.beta + mean_field;
}

inline std::vector<double> rhs_single_star_relative(const StarParams& p, const PhaseState& s) {
    require(s.star_count == 1, "rhs_single_star_relative: expected a single star");
    require(s.n_leaves() == p.n_leaves,
            "rhs_single_star_relative: state/params dimension mismatch");
    std::vector<double> y(s.leaves[0]);
    y.push_back(s.hub[0]);
    std::vector<double> d(y.size());
    single_star_relative_rhs(p, y, d);
    return d;
}

// ---------------------------------------------------------------------------
// Two coupled stars, absolute phases.
// Layout: y = (phi_0^+, phi_1^+..phi_N^+, phi_0^-, phi_1^-..phi_N^-).
// ---------------------------------------------------------------------------

namespace detail {

inline double family_on_unit(const CouplingSpec& cs, cplx w) {
    // h evaluated at x with w = exp(i x), for the trigonometric families.
    switch (cs.family) {
        case CouplingFamily::Sinusoidal:
            return cs.c1 * (w.imag() * std::cos(cs.offset) + w.real() * std::sin(cs.offset));
        case CouplingFamily::KuramotoSakaguchi:
            return w.imag() * std::cos(cs.offset) + w.real() * std::sin(cs.offset);
        case CouplingFamily::GeneralSmooth: break;
    }
    if (cs.h_on_unit) return cs.h_on_unit(w);
    return cs.h(std::atan2(w.imag(), w.real()));
}

}  // namespace detail

class CoupledStarsRhs {
  public:
    CoupledStarsRhs(const StarParams& plus, const StarParams& minus, CouplingSpec coupling)
        : p_(plus), m_(minus), cs_(std::move(coupling)) {
        require(p_.n_leaves == m_.n_leaves, "CoupledStarsRhs: stars must have equal leaf counts");
        cs_.validate(p_.n_leaves);
        n_ = static_cast<std::size_t>(p_.n_leaves);
    }

    std::size_t dim() const { return 2 * (n_ + 1); }

    void operator()(double, std::span<const double> y, std::span<double> dydt) const {
        require(y.size() == dim() && dydt.size() == dim(),
                "CoupledStarsRhs: state dimension mismatch");
        intra_star(p_, y.subspan(0, n_ + 1), dydt.subspan(0, n_ + 1));
        intra_star(m_, y.subspan(n_ + 1, n_ + 1), dydt.subspan(n_ + 1, n_ + 1));
        if (cs_.epsilon == 0.0) return;
        add_coupling(y, dydt);
    }

  private:
    void intra_star(const StarParams& p, std::span<const double> y,
                    std::span<double> dydt) const {
        const double hub = y[0];
        const double sd = std::sin(p.delta), cd = std::cos(p.delta);
        double sh, ch;
        sin_cos(hub, sh, ch);
        double sum_s = 0.0, sum_c = 0.0;  // of phi_j - phi_0
        for (std::size_t i = 1; i <= n_; ++i) {
            double s, c;
            sin_cos(y[i], s, c);
            // rotate e^{i phi_i} by e^{-i phi_0}
            const double rs = s * ch - c * sh;
            const double rc = c * ch + s * sh;
            sum_s += rs;
            sum_c += rc;
            // sin(phi_0 - phi_i + delta) = -rs*cd + rc*sd
            dydt[i] = 1.0 + p.sigma * (rc * sd - rs * cd);
        }
        dydt[0] = p.beta + p.beta * p.sigma / static_cast<double>(n_) *
                               (sum_s * cd + sum_c * sd);
    }

    void add_coupling(std::span<const double> y, std::span<double> dydt) const {
        const double eps = cs_.epsilon;
        const auto plus = y.subspan(0, n_ + 1);
        const auto minus = y.subspan(n_ + 1, n_ + 1);
        switch (cs_.pattern) {
            case CouplingPattern::LeafToLeafFull:
                for (std::size_t i = 1; i <= n_; ++i) {
                    const double x = plus[i] - minus[i];
                    dydt[i] += eps * cs_.eval(x);
                    dydt[n_ + 1 + i] += eps * cs_.eval(-x);
                }
                break;
            case CouplingPattern::LeafToLeafSparse:
                for (int leaf : cs_.coupled_leaves) {
                    const std::size_t i = static_cast<std::size_t>(leaf) + 1;
                    const double x = plus[i] - minus[i];
                    dydt[i] += eps * cs_.eval(x);
                    dydt[n_ + 1 + i] += eps * cs_.eval(-x);
                }
                break;
            case CouplingPattern::HubToHub:
                // Hub-coupled model: each hub sees h(other hub - own hub).
                dydt[0] += eps * cs_.eval(minus[0] - plus[0]);
                dydt[n_ + 1] += eps * cs_.eval(plus[0] - minus[0]);
                break;
            case CouplingPattern::Adjacency: {
                const std::size_t side = n_ + 1;
                for (std::size_t i = 0; i < side; ++i)
                    for (std::size_t j = 0; j < side; ++j) {
                        if (!cs_.adjacency[i * side + j]) continue;
                        dydt[i] += eps * cs_.eval(plus[i] - minus[j]);
                        dydt[n_ + 1 + i] += eps * cs_.eval(minus[i] - plus[j]);
                    }
                break;
            }
        }
    }

    StarParams p_, m_;
    CouplingSpec cs_;
    std::size_t n_;
};

inline std::vector<double> rhs_coupled_stars(const StarParams& plus, const StarParams& minus,
                                             const CouplingSpec& coupling, const PhaseState& s) {
    require(s.star_count == 2, "rhs_coupled_stars: expected two stars");
    require(s.n_leaves() == plus.n_leaves, "rhs_coupled_stars: state/params dimension mismatch");
    CoupledStarsRhs rhs(plus, minus, coupling);
    std::vector<double> y;
    y.reserve(rhs.dim());
    y.push_back(s.hub[0]);
    y.insert(y.end(), s.leaves[0].begin(), s.leaves[0].end());
    y.push_back(s.hub[1]);
    y.insert(y.end(), s.leaves[1].begin(), s.leaves[1].end());
    std::vector<double> d(y.size());
    rhs(0.0, y, d);
    return d;
}

// ---------------------------------------------------------------------------
// Two coupled stars in hub-relative coordinates: the workhorse for the long
// chimera runs. Layout: y = (x_1^+..x_N^+, x_1^-..x_N^-, Gamma) with
// x_i = phi_i - phi_0 and Gamma = phi_0^+ - phi_0^-. Equivalent to the
// absolute form by the change of variables; the global rotation is dropped.
// ---------------------------------------------------------------------------

class CoupledRelativeRhs {
  public:
    CoupledRelativeRhs(const StarParams& plus, const StarParams& minus, CouplingSpec coupling)
        : p_(plus), m_(minus), cs_(std::move(coupling)) {
        require(p_.n_leaves == m_.n_leaves,
                "CoupledRelativeRhs: stars must have equal leaf counts");
        require(cs_.pattern != CouplingPattern::Adjacency,
                "CoupledRelativeRhs: adjacency pattern not supported in the relative form");
        cs_.validate(p_.n_leaves);
        n_ = static_cast<std::size_t>(p_.n_leaves);
        up_.resize(n_);
        um_.resize(n_);
        sbuf_.resize(n_);
        cbuf_.resize(n_);
        if (cs_.family != CouplingFamily::GeneralSmooth) {
            fam_ = 0;  // c1 * sin(x + offset) evaluated as Im(w * rot)
            rot_ = cs_.c1 * unit(cs_.offset);
        } else {
            fam_ = cs_.h_on_unit ? 1 : 2;
            // A plain function pointer behind the std::function unlocks the
            // inner loop (no type-erased call per leaf pair).
            if (fam_ == 1)
                if (auto* ptr = cs_.h_on_unit.target<double (*)(cplx)>()) h_unit_ptr_ = *ptr;
        }
    }

    std::size_t dim() const { return 2 * n_ + 1; }

    void operator()(double, std::span<const double> y, std::span<double> dydt) const {
        const auto xp = y.subspan(0, n_);
        const auto xm = y.subspan(n_, n_);
        const double gamma = y[2 * n_];

        const double mf_p = star_terms(p_, xp, dydt.subspan(0, n_), up_);
        const double mf_m = star_terms(m_, xm, dydt.subspan(n_, n_), um_);
        double dgamma = mf_p - mf_m;

        if (cs_.epsilon > 0.0) {
            const double eps = cs_.epsilon;
            double sg, cg;
            sin_cos(gamma, sg, cg);
            const cplx eg{cg, sg};
            auto pair_values = [&](cplx w, double& vp, double& vm) {
                if (fam_ == 0) {
                    vp = eps * (w * rot_).imag();
                    vm = eps * (std::conj(w) * rot_).imag();
                } else if (fam_ == 1) {
                    vp = eps * cs_.h_on_unit(w);
                    vm = eps * cs_.h_on_unit(std::conj(w));
                } else {
                    const double x = std::atan2(w.imag(), w.real());
                    vp = eps * cs_.h(x);
                    vm = eps * cs_.h(-x);
                }
            };
            switch (cs_.pattern) {
                case CouplingPattern::LeafToLeafFull:
                    if (fam_ == 0) {
                        // w_i = up_i * conj(um_i) * e^{i Gamma}; both coupling
                        // values are linear in w_i, so one fused pass suffices.
                        const cplx rp = rot_ * eg;           // acts on up*conj(um)
                        const cplx rm = rot_ * std::conj(eg);
                        for (std::size_t i = 0; i < n_; ++i) {
                            const double ar = up_[i].real(), ai = up_[i].imag();
                            const double br = um_[i].real(), bi = um_[i].imag();
                            const double wr = ar * br + ai * bi;   // Re(up*conj(um))
                            const double wi = ai * br - ar * bi;   // Im(up*conj(um))
                            dydt[i] += eps * (wr * rp.imag() + wi * rp.real());
                            dydt[n_ + i] += eps * (wr * rm.imag() - wi * rm.real());
                        }
                    } else if (fam_ == 1 && h_unit_ptr_) {
                        auto h = h_unit_ptr_;
                        for (std::size_t i = 0; i < n_; ++i) {
                            const cplx w = up_[i] * std::conj(um_[i]) * eg;
                            dydt[i] += eps * h(w);
                            dydt[n_ + i] += eps * h(std::conj(w));
                        }
                    } else {
                        for (std::size_t i = 0; i < n_; ++i) {
                            double vp, vm;
                            pair_values(up_[i] * std::conj(um_[i]) * eg, vp, vm);
                            dydt[i] += vp;
                            dydt[n_ + i] += vm;
                        }
                    }
                    break;
                case CouplingPattern::LeafToLeafSparse:
                    for (int leaf : cs_.coupled_leaves) {
                        const auto i = static_cast<std::size_t>(leaf);
                        double vp, vm;
                        pair_values(up_[i] * std::conj(um_[i]) * eg, vp, vm);
                        dydt[i] += vp;
                        dydt[n_ + i] += vm;
                    }
                    break;
                case CouplingPattern::HubToHub: {
                    // Hubs gain eps*h(-/+Gamma); relative leaves lose it.
                    double cm, cp;
                    pair_values(eg, cm, cp);
                    for (std::size_t i = 0; i < n_; ++i) {
                        dydt[i] -= cp;
                        dydt[n_ + i] -= cm;
                    }
                    dgamma += cp - cm;
                    break;
                }
                case CouplingPattern::Adjacency: break;  // rejected in ctor
            }
        }
        dydt[2 * n_] = dgamma;
    }

    /// Mean leaf field of one star, from the unit vectors cached in u.
    std::complex<double> mean_field(int star) const {
        const auto& u = star == 0 ? up_ : um_;
        cplx s{0.0, 0.0};
        for (const auto& v : u) s += v;
        return s / static_cast<double>(n_);
    }

  private:
    /// Fills intra-star leaf velocities, caches unit vectors, returns the hub
    /// mean-field term (sigma*beta/N) sum_j sin(x_j + delta).
    double star_terms(const StarParams& p, std::span<const double> x, std::span<double> dxdt,
                      std::vector<cplx>& u) const {
        const double sd = std::sin(p.delta), cd = std::cos(p.delta);
        double* sb = sbuf_.data();
        double* cb = cbuf_.data();
        fast_sincos_span(x.data(), sb, cb, n_);
        double sum_s = 0.0, sum_c = 0.0;
        const double base = 1.0 - p.beta;
        for (std::size_t i = 0; i < n_; ++i) {
            u[i] = {cb[i], sb[i]};
            sum_s += sb[i];
            sum_c += cb[i];
            dxdt[i] = base - p.sigma * (sb[i] * cd - cb[i] * sd);
        }
        const double mf = p.beta * p.sigma / static_cast<double>(n_) * (sum_s * cd + sum_c * sd);
        for (std::size_t i = 0; i < n_; ++i) dxdt[i] -= mf;
        return mf;
    }

    StarParams p_, m_;
    CouplingSpec cs_;
    std::size_t n_;
    int fam_ = 0;
    cplx rot_{1.0, 0.0};
    double (*h_unit_ptr_)(cplx) = nullptr;
    mutable std::vector<cplx> up_, um_;
    mutable std::vector<double> sbuf_, cbuf_;
};

/// Absolute two-star state -> relative layout (x^+, x^-, Gamma).
inline std::vector<double> to_relative(const PhaseState& s) {
    require(s.star_count == 2, "to_relative: expected two stars");
    std::vector<double> y;
    const int n = s.n_leaves();
    y.reserve(2 * n + 1);
    for (double p : s.leaves[0]) y.push_back(wrap_2pi(p - s.hub[0]));
    for (double p : s.leaves[1]) y.push_back(wrap_2pi(p - s.hub[1]));
    y.push_back(s.hub[0] - s.hub[1]);
    return y;
}

// ---------------------------------------------------------------------------
// Oscillators on an arbitrary network (degrees as natural frequencies).
// ---------------------------------------------------------------------------

/// dphi_i/dt = k_i + sigma * sum_j A_ij sin(phi_j - phi_i + delta), with the
/// adjacency held in CSR form. Degree/adjacency consistency is checked once
/// at construction.
class NetworkRhs {
  public:
    NetworkRhs(std::vector<int> offsets, std::vector<int> neighbors, std::vector<int> degrees,
               double sigma, double delta)
        : off_(std::move(offsets)),
          adj_(std::move(neighbors)),
          deg_(std::move(degrees)),
          sigma_(sigma),
          delta_(delta) {
        require(off_.size() == deg_.size() + 1, "NetworkRhs: offsets/degrees size mismatch");
        for (std::size_t i = 0; i < deg_.size(); ++i)
            require(off_[i + 1] - off_[i] == deg_[i],
                    "NetworkRhs: degree inconsistent with adjacency row sum");
        u_.resize(deg_.size());
    }

    static NetworkRhs from_dense(const std::vector<int>& degrees,
                                 const std::vector<std::uint8_t>& adjacency, double sigma,
                                 double delta) {
        const std::size_t n = degrees.size();
        require(adjacency.size() == n * n, "NetworkRhs: adjacency must be n x n");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                require(adjacency[i * n + j] == adjacency[j * n + i],
                        "NetworkRhs: adjacency must be symmetric");
        std::vector<int> off(n + 1, 0), nb;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                if (adjacency[i * n + j]) nb.push_back(static_cast<int>(j));
            off[i + 1] = static_cast<int>(nb.size());
        }
        return NetworkRhs(std::move(off), std::move(nb), degrees, sigma, delta);
    }

    std::size_t dim() const { return deg_.size(); }
    double sigma() const { return sigma_; }

    void operator()(double, std::span<const double> y, std::span<double> dydt) const {
        const std::size_t n = dim();
        require(y.size() == n && dydt.size() == n, "NetworkRhs: state dimension mismatch");
        const double sd = std::sin(delta_), cd = std::cos(delta_);
        for (std::size_t i = 0; i < n; ++i) {
            double s, c;
            sin_cos(y[i], s, c);
            u_[i] = {c, s};
        }
        for (std::size_t i = 0; i < n; ++i) {
            cplx acc{0.0, 0.0};
            for (int k = off_[i]; k < off_[i + 1]; ++k)
                acc += u_[static_cast<std::size_t>(adj_[static_cast<std::size_t>(k)])];
            const cplx rel = acc * std::conj(u_[i]);  // sum_j e^{i(phi_j - phi_i)}
            dydt[i] = deg_[i] + sigma_ * (rel.imag() * cd + rel.real() * sd);
        }
    }

  private:
    std::vector<int> off_, adj_;
    std::vector<int> deg_;
    double sigma_, delta_;
    mutable std::vector<cplx> u_;
};

inline std::vector<double> rhs_complex_network(const std::vector<int>& degrees,
                                               const std::vector<std::uint8_t>& adjacency,
                                               double sigma, double delta,
                                               const std::vector<double>& phases) {
    auto rhs = NetworkRhs::from_dense(degrees, adjacency, sigma, delta);
    require(phases.size() == degrees.size(), "rhs_complex_network: state dimension mismatch");
    std::vector<double> d(phases.size());
    rhs(0.0, phases, d);
    return d;
}

// ---------------------------------------------------------------------------
// Order parameters.
// ---------------------------------------------------------------------------

/// z = (1/N) sum_j exp(i (phi_j - phi_0)) for the selected star (0 or 1).
inline OrderParameter order_parameter(const PhaseState& s, int star = 0) {
    require(star >= 0 && star < s.star_count, "order_parameter: invalid star selector");
    const auto& lv = s.leaves[static_cast<std::size_t>(star)];
    cplx z{0.0, 0.0};
    for (double p : lv) z += unit(p - s.hub[static_cast<std::size_t>(star)]);
    z /= static_cast<double>(lv.size());
    return OrderParameter::from(z);
}

/// Order parameter of a block of already-relative phases.
inline cplx order_parameter_relative(std::span<const double> relative_phases) {
    thread_local std::vector<double> sb, cb;
    const std::size_t n = relative_phases.size();
    if (sb.size() < n) {
        sb.resize(n);
        cb.resize(n);
    }
    fast_sincos_span(relative_phases.data(), sb.data(), cb.data(), n);
    double sr0 = 0, sr1 = 0, si0 = 0, si1 = 0;
    std::size_t i = 0;
    for (; i + 1 < n; i += 2) {
        sr0 += cb[i];
        sr1 += cb[i + 1];
        si0 += sb[i];
        si1 += sb[i + 1];
    }
    if (i < n) {
        sr0 += cb[i];
        si0 += sb[i];
    }
    return cplx{sr0 + sr1, si0 + si1} / static_cast<double>(n);
}

}  // namespace chimera::core
