#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace chimera {

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double pi = std::numbers::pi;

/// Reduce an angle to [0, 2*pi).
inline double wrap_2pi(double x) {
    double r = std::fmod(x, two_pi);
    return r < 0.0 ? r + two_pi : r;
}

/// Reduce an angle to (-pi, pi].
inline double wrap_pi(double x) {
    double r = std::remainder(x, two_pi);
    return r;
}

/// Smallest signed difference a - b on the circle, in (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_pi(a - b); }

inline std::complex<double> unit(double angle) {
    return {std::cos(angle), std::sin(angle)};
}

/// Contract-violation helper used by the domain types.
inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

/// Least-squares line fit y = a*x + b. Returns {a, b, rms residual}.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "fit_line: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    require(det != 0.0, "fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = y[i] - (f.slope * x[i] + f.intercept);
        ss += d * d;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

}  // namespace chimera
