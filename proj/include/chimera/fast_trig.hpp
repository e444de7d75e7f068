#pragma once

#include <cmath>
#include <cstddef>

namespace chimera {

namespace detail {

// fdlibm-style kernels on [-pi/4, pi/4].
inline double sin_kernel(double t) {
    constexpr double S1 = -1.66666666666666324348e-01;
    constexpr double S2 = 8.33333333332248946124e-03;
    constexpr double S3 = -1.98412698298579493134e-04;
    constexpr double S4 = 2.75573137070700676789e-06;
    constexpr double S5 = -2.50507602534068634195e-08;
    constexpr double S6 = 1.58969099521155010221e-10;
    const double z = t * t;
    return t + t * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
}

inline double cos_kernel(double t) {
    constexpr double C1 = 4.16666666666666019037e-02;
    constexpr double C2 = -1.38888888888741095749e-03;
    constexpr double C3 = 2.48015872894767294178e-05;
    constexpr double C4 = -2.75573143513906633035e-07;
    constexpr double C5 = 2.08757232129817482790e-09;
    constexpr double C6 = -1.13596475577881948265e-11;
    const double z = t * t;
    return 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
}

}  // namespace detail

/// Simultaneous sin/cos, accurate to a few ulp for |x| up to ~1e6. Inlineable
/// and branch-free so the compiler can vectorize phase loops over it.
/// Quadrant reduction with a three-part pi/2 split keeps the argument exact
/// to ~1e-31 * |quotient|.
inline void fast_sincos(double x, double& s, double& c) {
    constexpr double two_over_pi = 0.63661977236758134308;
    constexpr double pio2_hi = 1.57079632679489655800e+00;
    constexpr double pio2_mid = 6.12323399573676603587e-17;
    constexpr double pio2_lo = -1.49738490485916102858e-33;
    constexpr double round_magic = 6755399441055744.0;  // 1.5 * 2^52

    const double qf = x * two_over_pi + round_magic - round_magic;
    const double t = ((x - qf * pio2_hi) - qf * pio2_mid) - qf * pio2_lo;
    const auto q = static_cast<long long>(qf);

    const double sk = detail::sin_kernel(t);
    const double ck = detail::cos_kernel(t);
    // Quadrant assembly without branches: swap for odd q, then flip signs.
    const bool swap = q & 1;
    const double s_pre = swap ? ck : sk;
    const double c_pre = swap ? sk : ck;
    const double sign_s = (q & 2) ? -1.0 : 1.0;
    const double sign_c = ((q + 1) & 2) ? -1.0 : 1.0;
    s = sign_s * s_pre;
    c = sign_c * c_pre;
}

/// Array form of fast_sincos; a single tight loop the compiler unrolls and
/// vectorizes with FMA where available.
inline void fast_sincos_span(const double* x, double* s, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) fast_sincos(x[i], s[i], c[i]);
}

}  // namespace chimera
