#pragma once

// Reference values computed without the library: bisection in long double,
// closed forms transcribed by hand.

#include <cmath>
#include <Eigen/Dense>

namespace oracle {

template <typename F>
long double bisect(F f, long double a, long double b, int iterations = 200) {
    long double fa = f(a);
    for (int i = 0; i < iterations; ++i) {
        const long double m = 0.5L * (a + b);
        const long double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5L * (a + b);
}

/// Root of x^3 - x = 0.643 on [1, 1.5].
inline double cubic_projector_x2() {
    return static_cast<double>(bisect([](long double x) { return x * x * x - x - 0.643L; }, 1.0L, 1.5L));
}

/// Root of (x - 0.7)(3x^2 - 1) = 1 on [1, 1.2].
inline double cubic_kernel_x2() {
    return static_cast<double>(
        bisect([](long double x) { return (x - 0.7L) * (3.0L * x * x - 1.0L) - 1.0L; }, 1.0L, 1.2L));
}

/// Cubic chart (x1 + x2^3 - x2, x1).
inline Eigen::Vector2d cubic_psi(double x1, double x2) { return {x1 + x2 * x2 * x2 - x2, x1}; }

/// Circuit chart, eta = (x, y, z).
inline Eigen::Vector3d circuit_psi(const Eigen::Vector3d& e) {
    const double x = e[0], y = e[1], z = e[2];
    return {-y * y / 2.0 + z, y + z, x - y * y - 2.0 * y};
}

/// psi^-1(xi1, 0, 0) for the circuit on the branch -1 < y < 1.
inline Eigen::Vector3d circuit_projection(double xi1) {
    const long double y = -1.0L + std::sqrt(1.0L - 2.0L * xi1);
    return {static_cast<double>(y * y + 2.0L * y), static_cast<double>(y), static_cast<double>(-y)};
}

/// Perturbed circuit field (f1, f2, f3), transcribed as printed.
inline Eigen::Vector3d circuit_perturbed_field(const Eigen::Vector3d& e, double eps) {
    const double x = e[0], y = e[1], z = e[2];
    const double f1 = -(-x + y * (2 + y) - 2 * eps * (y * y - 2 * z) - 2 * (y + z)) / eps;
    const double f2 = -(y + eps * y * y - 2 * eps * z + z) / (eps + eps * y);
    const double f3 = (eps * (y * y - 2 * z) - y * (y + z)) / (eps * (1 + y));
    return {f1, f2, f3};
}

/// First component rederived by hand from E_eps v = F: the third row of
/// Dpsi v = (F*, -xi2/eps, -xi3/eps) gives v1 = 2(1 + y) v2 - xi3/eps.
/// Equals minus the printed f1.
inline double circuit_perturbed_f1_derived(const Eigen::Vector3d& e, double eps) {
    const double x = e[0], y = e[1], z = e[2];
    return (-x + y * y - 2 * z - 2 * eps * (y * y - 2 * z)) / eps;
}

}  // namespace oracle
