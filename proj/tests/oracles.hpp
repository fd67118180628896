// Test-only reference implementations, independent of the library code paths
// they are used to check.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace oracles {

/// Matrix exponential by scaled-and-squared truncated power series.
template <typename Mat>
Mat series_exp(const Mat& a, int terms = 30) {
    const double norm = a.norm();
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }
    const Mat as = a * scale;
    Mat result = Mat::Identity(a.rows(), a.cols());
    Mat term = Mat::Identity(a.rows(), a.cols());
    for (int n = 1; n <= terms; ++n) {
        term = (term * as / static_cast<double>(n)).eval();
        result += term;
    }
    for (int s = 0; s < squarings; ++s) result = (result * result).eval();
    return result;
}

/// Left Jacobian by its defining series sum_n ad^n / (n+1)!.
template <typename Mat>
Mat series_left_jacobian(const Mat& ad, int terms = 40) {
    Mat result = Mat::Identity(ad.rows(), ad.cols());
    Mat term = Mat::Identity(ad.rows(), ad.cols());
    for (int n = 1; n <= terms; ++n) {
        term = (term * ad / static_cast<double>(n + 1)).eval();
        result += term;
    }
    return result;
}

/// Fixed-step RK4 integration of the matrix Riccati ODE
/// dP/dt = A P + P A^T + Q over [0, dt].
inline Eigen::MatrixXd rk4_riccati(const Eigen::MatrixXd& p0, const Eigen::MatrixXd& a,
                                   const Eigen::MatrixXd& q, double dt, int steps) {
    auto deriv = [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd {
        return a * p + p * a.transpose() + q;
    };
    Eigen::MatrixXd p = p0;
    const double h = dt / steps;
    for (int i = 0; i < steps; ++i) {
        const Eigen::MatrixXd k1 = deriv(p);
        const Eigen::MatrixXd k2 = deriv(p + 0.5 * h * k1);
        const Eigen::MatrixXd k3 = deriv(p + 0.5 * h * k2);
        const Eigen::MatrixXd k4 = deriv(p + h * k3);
        p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return p;
}

/// Deterministic test RNG helpers.
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(uint64_t seed) : gen(seed) {}

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    }

    Eigen::Vector3d vec3(double scale) {
        return Eigen::Vector3d(uniform(-scale, scale), uniform(-scale, scale),
                               uniform(-scale, scale));
    }

    /// Uniform direction, uniform norm in [0, max_norm].
    Eigen::Vector3d ball3(double max_norm) {
        Eigen::Vector3d v;
        do {
            v = vec3(1.0);
        } while (v.norm() < 1e-6 || v.norm() > 1.0);
        v.normalize();
        return uniform(0.0, max_norm) * v;
    }
};

}  // namespace oracles
