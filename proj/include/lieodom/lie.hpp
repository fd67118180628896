/**
 * @file lie.hpp
 * @brief SO(3) and SE2(3) primitives: generators, hat/vee, exp/log, group
 *        operations, adjoints and tangent-space Jacobians.
 *
 * SE2(3) elements are 5x5 matrices [R v p; 0 1 0; 0 0 1] packing rotation,
 * velocity and position. Tangent coordinates are ordered (omega, vel, pos).
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

namespace lieodom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

namespace lie {

struct NotInAlgebra : std::domain_error {
    using std::domain_error::domain_error;
};
struct NotARotation : std::domain_error {
    using std::domain_error::domain_error;
};
struct NotInGroup : std::domain_error {
    using std::domain_error::domain_error;
};

// Angle below which exp/log/Jacobian formulas switch to their Taylor branch.
inline constexpr double kSmallAngle = 1e-8;

// Tolerances of the rotation-block membership test.
inline constexpr double kRotationTol = 1e-9;

/// Tangent coordinates xi = (omega, vel, pos) of se2(3).
struct Tangent {
    Vec3 omega = Vec3::Zero();
    Vec3 vel = Vec3::Zero();
    Vec3 pos = Vec3::Zero();

    Tangent() = default;
    Tangent(const Vec3& w, const Vec3& v, const Vec3& p) : omega(w), vel(v), pos(p) {}
    explicit Tangent(const Vec9& xi)
        : omega(xi.segment<3>(0)), vel(xi.segment<3>(3)), pos(xi.segment<3>(6)) {}

    Vec9 vector() const {
        Vec9 xi;
        xi << omega, vel, pos;
        return xi;
    }

    bool allFinite() const { return omega.allFinite() && vel.allFinite() && pos.allFinite(); }
};

inline Mat3 hat3(const Vec3& w) {
    Mat3 m;
    m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return m;
}

inline Vec3 vee3(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

inline double rotation_orthonormality_error(const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).norm();
}

inline bool is_rotation(const Mat3& r, double tol = kRotationTol) {
    return r.allFinite() && rotation_orthonormality_error(r) <= tol
        && std::abs(r.determinant() - 1.0) <= tol;
}

/// Element of SE2(3). Blocks are stored separately so the affine rows of the
/// 5x5 view are canonical by construction.
struct GroupElement {
    Mat3 R = Mat3::Identity();
    Vec3 v = Vec3::Zero();
    Vec3 p = Vec3::Zero();

    GroupElement() = default;
    GroupElement(const Mat3& rot, const Vec3& vel, const Vec3& pos) : R(rot), v(vel), p(pos) {}

    static GroupElement Identity() { return GroupElement(); }

    Mat5 matrix() const {
        Mat5 m = Mat5::Identity();
        m.block<3, 3>(0, 0) = R;
        m.block<3, 1>(0, 3) = v;
        m.block<3, 1>(0, 4) = p;
        return m;
    }

    /// Reads the block layout back from a 5x5 matrix, validating membership.
    static GroupElement from_matrix(const Mat5& m, double tol = kRotationTol) {
        GroupElement x(m.block<3, 3>(0, 0), m.block<3, 1>(0, 3), m.block<3, 1>(0, 4));
        if (!x.valid(tol)) throw NotInGroup("matrix is not in SE2(3)");
        Mat5 affine = Mat5::Zero();
        affine.block<2, 2>(3, 3) = Eigen::Matrix2d::Identity();
        if ((m.bottomRows<2>() - affine.bottomRows<2>()).cwiseAbs().maxCoeff() != 0.0)
            throw NotInGroup("bottom rows are not the canonical affine rows");
        return x;
    }

    bool valid(double tol = kRotationTol) const {
        return v.allFinite() && p.allFinite() && is_rotation(R, tol);
    }
};

/// hat: R^9 -> se2(3), [omega^ v p; 0 0].
inline Mat5 hat(const Tangent& xi) {
    Mat5 m = Mat5::Zero();
    m.block<3, 3>(0, 0) = hat3(xi.omega);
    m.block<3, 1>(0, 3) = xi.vel;
    m.block<3, 1>(0, 4) = xi.pos;
    return m;
}

/// The nine basis matrices G_i with hat(xi) = sum_i xi_i G_i.
inline std::array<Mat5, 9> generators() {
    std::array<Mat5, 9> g;
    for (int i = 0; i < 9; ++i) {
        Vec9 e = Vec9::Zero();
        e(i) = 1.0;
        g[i] = hat(Tangent(e));
    }
    return g;
}

/// Inverse of hat. Rejects matrices outside the se2(3) sparsity pattern.
inline Tangent vee(const Mat5& m, double tol = 1e-12) {
    if (m.bottomRows<2>().cwiseAbs().maxCoeff() > tol)
        throw NotInAlgebra("bottom rows must vanish");
    const Mat3 a = m.block<3, 3>(0, 0);
    if ((a + a.transpose()).cwiseAbs().maxCoeff() > tol)
        throw NotInAlgebra("rotation block must be skew-symmetric");
    Tangent xi;
    xi.omega = vee3(a);
    xi.vel = m.block<3, 1>(0, 3);
    xi.pos = m.block<3, 1>(0, 4);
    return xi;
}

/// Rodrigues formula with a second-order Taylor branch below kSmallAngle.
inline Mat3 exp_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const Mat3 w = hat3(phi);
    if (theta2 < kSmallAngle * kSmallAngle)
        return Mat3::Identity() + w + 0.5 * (w * w);
    const double theta = std::sqrt(theta2);
    return Mat3::Identity() + (std::sin(theta) / theta) * w
        + ((1.0 - std::cos(theta)) / theta2) * (w * w);
}

/// Left Jacobian of SO(3): J_l(phi) = I + (1-cos)/t^2 phi^ + (t-sin)/t^3 phi^2.
inline Mat3 left_jacobian_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const Mat3 w = hat3(phi);
    if (theta2 < kSmallAngle * kSmallAngle)
        return Mat3::Identity() + 0.5 * w + (1.0 / 6.0) * (w * w);
    const double theta = std::sqrt(theta2);
    return Mat3::Identity() + ((1.0 - std::cos(theta)) / theta2) * w
        + ((theta - std::sin(theta)) / (theta2 * theta)) * (w * w);
}

inline Mat3 left_jacobian_inv_so3(const Vec3& phi) {
    const double theta2 = phi.squaredNorm();
    const Mat3 w = hat3(phi);
    if (theta2 < kSmallAngle * kSmallAngle)
        return Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * (w * w);
    const double theta = std::sqrt(theta2);
    const double c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    return Mat3::Identity() - 0.5 * w + c * (w * w);
}

/// Inverse of exp_so3; returned angle lies in [0, pi].
///
/// Near angle pi the standard formula divides by sin(theta), so the axis is
/// recovered from the largest diagonal of the symmetric part instead.
inline Vec3 log_so3(const Mat3& r, double tol = 1e-6) {
    if (!is_rotation(r, tol)) throw NotARotation("input fails SO(3) membership checks");
    const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    const Vec3 axis_raw = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (theta < kSmallAngle) {
        // log(R) ~ (R - R^T)/2 to second order.
        return axis_raw;
    }
    if (M_PI - theta > 1e-4) {
        return (theta / std::sin(theta)) * axis_raw;
    }
    // Largest-diagonal axis extraction: R + R^T = 2I + 2(1-cos) (kk^T - I).
    const Mat3 k_outer =
        Mat3::Identity() + (r + r.transpose() - 2.0 * Mat3::Identity()) / (2.0 * (1.0 - cos_theta));
    int imax = 0;
    k_outer.diagonal().maxCoeff(&imax);
    Vec3 axis = k_outer.col(imax) / std::sqrt(std::max(k_outer(imax, imax), 0.0));
    axis.normalize();
    // Keep the branch consistent with the off-diagonal skew part when it is
    // informative; at exactly pi the sign is a free convention.
    if (axis.dot(axis_raw) < 0.0) axis = -axis;
    return theta * axis;
}

/// exp: se2(3) -> SE2(3). Columns use the SO(3) left Jacobian.
inline GroupElement exp_se23(const Tangent& xi) {
    const Mat3 jl = left_jacobian_so3(xi.omega);
    return GroupElement(exp_so3(xi.omega), jl * xi.vel, jl * xi.pos);
}

/// Inverse of exp_se23 (rotation angle below pi).
inline Tangent log_se23(const GroupElement& x, double tol = kRotationTol) {
    if (!x.valid(tol)) throw NotInGroup("input fails SE2(3) membership checks");
    Tangent xi;
    xi.omega = log_so3(x.R, std::max(tol, 1e-6));
    const Mat3 jl_inv = left_jacobian_inv_so3(xi.omega);
    xi.vel = jl_inv * x.v;
    xi.pos = jl_inv * x.p;
    return xi;
}

inline GroupElement compose(const GroupElement& a, const GroupElement& b) {
    return GroupElement(a.R * b.R, a.R * b.v + a.v, a.R * b.p + a.p);
}

/// Closed-form inverse (R^T, -R^T v, -R^T p); no general matrix inversion.
inline GroupElement inverse(const GroupElement& a) {
    const Mat3 rt = a.R.transpose();
    return GroupElement(rt, -(rt * a.v), -(rt * a.p));
}

/// Adjoint of SE2(3) acting on (omega, vel, pos) coordinates.
inline Mat9 adjoint(const GroupElement& x) {
    Mat9 ad = Mat9::Zero();
    ad.block<3, 3>(0, 0) = x.R;
    ad.block<3, 3>(3, 3) = x.R;
    ad.block<3, 3>(6, 6) = x.R;
    ad.block<3, 3>(3, 0) = hat3(x.v) * x.R;
    ad.block<3, 3>(6, 0) = hat3(x.p) * x.R;
    return ad;
}

/// adjoint representation of the algebra: ad_xi zeta = [xi, zeta].
inline Mat9 ad_se23(const Tangent& xi) {
    Mat9 ad = Mat9::Zero();
    const Mat3 wx = hat3(xi.omega);
    ad.block<3, 3>(0, 0) = wx;
    ad.block<3, 3>(3, 3) = wx;
    ad.block<3, 3>(6, 6) = wx;
    ad.block<3, 3>(3, 0) = hat3(xi.vel);
    ad.block<3, 3>(6, 0) = hat3(xi.pos);
    return ad;
}

namespace detail {

/// Q block of the SE(3)-style left Jacobian for one translational column.
inline Mat3 jacobian_q_block(const Vec3& omega, const Vec3& rho) {
    const Mat3 wx = hat3(omega);
    const Mat3 rx = hat3(rho);
    const double theta2 = omega.squaredNorm();
    double a, b, c;
    if (theta2 < 1e-8) {
        a = 1.0 / 6.0 - theta2 / 120.0;
        b = 1.0 / 24.0 - theta2 / 720.0;
        c = 1.0 / 120.0 - theta2 / 2520.0;
    } else {
        const double theta = std::sqrt(theta2);
        const double s = std::sin(theta);
        const double co = std::cos(theta);
        const double t3 = theta2 * theta;
        const double t4 = theta2 * theta2;
        const double t5 = t4 * theta;
        a = (theta - s) / t3;
        b = (theta2 + 2.0 * co - 2.0) / (2.0 * t4);
        const double u = (1.0 - 0.5 * theta2 - co) / t4;
        const double w = (theta - s - t3 / 6.0) / t5;
        c = -0.5 * (u - 3.0 * w);
    }
    const Mat3 wrx = wx * rx;
    const Mat3 rwx = rx * wx;
    const Mat3 wrwx = wrx * wx;
    return 0.5 * rx + a * (wrx + rwx + wx * rwx) + b * (wx * wrx + rwx * wx - 3.0 * wrwx)
        + c * (wrwx * wx + wx * wrwx);
}

}  // namespace detail

/// Left Jacobian of SE2(3): exp(xi + d) ~ exp((J_l d)^) exp(xi).
inline Mat9 left_jacobian_se23(const Tangent& xi) {
    Mat9 j = Mat9::Zero();
    const Mat3 jl = left_jacobian_so3(xi.omega);
    j.block<3, 3>(0, 0) = jl;
    j.block<3, 3>(3, 3) = jl;
    j.block<3, 3>(6, 6) = jl;
    j.block<3, 3>(3, 0) = detail::jacobian_q_block(xi.omega, xi.vel);
    j.block<3, 3>(6, 0) = detail::jacobian_q_block(xi.omega, xi.pos);
    return j;
}

/// Right Jacobian: exp(xi + d) ~ exp(xi) exp((J_r d)^).
inline Mat9 right_jacobian_se23(const Tangent& xi) {
    return left_jacobian_se23(Tangent(-xi.omega, -xi.vel, -xi.pos));
}

}  // namespace lie
}  // namespace lieodom
