/**
 * @file kinematics.hpp
 * @brief Analytic 3-DoF leg kinematics (hip roll, hip pitch, knee pitch) for a
 *        point-foot quadruped. All quantities are expressed in the base frame.
 */
#pragma once

#include <lieodom/lie.hpp>

#include <stdexcept>

namespace lieodom::kin {

inline constexpr int kNumLegs = 4;
inline constexpr int kJointsPerLeg = 3;
inline constexpr int kNumJoints = kNumLegs * kJointsPerLeg;

struct IkFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Leg order: 0 front-left, 1 front-right, 2 rear-left, 3 rear-right.
struct RobotGeometry {
    double hip_x = 0.185;       // fore/aft hip offset from base center [m]
    double hip_y = 0.095;       // lateral hip offset [m]
    double abd_offset = 0.06;   // lateral offset from the hip-roll axis to the leg plane [m]
    double thigh_length = 0.2;  // [m]
    double calf_length = 0.2;   // [m]
    double mass = 12.0;         // body mass for the synthetic force channels [kg]

    double side_sign(int leg) const { return (leg % 2 == 0) ? 1.0 : -1.0; }

    Vec3 hip_position(int leg) const {
        const double fx = (leg < 2) ? hip_x : -hip_x;
        return Vec3(fx, side_sign(leg) * hip_y, 0.0);
    }
};

/// Foot position in the base frame for joint vector q = (roll, hip, knee).
Vec3 leg_forward_kinematics(const RobotGeometry& geom, int leg, const Vec3& q);

/// Geometric Jacobian d(foot position)/dq, base frame, 3x3.
Mat3 leg_jacobian(const RobotGeometry& geom, int leg, const Vec3& q);

/// Orientation of the foot (calf) frame in the base frame.
Mat3 leg_orientation(int leg, const Vec3& q);

/// Closed-form inverse of leg_forward_kinematics; throws IkFailure outside the
/// reachable workspace.
Vec3 leg_inverse_kinematics(const RobotGeometry& geom, int leg, const Vec3& foot_base);

}  // namespace lieodom::kin
