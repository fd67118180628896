#include <lieodom/kinematics.hpp>

#include <cmath>

namespace lieodom::kin {

namespace {

Mat3 rot_x(double a) {
    Mat3 r;
    r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return r;
}

Mat3 rot_y(double a) {
    Mat3 r;
    r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return r;
}

}  // namespace

Vec3 leg_forward_kinematics(const RobotGeometry& geom, int leg, const Vec3& q) {
    const double sigma = geom.side_sign(leg);
    const Vec3 abd(0.0, sigma * geom.abd_offset, 0.0);
    const Vec3 thigh(0.0, 0.0, -geom.thigh_length);
    const Vec3 calf(0.0, 0.0, -geom.calf_length);
    return geom.hip_position(leg)
        + rot_x(q(0)) * (abd + rot_y(q(1)) * (thigh + rot_y(q(2)) * calf));
}

Mat3 leg_jacobian(const RobotGeometry& geom, int leg, const Vec3& q) {
    const double sigma = geom.side_sign(leg);
    const Mat3 r1 = rot_x(q(0));
    const Vec3 hip = geom.hip_position(leg);
    const Vec3 knee = hip
        + r1 * (Vec3(0.0, sigma * geom.abd_offset, 0.0)
                + rot_y(q(1)) * Vec3(0.0, 0.0, -geom.thigh_length));
    const Vec3 foot = leg_forward_kinematics(geom, leg, q);

    // Revolute axes in the base frame: roll about x, both pitches about the
    // rolled y axis.
    const Vec3 ax_roll = Vec3::UnitX();
    const Vec3 ax_pitch = r1 * Vec3::UnitY();

    Mat3 j;
    j.col(0) = ax_roll.cross(foot - hip);
    j.col(1) = ax_pitch.cross(foot - hip);
    j.col(2) = ax_pitch.cross(foot - knee);
    return j;
}

Mat3 leg_orientation(int /*leg*/, const Vec3& q) { return rot_x(q(0)) * rot_y(q(1) + q(2)); }

Vec3 leg_inverse_kinematics(const RobotGeometry& geom, int leg, const Vec3& foot_base) {
    const double sigma = geom.side_sign(leg);
    const double d = sigma * geom.abd_offset;
    const Vec3 u = foot_base - geom.hip_position(leg);

    const double rho = std::hypot(u.y(), u.z());
    if (rho < std::abs(d) + 1e-9)
        throw IkFailure("foot target inside the hip-roll cylinder");
    const double q1 = std::atan2(u.z(), u.y()) + std::acos(std::clamp(d / rho, -1.0, 1.0));

    // Coordinates in the rolled leg plane.
    const Vec3 up = rot_x(-q1) * u;
    const double x = -up.x();
    const double z = -(up.z());
    if (z <= 0.0) throw IkFailure("foot target above the hip in the leg plane");

    const double l1 = geom.thigh_length;
    const double l2 = geom.calf_length;
    const double d2 = x * x + z * z;
    const double cos_knee = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if (cos_knee > 1.0 - 1e-9 || cos_knee < -1.0 + 1e-9)
        throw IkFailure("foot target outside the leg workspace");
    const double q3 = -std::acos(cos_knee);  // knee folds backward
    const double q2 =
        std::atan2(x, z) - std::atan2(l2 * std::sin(q3), l1 + l2 * std::cos(q3));

    Vec3 q(q1, q2, q3);
    // Wrap the roll branch into (-pi, pi].
    if (q(0) > M_PI) q(0) -= 2.0 * M_PI;
    if (q(0) <= -M_PI) q(0) += 2.0 * M_PI;
    return q;
}

}  // namespace lieodom::kin
