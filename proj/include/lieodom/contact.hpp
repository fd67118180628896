/**
 * @file contact.hpp
 * @brief Per-foot contact force estimation from joint torques, logistic
 *        contact probabilities, measurement covariances and binary states.
 */
#pragma once

#include <lieodom/kinematics.hpp>
#include <lieodom/lie.hpp>
#include <lieodom/simio.hpp>

#include <array>
#include <optional>
#include <stdexcept>

namespace lieodom::contact {

struct SingularJacobian : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadNormal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContactModelParams {
    std::array<double, 4> beta0{-3.0, -3.0, -3.0, -3.0};  // logistic intercept
    std::array<double, 4> beta1{0.25, 0.25, 0.25, 0.25};  // logistic slope [1/N]
    double k = 1e-4;                                      // covariance gain [m^2 s^2 / N^2]
    double theta = 0.5;                                   // probability threshold

    void validate() const;
};

struct FootContactReading {
    Vec3 force = Vec3::Zero();  // estimated contact force [N]
    double normal_force = 0.0;  // [N]
    double probability = 0.0;
    double covariance = 0.0;  // scalar measurement covariance
    bool in_contact = false;
};

/// Least-squares contact force from the torque balance J^T f = -(tau - g),
/// i.e. f = -(J J^T)^-1 J (tau - g). Throws SingularJacobian when
/// cond(J J^T) exceeds 1e8.
Vec3 estimate_contact_force(const Eigen::Matrix<double, 3, Eigen::Dynamic>& jacobian,
                            const Eigen::VectorXd& tau, const Eigen::VectorXd& gravity_torque);

/// Component of f along the unit surface normal n.
double normal_force(const Vec3& f, const Vec3& n);

double contact_probability(double f_normal, const ContactModelParams& params, int foot);

double contact_covariance(double f_normal, double f_normal_prev, double k);

bool contact_state(double probability, double theta);

/// Streaming estimator: consumes one SensorRecord per tick and keeps the
/// per-foot previous normal force for the covariance differences.
class ContactEstimator {
public:
    ContactEstimator(const ContactModelParams& params, const kin::RobotGeometry& geometry,
                     const Vec3& surface_normal = Vec3::UnitZ())
        : params_(params), geometry_(geometry), normal_(surface_normal) {
        params_.validate();
    }

    std::array<FootContactReading, 4> process(const simio::SensorRecord& record);

    void reset() { prev_normal_force_ = {}; }

private:
    ContactModelParams params_;
    kin::RobotGeometry geometry_;
    Vec3 normal_;
    std::array<std::optional<double>, 4> prev_normal_force_{};
};

}  // namespace lieodom::contact
