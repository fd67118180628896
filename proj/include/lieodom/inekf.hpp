/**
 * @file inekf.hpp
 * @brief Contact-aided right-invariant extended Kalman filter on SE_{N+2}(3).
 *
 * The state augments the base (R, v, p) with one world-frame position column
 * per active contact. Covariance is the right-invariant error covariance with
 * tangent ordering (omega, vel, pos, contact_1, ..., contact_N).
 */
#pragma once

#include <lieodom/lie.hpp>

#include <map>
#include <stdexcept>
#include <vector>

namespace lieodom::inekf {

struct NonFiniteInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownContact : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DuplicateContact : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularInnovation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Continuous-time noise densities (per sqrt(Hz)) plus encoder noise.
struct NoiseConfig {
    Vec3 sigma_g = Vec3::Zero();  // gyro [rad/s/sqrt(Hz)]
    Vec3 sigma_a = Vec3::Zero();  // accelerometer [m/s^2/sqrt(Hz)]
    Vec3 sigma_v = Vec3::Zero();  // contact-velocity slip [m/s/sqrt(Hz)]
    double sigma_q = 0.0;         // joint encoders [rad]

    void validate() const;
};

/// Forward-kinematic contact measurement for one foot, base frame.
struct KinematicsMeasurement {
    Vec3 p_fk = Vec3::Zero();
    Mat3 R_fk = Mat3::Identity();
    Eigen::Matrix<double, 3, Eigen::Dynamic> J_p;  // 3 x m joint Jacobian
    int foot = 0;
};

/// Base state plus registered world contact positions, ordered by foot index.
struct AugmentedState {
    lie::GroupElement base;
    std::map<int, Vec3> contacts;

    int num_contacts() const { return static_cast<int>(contacts.size()); }
    bool has_contact(int foot) const { return contacts.count(foot) > 0; }
    /// Row/column slot of a foot inside the contact block (registration index
    /// in ascending foot order).
    int slot(int foot) const;

    /// Full (5+N)x(5+N) matrix view.
    Eigen::MatrixXd matrix() const;
};

struct FilterConfig {
    double init_cov_rot = 1e-2;  // [rad^2]
    double init_cov_vel = 1e-2;  // [(m/s)^2]
    double init_cov_pos = 1e-2;  // [m^2]
    double measurement_floor = 1e-12;  // isotropic floor added to every N [m^2]
    double max_innovation_condition = 1e12;
    double max_dt = 0.1;  // [s]
    Vec3 gravity = Vec3(0.0, 0.0, -9.81);
};

/// Closed-form state-transition matrix exp(A dt) for N contacts; exact since
/// the error dynamics matrix is nilpotent of index 3.
Eigen::MatrixXd propagation_matrix(int num_contacts, double dt, const Vec3& gravity);

/// Adjoint of the augmented state acting on the stacked tangent coordinates.
Eigen::MatrixXd adjoint_sekn(const AugmentedState& state);

class ContactFilter {
public:
    explicit ContactFilter(const NoiseConfig& noise = {}, const FilterConfig& config = {});

    /// Resets the base state; covariance restarts from the configured diagonal
    /// and all contacts are dropped.
    void reset(const lie::GroupElement& base);

    void predict(const Vec3& omega_meas, const Vec3& accel_meas, double dt);

    /// Contact-position pseudo-measurement for an already registered foot.
    /// contact_cov is the scalar covariance of the contact event, added
    /// isotropically to the kinematic measurement covariance.
    void update_contact(const KinematicsMeasurement& meas, double contact_cov);

    void add_contact(const KinematicsMeasurement& meas, double initial_cov);
    void remove_contact(int foot);

    lie::GroupElement extract_base() const { return state_.base; }
    const AugmentedState& state() const { return state_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const NoiseConfig& noise() const { return noise_; }
    const FilterConfig& config() const { return config_; }

private:
    void symmetrize();

    AugmentedState state_;
    Eigen::MatrixXd cov_;
    std::map<int, Mat3> contact_frames_;  // last kinematic orientation per foot
    NoiseConfig noise_;
    FilterConfig config_;
};

}  // namespace lieodom::inekf
