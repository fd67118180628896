#include <lieodom/inekf.hpp>

#include <cmath>

namespace lieodom::inekf {

using lie::GroupElement;

void NoiseConfig::validate() const {
    if (sigma_g.minCoeff() < 0.0 || sigma_a.minCoeff() < 0.0 || sigma_v.minCoeff() < 0.0
        || sigma_q < 0.0)
        throw std::invalid_argument("noise densities must be nonnegative");
}

int AugmentedState::slot(int foot) const {
    int s = 0;
    for (const auto& [idx, pos] : contacts) {
        if (idx == foot) return s;
        ++s;
    }
    throw UnknownContact("foot " + std::to_string(foot) + " is not a registered contact");
}

Eigen::MatrixXd AugmentedState::matrix() const {
    const int n = num_contacts();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(5 + n, 5 + n);
    m.block<3, 3>(0, 0) = base.R;
    m.block<3, 1>(0, 3) = base.v;
    m.block<3, 1>(0, 4) = base.p;
    int col = 5;
    for (const auto& [foot, pos] : contacts) m.block<3, 1>(0, col++) = pos;
    return m;
}

Eigen::MatrixXd propagation_matrix(int num_contacts, double dt, const Vec3& gravity) {
    const int dim = 9 + 3 * num_contacts;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(dim, dim);
    const Mat3 gx = lie::hat3(gravity);
    phi.block<3, 3>(3, 0) = gx * dt;
    phi.block<3, 3>(6, 0) = 0.5 * dt * dt * gx;
    phi.block<3, 3>(6, 3) = dt * Mat3::Identity();
    return phi;
}

Eigen::MatrixXd adjoint_sekn(const AugmentedState& state) {
    const int n = state.num_contacts();
    const int dim = 9 + 3 * n;
    Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(dim, dim);
    ad.topLeftCorner<9, 9>() = lie::adjoint(state.base);
    int row = 9;
    for (const auto& [foot, pos] : state.contacts) {
        ad.block<3, 3>(row, 0) = lie::hat3(pos) * state.base.R;
        ad.block<3, 3>(row, row) = state.base.R;
        row += 3;
    }
    return ad;
}

namespace {

/// Left-multiplies the augmented state by exp(delta^).
void apply_left_correction(AugmentedState& state, const Eigen::VectorXd& delta) {
    const Vec3 dw = delta.segment<3>(0);
    const Mat3 rc = lie::exp_so3(dw);
    const Mat3 jl = lie::left_jacobian_so3(dw);
    const Vec3 vc = jl * delta.segment<3>(3);
    const Vec3 pc = jl * delta.segment<3>(6);

    state.base.v = rc * state.base.v + vc;
    state.base.p = rc * state.base.p + pc;
    state.base.R = rc * state.base.R;
    int i = 0;
    for (auto& [foot, pos] : state.contacts) {
        pos = rc * pos + jl * delta.segment<3>(9 + 3 * i);
        ++i;
    }
}

}  // namespace

ContactFilter::ContactFilter(const NoiseConfig& noise, const FilterConfig& config)
    : noise_(noise), config_(config) {
    noise_.validate();
    reset(GroupElement::Identity());
}

void ContactFilter::reset(const GroupElement& base) {
    state_.base = base;
    state_.contacts.clear();
    contact_frames_.clear();
    cov_ = Eigen::MatrixXd::Zero(9, 9);
    cov_.diagonal().segment<3>(0).setConstant(config_.init_cov_rot);
    cov_.diagonal().segment<3>(3).setConstant(config_.init_cov_vel);
    cov_.diagonal().segment<3>(6).setConstant(config_.init_cov_pos);
}

void ContactFilter::symmetrize() { cov_ = (0.5 * (cov_ + cov_.transpose())).eval(); }

void ContactFilter::predict(const Vec3& omega_meas, const Vec3& accel_meas, double dt) {
    if (!omega_meas.allFinite() || !accel_meas.allFinite() || !std::isfinite(dt))
        throw NonFiniteInput("IMU sample contains non-finite values");
    if (!(dt > 0.0 && dt <= config_.max_dt))
        throw NonFiniteInput("dt outside (0, " + std::to_string(config_.max_dt) + "]");

    const int n = state_.num_contacts();
    const int dim = 9 + 3 * n;

    // Continuous white-noise covariance in the (omega, vel, pos, contacts)
    // slots; slip noise is rotated through the contact-frame orientation.
    Eigen::MatrixXd noise_cov = Eigen::MatrixXd::Zero(dim, dim);
    noise_cov.block<3, 3>(0, 0) = noise_.sigma_g.cwiseAbs2().asDiagonal();
    noise_cov.block<3, 3>(3, 3) = noise_.sigma_a.cwiseAbs2().asDiagonal();
    int row = 9;
    for (const auto& [foot, pos] : state_.contacts) {
        const Mat3 r_fk = contact_frames_.at(foot);
        noise_cov.block<3, 3>(row, row) =
            r_fk * noise_.sigma_v.cwiseAbs2().asDiagonal() * r_fk.transpose();
        row += 3;
    }
    const Eigen::MatrixXd ad = adjoint_sekn(state_);
    const Eigen::MatrixXd q_bar = ad * noise_cov * ad.transpose();

    const Eigen::MatrixXd phi = propagation_matrix(n, dt, config_.gravity);
    cov_ = (phi * (cov_ + q_bar * dt) * phi.transpose()).eval();
    symmetrize();

    // Strapdown mean propagation; contact positions have zero-mean dynamics.
    const Mat3 r = state_.base.R;
    const Vec3 lin = r * accel_meas + config_.gravity;
    state_.base.p += state_.base.v * dt + 0.5 * dt * dt * lin;
    state_.base.v += lin * dt;
    state_.base.R = r * lie::exp_so3(omega_meas * dt);
}

void ContactFilter::update_contact(const KinematicsMeasurement& meas, double contact_cov) {
    if (!state_.has_contact(meas.foot))
        throw UnknownContact("foot " + std::to_string(meas.foot)
                             + " is not a registered contact");
    const int n = state_.num_contacts();
    const int dim = 9 + 3 * n;
    const int s = state_.slot(meas.foot);

    const Mat3 r = state_.base.R;
    const Vec3 innovation = r * meas.p_fk + state_.base.p - state_.contacts.at(meas.foot);

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, dim);
    h.block<3, 3>(0, 6) = -Mat3::Identity();
    h.block<3, 3>(0, 9 + 3 * s) = Mat3::Identity();

    const Mat3 joint_cov =
        (noise_.sigma_q * noise_.sigma_q) * (meas.J_p * meas.J_p.transpose());
    const Mat3 n_bar = r * joint_cov * r.transpose()
        + (contact_cov + config_.measurement_floor) * Mat3::Identity();

    const Mat3 innov_cov = h * cov_ * h.transpose() + n_bar;
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(innov_cov);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > config_.max_innovation_condition)
        throw SingularInnovation("innovation covariance is numerically singular");

    const Eigen::MatrixXd pht = cov_ * h.transpose();
    const Eigen::MatrixXd gain = pht * innov_cov.inverse();

    apply_left_correction(state_, gain * innovation);

    const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(dim, dim) - gain * h;
    cov_ = (ikh * cov_ * ikh.transpose() + gain * n_bar * gain.transpose()).eval();
    symmetrize();

    contact_frames_[meas.foot] = meas.R_fk;
}

void ContactFilter::add_contact(const KinematicsMeasurement& meas, double initial_cov) {
    if (state_.has_contact(meas.foot))
        throw DuplicateContact("foot " + std::to_string(meas.foot) + " already registered");

    const Mat3 r = state_.base.R;
    state_.contacts[meas.foot] = state_.base.p + r * meas.p_fk;
    contact_frames_[meas.foot] = meas.R_fk;

    const int s = state_.slot(meas.foot);
    const int old_dim = static_cast<int>(cov_.rows());
    const int at = 9 + 3 * s;

    // Splice three rows/columns at the foot's slot. The new block duplicates
    // the base-position uncertainty plus the kinematic initialization noise.
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(old_dim + 3, old_dim + 3);
    grown.topLeftCorner(at, at) = cov_.topLeftCorner(at, at);
    grown.topRightCorner(at, old_dim - at) = cov_.topRightCorner(at, old_dim - at);
    grown.bottomLeftCorner(old_dim - at, at) = cov_.bottomLeftCorner(old_dim - at, at);
    grown.bottomRightCorner(old_dim - at, old_dim - at) =
        cov_.bottomRightCorner(old_dim - at, old_dim - at);

    grown.block(at, 0, 3, at) = cov_.block(6, 0, 3, at);
    grown.block(at, at + 3, 3, old_dim - at) = cov_.block(6, at, 3, old_dim - at);
    grown.block(0, at, at, 3) = cov_.block(0, 6, at, 3);
    grown.block(at + 3, at, old_dim - at, 3) = cov_.block(at, 6, old_dim - at, 3);

    const Mat3 joint_cov =
        (noise_.sigma_q * noise_.sigma_q) * (meas.J_p * meas.J_p.transpose());
    grown.block<3, 3>(at, at) = cov_.block<3, 3>(6, 6) + r * joint_cov * r.transpose()
        + initial_cov * Mat3::Identity();

    cov_ = grown;
}

void ContactFilter::remove_contact(int foot) {
    if (!state_.has_contact(foot))
        throw UnknownContact("foot " + std::to_string(foot) + " is not a registered contact");
    const int s = state_.slot(foot);
    const int at = 9 + 3 * s;
    const int old_dim = static_cast<int>(cov_.rows());
    const int tail = old_dim - at - 3;

    Eigen::MatrixXd shrunk = Eigen::MatrixXd::Zero(old_dim - 3, old_dim - 3);
    shrunk.topLeftCorner(at, at) = cov_.topLeftCorner(at, at);
    shrunk.topRightCorner(at, tail) = cov_.topRightCorner(at, tail);
    shrunk.bottomLeftCorner(tail, at) = cov_.bottomLeftCorner(tail, at);
    shrunk.bottomRightCorner(tail, tail) = cov_.bottomRightCorner(tail, tail);

    cov_ = shrunk;
    state_.contacts.erase(foot);
    contact_frames_.erase(foot);
}

}  // namespace lieodom::inekf
