#include <lieodom/contact.hpp>

#include <cmath>

namespace lieodom::contact {

void ContactModelParams::validate() const {
    for (int f = 0; f < 4; ++f)
        if (!(beta1[f] > 0.0)) throw std::invalid_argument("beta1 must be positive");
    if (!(k >= 0.0)) throw std::invalid_argument("k must be nonnegative");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must be in (0,1)");
}

Vec3 estimate_contact_force(const Eigen::Matrix<double, 3, Eigen::Dynamic>& jacobian,
                            const Eigen::VectorXd& tau, const Eigen::VectorXd& gravity_torque) {
    if (tau.size() != jacobian.cols() || gravity_torque.size() != jacobian.cols())
        throw std::invalid_argument("torque dimension does not match the Jacobian");

    const Mat3 jjt = jacobian * jacobian.transpose();
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(jjt);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e8)
        throw SingularJacobian("contact Jacobian near a kinematic singularity");

    return -jjt.ldlt().solve(jacobian * (tau - gravity_torque));
}

double normal_force(const Vec3& f, const Vec3& n) {
    if (std::abs(n.norm() - 1.0) > 1e-6) throw BadNormal("surface normal must be unit length");
    return f.dot(n);
}

double contact_probability(double f_normal, const ContactModelParams& params, int foot) {
    return 1.0 / (1.0 + std::exp(-params.beta1.at(foot) * f_normal - params.beta0.at(foot)));
}

double contact_covariance(double f_normal, double f_normal_prev, double k) {
    const double df = f_normal - f_normal_prev;
    return k * df * df;
}

bool contact_state(double probability, double theta) { return probability >= theta; }

std::array<FootContactReading, 4> ContactEstimator::process(const simio::SensorRecord& record) {
    std::array<FootContactReading, 4> readings;
    for (int foot = 0; foot < 4; ++foot) {
        const Vec3 q_leg = record.q.segment<3>(3 * foot);
        const Mat3 jac = kin::leg_jacobian(geometry_, foot, q_leg);

        FootContactReading r;
        r.force = estimate_contact_force(jac, record.tau.segment<3>(3 * foot),
                                         record.gravity_torque.segment<3>(3 * foot));
        r.normal_force = normal_force(r.force, normal_);
        r.probability = contact_probability(r.normal_force, params_, foot);
        const double prev = prev_normal_force_[foot].value_or(r.normal_force);
        r.covariance = contact_covariance(r.normal_force, prev, params_.k);
        r.in_contact = contact_state(r.probability, params_.theta);
        prev_normal_force_[foot] = r.normal_force;
        readings[foot] = r;
    }
    return readings;
}

}  // namespace lieodom::contact
