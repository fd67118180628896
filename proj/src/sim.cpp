#include <lieodom/sim.hpp>

#include <algorithm>
#include <cmath>

namespace lieodom::sim {

using lie::GroupElement;

double GaussianRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

CubicSpline::CubicSpline(std::vector<double> knots, std::vector<double> values)
    : t_(std::move(knots)), y_(std::move(values)) {
    const size_t n = t_.size();
    if (n < 3 || y_.size() != n) throw std::invalid_argument("spline needs >= 3 knots");
    for (size_t i = 1; i < n; ++i)
        if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("spline knots must increase");

    // Natural boundary conditions; Thomas algorithm for the second derivatives.
    std::vector<double> a(n, 0.0), b(n, 2.0), c(n, 0.0), d(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
        const double h0 = t_[i] - t_[i - 1];
        const double h1 = t_[i + 1] - t_[i];
        a[i] = h0 / (h0 + h1);
        c[i] = h1 / (h0 + h1);
        d[i] = 6.0 / (h0 + h1)
            * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    std::vector<double> cp(n, 0.0), dp(n, 0.0);
    cp[0] = 0.0;
    dp[0] = 0.0;
    for (size_t i = 1; i < n; ++i) {
        const double denom = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    m_.assign(n, 0.0);
    for (size_t i = n - 1; i-- > 1;) m_[i] = dp[i] - cp[i] * m_[i + 1];
}

int CubicSpline::segment(double t) const {
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    int i = static_cast<int>(it - t_.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(t_.size()) - 2);
}

double CubicSpline::value(double t) const {
    const int i = segment(t);
    const double h = t_[i + 1] - t_[i];
    const double u = t - t_[i];
    const double w = t_[i + 1] - t;
    return m_[i] * w * w * w / (6.0 * h) + m_[i + 1] * u * u * u / (6.0 * h)
        + (y_[i] / h - m_[i] * h / 6.0) * w + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * u;
}

double CubicSpline::derivative(double t) const {
    const int i = segment(t);
    const double h = t_[i + 1] - t_[i];
    const double u = t - t_[i];
    const double w = t_[i + 1] - t;
    return -m_[i] * w * w / (2.0 * h) + m_[i + 1] * u * u / (2.0 * h)
        - (y_[i] / h - m_[i] * h / 6.0) + (y_[i + 1] / h - m_[i + 1] * h / 6.0);
}

double CubicSpline::second_derivative(double t) const {
    const int i = segment(t);
    const double h = t_[i + 1] - t_[i];
    return (m_[i] * (t_[i + 1] - t) + m_[i + 1] * (t - t_[i])) / h;
}

namespace {

// Quintic smoothstep: zero value/velocity/acceleration at both ends.
double smooth5(double s) { return s * s * s * (10.0 + s * (-15.0 + 6.0 * s)); }
double smooth5_dot(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }

// Swing lift profile (4 s (1-s))^3: zero value and first two derivatives at
// both ends, unit apex.
double lift_bump(double s) {
    const double b = 4.0 * s * (1.0 - s);
    return b * b * b;
}
double lift_bump_dot(double s) {
    const double b = 4.0 * s * (1.0 - s);
    return 3.0 * b * b * 4.0 * (1.0 - 2.0 * s);
}

Mat3 rot_z(double a) {
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return r;
}
Mat3 rot_y(double a) {
    Mat3 r;
    r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return r;
}
Mat3 rot_x(double a) {
    Mat3 r;
    r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return r;
}

double uneven_height(const TerrainProfile& t, double x, double y) {
    // Seeded smooth random field from a few fixed-frequency harmonics.
    std::mt19937_64 gen(t.seed ^ 0x9e3779b97f4a7c15ull);
    auto phase = [&gen]() {
        return 2.0 * M_PI * static_cast<double>(gen() >> 11) * 0x1.0p-53;
    };
    const double p1 = phase(), p2 = phase(), p3 = phase(), p4 = phase();
    return t.roughness
        * (std::sin(2.3 * x + p1) * std::cos(1.7 * y + p2)
           + 0.5 * std::sin(5.1 * x + p3) * std::cos(3.3 * y + p4));
}

}  // namespace

TerrainProfile TerrainProfile::named(const std::string& name) {
    TerrainProfile t;
    if (name == "flat")
        t.kind = Kind::Flat;
    else if (name == "stairs")
        t.kind = Kind::Stairs;
    else if (name == "slope")
        t.kind = Kind::Slope;
    else if (name == "uneven")
        t.kind = Kind::Uneven;
    else if (name == "obstacle")
        t.kind = Kind::DiscreteObstacle;
    else if (name == "composite")
        t.kind = Kind::Composite;
    else
        throw std::invalid_argument("unknown terrain '" + name + "'");
    return t;
}

double TerrainProfile::height(double x, double y) const {
    switch (kind) {
        case Kind::Flat:
            return 0.0;
        case Kind::Stairs:
            return x <= 0.0 ? 0.0 : step_height * std::floor(x / step_run);
        case Kind::Slope:
            return x <= 0.0 ? 0.0 : std::tan(slope) * x;
        case Kind::Uneven:
            return uneven_height(*this, x, y);
        case Kind::DiscreteObstacle: {
            if (x <= 0.0) return 0.0;
            const double u = x - obstacle_spacing * std::floor(x / obstacle_spacing);
            return u < obstacle_width ? obstacle_height : 0.0;
        }
        case Kind::Composite: {
            const double L = segment_length;
            TerrainProfile part = *this;
            if (x < 0.0) return 0.0;
            if (x < L) {
                part.kind = Kind::Stairs;
                return part.height(x, y);
            }
            const double stairs_top = step_height * std::floor(L / step_run);
            if (x < 2.0 * L) return stairs_top + std::tan(slope) * (x - L);
            const double slope_top = stairs_top + std::tan(slope) * L;
            if (x < 3.0 * L) return slope_top + uneven_height(*this, x, y);
            part.kind = Kind::DiscreteObstacle;
            if (x < 4.0 * L) return slope_top + part.height(x - 3.0 * L, y);
            return slope_top;
        }
    }
    return 0.0;
}

Vec3 TerrainProfile::normal(double x, double y) const {
    const double e = 0.01;
    double gx = (height(x + e, y) - height(x - e, y)) / (2.0 * e);
    double gy = (height(x, y + e) - height(x, y - e)) / (2.0 * e);
    gx = std::clamp(gx, -1.0, 1.0);
    gy = std::clamp(gy, -1.0, 1.0);
    return Vec3(-gx, -gy, 1.0).normalized();
}

void GaitConfig::validate() const {
    if (!(duty_factor > 0.0 && duty_factor < 1.0))
        throw UnreachableGait("duty factor must lie in (0,1)");
    if (!(period > 0.0)) throw UnreachableGait("gait period must be positive");
    const double max_reach = geometry.thigh_length + geometry.calf_length;
    if (!(body_height > 0.3 * max_reach && body_height < 0.97 * max_reach))
        throw UnreachableGait("body height outside the leg workspace");
    const double worst = std::hypot(0.75 * step_length, body_height) + lift_height * 0.0;
    if (worst > 0.98 * max_reach)
        throw UnreachableGait("step length exceeds kinematic reach at this body height");
}

TruthTrajectory::TruthTrajectory(const TerrainProfile& terrain, const GaitConfig& gait,
                                 double duration)
    : terrain_(terrain), gait_(gait), duration_(duration) {
    gait_.validate();
    const double T = gait_.period;
    const double speed = gait_.speed();

    // Smoothed terrain level under the body, sampled twice per gait cycle.
    auto level = [&](double x) {
        double acc = 0.0;
        for (double d : {-0.15, -0.075, 0.0, 0.075, 0.15}) acc += terrain_.height(x + d, 0.0);
        return acc / 5.0;
    };
    std::vector<double> knots, z_vals, pitch_vals;
    for (double t = -3.0 * T; t <= duration + 3.0 * T + 0.5 * T; t += 0.5 * T) {
        const double x = speed * t;
        knots.push_back(t);
        z_vals.push_back(level(x) + gait_.body_height);
        pitch_vals.push_back(-gait_.pitch_gain
                             * std::atan2(level(x + 0.2) - level(x - 0.2), 0.4));
    }
    body_z_ = CubicSpline(knots, z_vals);
    pitch_ = CubicSpline(knots, pitch_vals);

    // Per-leg contact plan: anchors put the foot under the leg plane at
    // mid-stance, snapped to the terrain.
    for (int leg = 0; leg < 4; ++leg) {
        const Vec3 shoulder = gait_.geometry.hip_position(leg)
            + Vec3(0.0, gait_.geometry.side_sign(leg) * gait_.geometry.abd_offset, 0.0);
        const int k_lo = -3;
        const int k_hi = static_cast<int>(std::ceil(duration / T)) + 2;
        for (int k = k_lo; k <= k_hi; ++k) {
            ContactPhase phase;
            phase.t_on = (k + gait_.phase_offset[leg]) * T;
            phase.t_off = phase.t_on + gait_.duty_factor * T;
            const double t_mid = 0.5 * (phase.t_on + phase.t_off);
            const BaseState mid = base_at(t_mid);
            const Vec3 hip_world = mid.p + mid.R * shoulder;
            phase.anchor = Vec3(hip_world.x(), hip_world.y(),
                                terrain_.height(hip_world.x(), hip_world.y()));
            plan_[leg].push_back(phase);
        }
    }
}

BaseState TruthTrajectory::base_at(double t) const {
    const double T = gait_.period;
    const double w1 = 2.0 * M_PI / T;
    const double speed = gait_.speed();

    const double x = speed * t;
    const double y = gait_.sway_amplitude * std::sin(w1 * t);
    const double z = body_z_.value(t) + gait_.bob_amplitude * std::sin(2.0 * w1 * t + 0.7);

    const double xd = speed;
    const double yd = gait_.sway_amplitude * w1 * std::cos(w1 * t);
    const double zd =
        body_z_.derivative(t) + gait_.bob_amplitude * 2.0 * w1 * std::cos(2.0 * w1 * t + 0.7);

    const double xdd = 0.0;
    const double ydd = -gait_.sway_amplitude * w1 * w1 * std::sin(w1 * t);
    const double zdd = body_z_.second_derivative(t)
        - gait_.bob_amplitude * 4.0 * w1 * w1 * std::sin(2.0 * w1 * t + 0.7);

    const double yaw = gait_.yaw_amplitude * std::sin(w1 * t + 2.1);
    const double yaw_d = gait_.yaw_amplitude * w1 * std::cos(w1 * t + 2.1);
    const double pitch = pitch_.value(t);
    const double pitch_d = pitch_.derivative(t);
    const double roll = gait_.roll_amplitude * std::sin(w1 * t + 1.3);
    const double roll_d = gait_.roll_amplitude * w1 * std::cos(w1 * t + 1.3);

    BaseState s;
    s.R = rot_z(yaw) * rot_y(pitch) * rot_x(roll);
    s.p = Vec3(x, y, z);
    s.v = Vec3(xd, yd, zd);
    s.accel_world = Vec3(xdd, ydd, zdd);

    // Body rates of the z-y-x Euler parametrization.
    const double cr = std::cos(roll), sr = std::sin(roll);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    s.omega_body = Vec3(roll_d - sp * yaw_d, cr * pitch_d + sr * cp * yaw_d,
                        -sr * pitch_d + cr * cp * yaw_d);
    return s;
}

GroupElement TruthTrajectory::state_at(double t) const {
    const BaseState s = base_at(t);
    return GroupElement(s.R, s.v, s.p);
}

const ContactPhase* TruthTrajectory::phase_at(int leg, double t,
                                              const ContactPhase** next) const {
    const auto& phases = plan_[leg];
    // First phase starting after t.
    auto it = std::upper_bound(phases.begin(), phases.end(), t,
                               [](double value, const ContactPhase& ph) {
                                   return value < ph.t_on;
                               });
    if (next) *next = (it != phases.end()) ? &*it : nullptr;
    if (it == phases.begin()) return nullptr;
    return &*(it - 1);
}

bool TruthTrajectory::in_contact(int leg, double t) const {
    const ContactPhase* ph = phase_at(leg, t, nullptr);
    return ph != nullptr && t >= ph->t_on && t < ph->t_off;
}

double TruthTrajectory::stance_phase(int leg, double t) const {
    const ContactPhase* ph = phase_at(leg, t, nullptr);
    if (ph == nullptr || t < ph->t_on || t >= ph->t_off) return -1.0;
    return (t - ph->t_on) / (ph->t_off - ph->t_on);
}

Vec3 TruthTrajectory::foot_position(int leg, double t) const {
    const ContactPhase* next = nullptr;
    const ContactPhase* ph = phase_at(leg, t, &next);
    if (ph == nullptr) return next != nullptr ? next->anchor : Vec3::Zero();
    if (t < ph->t_off) return ph->anchor;
    if (next == nullptr) return ph->anchor;
    // Swing from ph->anchor to next->anchor.
    const double s = (t - ph->t_off) / (next->t_on - ph->t_off);
    const double q = smooth5(s);
    Vec3 p = ph->anchor + q * (next->anchor - ph->anchor);
    p.z() += gait_.lift_height * lift_bump(s);
    return p;
}

Vec3 TruthTrajectory::foot_velocity(int leg, double t) const {
    const ContactPhase* next = nullptr;
    const ContactPhase* ph = phase_at(leg, t, &next);
    if (ph == nullptr || t < ph->t_off || next == nullptr) return Vec3::Zero();
    const double T_sw = next->t_on - ph->t_off;
    const double s = (t - ph->t_off) / T_sw;
    Vec3 v = smooth5_dot(s) / T_sw * (next->anchor - ph->anchor);
    v.z() += gait_.lift_height * lift_bump_dot(s) / T_sw;
    return v;
}

TruthTrajectory generate_truth(const TerrainProfile& terrain, const GaitConfig& gait,
                               double duration) {
    if (!(duration > 0.0) || duration * simio::kNominalRate > 1e7)
        throw std::invalid_argument("duration outside the supported range");
    TruthTrajectory truth(terrain, gait, duration);

    // Coarse workspace sweep; per-tick IK failures surface later as IkFailure.
    for (double t = 0.0; t <= duration; t += 0.02) {
        const BaseState base = truth.base_at(t);
        for (int leg = 0; leg < 4; ++leg) {
            const Vec3 target = base.R.transpose() * (truth.foot_position(leg, t) - base.p);
            try {
                (void)kin::leg_inverse_kinematics(gait.geometry, leg, target);
            } catch (const kin::IkFailure& e) {
                throw UnreachableGait("gait unreachable at t=" + std::to_string(t) + " leg "
                                      + std::to_string(leg) + ": " + e.what());
            }
        }
    }
    return truth;
}

simio::Trajectory sample_truth(const TruthTrajectory& truth, double rate) {
    const int n = static_cast<int>(std::llround(truth.duration() * rate));
    simio::Trajectory table;
    table.reserve(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = k / rate;
        table.push_back({t, truth.state_at(t)});
    }
    return table;
}

namespace {

struct FootOffset {
    Vec3 pos = Vec3::Zero();
    Vec3 vel = Vec3::Zero();
};

/// Slip displacement of a foot at time t plus its rate. During stance the
/// offset integrates the event velocities; over the following swing it blends
/// back to zero so the foot lands on the planned anchor.
FootOffset slip_offset(const TruthTrajectory& truth, const std::vector<SlipEvent>& events,
                       int leg, double t) {
    FootOffset out;
    if (events.empty()) return out;

    auto stance_offset = [&](const ContactPhase& ph, double at, Vec3* rate) -> Vec3 {
        Vec3 off = Vec3::Zero();
        if (rate) *rate = Vec3::Zero();
        for (const auto& e : events) {
            if (e.foot != leg) continue;
            const double t0 = std::max(e.t_start, ph.t_on);
            const double t1 = std::min(e.t_end, ph.t_off);
            if (t1 <= t0) continue;
            if (at <= t0) continue;
            off += e.velocity * (std::min(at, t1) - t0);
            if (rate && at > t0 && at < t1) *rate += e.velocity;
        }
        return off;
    };

    const ContactPhase* next = nullptr;
    const ContactPhase* ph = truth.phase_at(leg, t, &next);
    if (ph == nullptr) return out;
    if (t < ph->t_off) {
        out.pos = stance_offset(*ph, t, &out.vel);
        return out;
    }
    if (next == nullptr) return out;
    const Vec3 liftoff = stance_offset(*ph, ph->t_off, nullptr);
    if (liftoff.isZero(0.0)) return out;
    const double T_sw = next->t_on - ph->t_off;
    const double s = (t - ph->t_off) / T_sw;
    out.pos = liftoff * (1.0 - smooth5(s));
    out.vel = -liftoff * smooth5_dot(s) / T_sw;
    return out;
}

/// Fills the kinematic channels of one record from the truth plus optional
/// slip offsets for the flagged legs.
void fill_kinematics(simio::SensorRecord& rec, const TruthTrajectory& truth, double t,
                     const std::array<bool, 4>& recompute,
                     const std::vector<SlipEvent>& events) {
    const kin::RobotGeometry& geom = truth.gait().geometry;
    const BaseState base = truth.base_at(t);
    const Mat3 rt = base.R.transpose();
    const double m = geom.mass;

    for (int leg = 0; leg < 4; ++leg) {
        if (!recompute[leg]) continue;
        FootOffset off = slip_offset(truth, events, leg, t);
        const Vec3 foot_w = truth.foot_position(leg, t) + off.pos;
        const Vec3 foot_w_dot = truth.foot_velocity(leg, t) + off.vel;

        const Vec3 s = rt * (foot_w - base.p);
        const Vec3 q = kin::leg_inverse_kinematics(geom, leg, s);
        const Vec3 s_dot = -lie::hat3(base.omega_body) * s + rt * (foot_w_dot - base.v);
        const Mat3 jac = kin::leg_jacobian(geom, leg, q);
        const Vec3 dq = jac.partialPivLu().solve(s_dot);

        rec.q.segment<3>(3 * leg) = q;
        rec.dq.segment<3>(3 * leg) = dq;
        rec.foot_pos[leg] = kin::leg_forward_kinematics(geom, leg, q);
        rec.foot_vel[leg] = jac * dq;
        rec.contact[leg] = truth.in_contact(leg, t);

        // Synthetic force/torque channels consistent with the contact flags.
        const double phase = truth.stance_phase(leg, t);
        double fn = 0.0;
        Vec3 force = Vec3::Zero();
        if (phase >= 0.0) {
            fn = 0.5 * m * 9.81 * std::sin(M_PI * phase);
            force = fn * truth.terrain().normal(foot_w.x(), foot_w.y());
        }
        rec.normal_force(leg) = fn;
        const Eigen::Vector3d gravity_load = jac.transpose() * Vec3(0.0, 0.0, -3.0);
        rec.gravity_torque.segment<3>(3 * leg) = gravity_load;
        rec.tau.segment<3>(3 * leg) = gravity_load - jac.transpose() * (base.R.transpose() * force);
    }
}

}  // namespace

simio::SensorSequence synthesize_clean(const TruthTrajectory& truth, double rate) {
    const double dt = 1.0 / rate;
    const int n = static_cast<int>(std::llround(truth.duration() * rate));
    const Vec3 g(0.0, 0.0, -9.81);

    simio::SensorSequence stream;
    stream.reserve(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = k * dt;
        simio::SensorRecord rec;
        rec.t = t;
        const BaseState mid = truth.base_at(t - 0.5 * dt);
        rec.omega_meas = mid.omega_body;
        rec.accel_meas = mid.R.transpose() * (mid.accel_world - g);
        fill_kinematics(rec, truth, t, {true, true, true, true}, {});
        stream.push_back(std::move(rec));
    }
    return stream;
}

void inject_slip(simio::SensorSequence& stream, const TruthTrajectory& truth,
                 const std::vector<SlipEvent>& events) {
    if (events.empty()) return;
    std::array<bool, 4> affected{false, false, false, false};
    for (const auto& e : events) affected.at(e.foot) = true;
    for (auto& rec : stream) fill_kinematics(rec, truth, rec.t, affected, events);
}

void add_sensor_noise(simio::SensorSequence& stream, const TruthTrajectory& truth,
                      const SensorNoiseSpec& spec) {
    spec.awgn.validate();
    const kin::RobotGeometry& geom = truth.gait().geometry;
    GaussianRng rng(spec.seed);
    const double dt = stream.size() > 1 ? stream[1].t - stream[0].t : simio::kNominalDt;
    const double sqrt_rate = 1.0 / std::sqrt(dt);

    for (auto& rec : stream) {
        rec.omega_meas += spec.awgn.sigma_g.cwiseProduct(rng.normal3()) * sqrt_rate
            + spec.gyro_bias;
        rec.accel_meas += spec.awgn.sigma_a.cwiseProduct(rng.normal3()) * sqrt_rate
            + spec.accel_bias;
        for (int i = 0; i < 12; ++i) rec.q(i) += spec.awgn.sigma_q * rng.normal();
        // Differenced-encoder velocity noise.
        const double sigma_dq = spec.awgn.sigma_q * std::sqrt(2.0) / dt;
        for (int i = 0; i < 12; ++i) rec.dq(i) += sigma_dq * rng.normal();
        for (int leg = 0; leg < 4; ++leg) {
            const Vec3 q = rec.q.segment<3>(3 * leg);
            rec.foot_pos[leg] = kin::leg_forward_kinematics(geom, leg, q);
            rec.foot_vel[leg] = kin::leg_jacobian(geom, leg, q) * rec.dq.segment<3>(3 * leg);
        }
    }
}

simio::SensorSequence synthesize_sensors(const TruthTrajectory& truth,
                                         const SensorNoiseSpec& spec, double rate) {
    simio::SensorSequence stream = synthesize_clean(truth, rate);
    inject_slip(stream, truth, spec.slip_events);
    add_sensor_noise(stream, truth, spec);
    return stream;
}

std::vector<SlipEvent> systematic_slip_events(const TruthTrajectory& truth, double x_min,
                                              double x_max, const Vec3& velocity,
                                              double stance_fraction, double jitter,
                                              uint64_t seed) {
    GaussianRng rng(seed);
    std::vector<SlipEvent> events;
    for (int leg = 0; leg < 4; ++leg) {
        for (const auto& ph : truth.phases(leg)) {
            const double scale = 1.0 + jitter * rng.uniform(-1.0, 1.0);
            if (ph.anchor.x() < x_min || ph.anchor.x() > x_max) continue;
            if (ph.t_on < 0.0 || ph.t_off > truth.duration()) continue;
            const double span = ph.t_off - ph.t_on;
            SlipEvent e;
            e.foot = leg;
            e.t_start = ph.t_on + 0.15 * span;
            e.t_end = std::min(e.t_start + stance_fraction * span, ph.t_off - 0.05 * span);
            e.velocity = velocity * scale;
            if (e.t_end > e.t_start) events.push_back(e);
        }
    }
    return events;
}

}  // namespace lieodom::sim
