/**
 * @file sim.hpp
 * @brief Synthetic quadruped data generator: C2 ground-truth base trajectories
 *        on parametric terrains, a kinematic trot gait with per-leg analytic
 *        IK, and consistent noisy sensor streams (IMU, encoders, foot
 *        kinematics, contact flags, torque channels).
 *
 * Conventions: world z-up, gravity (0,0,-9.81); the base frame doubles as the
 * IMU frame. Accelerometer channels carry specific force (including the
 * gravity reaction). IMU samples in record k are taken at t_k - dt/2 so a
 * strapdown step over (t_{k-1}, t_k] sees midpoint values; kinematic channels
 * are sampled at t_k.
 */
#pragma once

#include <lieodom/inekf.hpp>
#include <lieodom/kinematics.hpp>
#include <lieodom/lie.hpp>
#include <lieodom/simio.hpp>

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace lieodom::sim {

struct UnreachableGait : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic Gaussian stream (explicit Box-Muller over mt19937_64 so the
/// byte stream is independent of the standard library).
class GaussianRng {
public:
    explicit GaussianRng(uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    Vec3 normal3() { return Vec3(normal(), normal(), normal()); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Natural cubic spline over strictly increasing knots.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> knots, std::vector<double> values);

    double value(double t) const;
    double derivative(double t) const;
    double second_derivative(double t) const;

private:
    int segment(double t) const;
    std::vector<double> t_, y_, m_;  // knots, values, second derivatives
};

struct TerrainProfile {
    enum class Kind { Flat, Stairs, Slope, Uneven, DiscreteObstacle, Composite };

    Kind kind = Kind::Flat;
    double step_height = 0.05;     // stairs [m]
    double step_run = 0.25;        // stairs [m]
    double slope = 0.12;           // [rad]
    double roughness = 0.02;       // uneven amplitude [m]
    double obstacle_height = 0.04;  // [m]
    double obstacle_spacing = 0.6;  // [m]
    double obstacle_width = 0.25;   // [m]
    double segment_length = 5.0;    // composite segment extent [m]
    uint64_t seed = 0;

    static TerrainProfile named(const std::string& name);

    double height(double x, double y) const;
    /// Unit surface normal (finite differences; terrains are piecewise smooth).
    Vec3 normal(double x, double y) const;
};

struct GaitConfig {
    double period = 0.5;        // gait cycle [s]
    double duty_factor = 0.55;  // stance fraction of the cycle
    double step_length = 0.10;  // body travel per cycle [m]
    double body_height = 0.27;  // hip height above terrain [m]
    double lift_height = 0.05;  // swing apex [m]
    double bob_amplitude = 0.004;   // vertical body oscillation [m]
    double sway_amplitude = 0.003;  // lateral body oscillation [m]
    double yaw_amplitude = 0.02;    // yaw oscillation [rad]
    double roll_amplitude = 0.01;   // roll oscillation [rad]
    double pitch_gain = 0.6;        // fraction of terrain slope mapped to pitch
    kin::RobotGeometry geometry;

    /// Trot phase offsets per leg (FL, FR, RL, RR).
    std::array<double, 4> phase_offset{0.0, 0.5, 0.5, 0.0};

    double speed() const { return step_length / period; }
    void validate() const;
};

struct SlipEvent {
    int foot = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    Vec3 velocity = Vec3::Zero();  // world frame, held constant over the event

    Vec3 displacement() const { return velocity * (t_end - t_start); }
};

struct SensorNoiseSpec {
    inekf::NoiseConfig awgn;  // white-noise densities (gyro/accel/encoders)
    Vec3 gyro_bias = Vec3::Zero();
    Vec3 accel_bias = Vec3::Zero();
    std::vector<SlipEvent> slip_events;
    uint64_t seed = 0;
};

struct ContactPhase {
    double t_on = 0.0;
    double t_off = 0.0;
    Vec3 anchor = Vec3::Zero();  // planned world foothold
};

struct BaseState {
    Mat3 R = Mat3::Identity();
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();           // world frame
    Vec3 omega_body = Vec3::Zero();  // body frame
    Vec3 accel_world = Vec3::Zero();
};

/// Ground-truth trajectory: analytic base motion plus a per-leg contact plan.
/// Evaluation is exact at any time within [0, duration].
class TruthTrajectory {
public:
    TruthTrajectory(const TerrainProfile& terrain, const GaitConfig& gait, double duration);

    double duration() const { return duration_; }
    const GaitConfig& gait() const { return gait_; }
    const TerrainProfile& terrain() const { return terrain_; }

    BaseState base_at(double t) const;
    lie::GroupElement state_at(double t) const;

    bool in_contact(int leg, double t) const;
    /// Stance phase progress in [0,1); -1 during swing.
    double stance_phase(int leg, double t) const;
    Vec3 foot_position(int leg, double t) const;  // world frame, no slip
    Vec3 foot_velocity(int leg, double t) const;

    const std::vector<ContactPhase>& phases(int leg) const { return plan_[leg]; }

    /// Last phase starting at or before t; fills `next` with the phase after.
    const ContactPhase* phase_at(int leg, double t, const ContactPhase** next) const;

private:
    TerrainProfile terrain_;
    GaitConfig gait_;
    double duration_ = 0.0;
    std::array<std::vector<ContactPhase>, 4> plan_;
    CubicSpline body_z_;   // terrain-following body height component
    CubicSpline pitch_;    // terrain-following pitch
};

/// Builds the ground-truth trajectory and contact schedule.
/// Throws UnreachableGait when the gait geometry cannot be realized.
TruthTrajectory generate_truth(const TerrainProfile& terrain, const GaitConfig& gait,
                               double duration);

/// Ground-truth pose table at the nominal rate (tick k at t = k/rate).
simio::Trajectory sample_truth(const TruthTrajectory& truth, double rate = simio::kNominalRate);

/// Noiseless sensor stream consistent with the truth (no slip).
simio::SensorSequence synthesize_clean(const TruthTrajectory& truth,
                                       double rate = simio::kNominalRate);

/// Rewrites the kinematic channels (q, dq, foot_pos, foot_vel) of a clean
/// stream so stance feet move with the event velocity while contact flags
/// stay true. The slip offset blends back to the planned foothold over the
/// following swing, keeping every channel continuous.
void inject_slip(simio::SensorSequence& stream, const TruthTrajectory& truth,
                 const std::vector<SlipEvent>& events);

/// Adds AWGN and constant biases; kinematic channels are re-derived from the
/// noisy encoders so all channels stay mutually consistent.
void add_sensor_noise(simio::SensorSequence& stream, const TruthTrajectory& truth,
                      const SensorNoiseSpec& spec);

/// Full pipeline: clean synthesis, slip injection, then sensor noise.
simio::SensorSequence synthesize_sensors(const TruthTrajectory& truth,
                                         const SensorNoiseSpec& spec,
                                         double rate = simio::kNominalRate);

/// One systematic slip event per stance whose anchor lies inside
/// [x_min, x_max]: the foot moves with `velocity` for `stance_fraction` of the
/// stance, magnitude jittered by +-jitter (seeded).
std::vector<SlipEvent> systematic_slip_events(const TruthTrajectory& truth, double x_min,
                                              double x_max, const Vec3& velocity,
                                              double stance_fraction, double jitter,
                                              uint64_t seed);

}  // namespace lieodom::sim
