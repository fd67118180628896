/**
 * @file simio.hpp
 * @brief Dataset record schema and file formats shared by all modules.
 *
 * Datasets are line-delimited JSON: one header object (schema version, seed,
 * rates, robot geometry, record counts) followed by one record per line.
 * Numbers round-trip 64-bit floats losslessly. Trajectory tables reuse the
 * same container with pose records only.
 */
#pragma once

#include <lieodom/kinematics.hpp>
#include <lieodom/lie.hpp>

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lieodom::simio {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kNominalRate = 500.0;  // Hz
inline constexpr double kNominalDt = 1.0 / kNominalRate;

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Vec4 = Eigen::Vector4d;

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaVersionMismatch : DataError {
    using DataError::DataError;
};
struct CorruptRecord : DataError {
    int line;
    CorruptRecord(int line_number, const std::string& what)
        : DataError("line " + std::to_string(line_number) + ": " + what), line(line_number) {}
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One proprioceptive sample at the nominal 500 Hz rate.
struct SensorRecord {
    double t = 0.0;                 // [s]
    Vec3 omega_meas = Vec3::Zero();  // gyro, body frame [rad/s]
    Vec3 accel_meas = Vec3::Zero();  // specific force, body frame [m/s^2]
    Vec12 q = Vec12::Zero();         // joint positions [rad]
    Vec12 dq = Vec12::Zero();        // joint velocities [rad/s]
    std::array<Vec3, 4> foot_pos{};  // base frame [m]
    std::array<Vec3, 4> foot_vel{};  // base frame [m/s]
    std::array<bool, 4> contact{};   // contact flags
    Vec4 normal_force = Vec4::Zero();      // [N]
    Vec12 tau = Vec12::Zero();             // joint torques [N m]
    Vec12 gravity_torque = Vec12::Zero();  // inverse-dynamics torque column [N m]

    bool allFinite() const;
};

struct TruthRecord {
    double t = 0.0;
    lie::GroupElement X;
};

struct DatasetMeta {
    int schema = kSchemaVersion;
    uint64_t seed = 0;
    double rate = kNominalRate;
    kin::RobotGeometry geometry;
    Vec3 gravity = Vec3(0.0, 0.0, -9.81);
    std::string frames = "world z-up; base frame = IMU frame";
    std::string terrain = "flat";
};

using SensorSequence = std::vector<SensorRecord>;
using Trajectory = std::vector<TruthRecord>;

void write_dataset(const std::string& path, const SensorSequence& sensors,
                   const Trajectory& truth, const DatasetMeta& meta);

struct Dataset {
    SensorSequence sensors;
    Trajectory truth;
    DatasetMeta meta;
};

Dataset read_dataset(const std::string& path);

/// Pose-only tables (estimates, ground truth extracts).
void write_trajectory(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory(const std::string& path);

/// Flat key=value configuration files ('#' starts a comment).
class KeyValues {
public:
    KeyValues() = default;
    static KeyValues load(const std::string& path);
    static KeyValues from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    /// Accepts either a scalar (broadcast) or "x,y,z".
    Vec3 get_vec3(const std::string& key, const Vec3& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace lieodom::simio
