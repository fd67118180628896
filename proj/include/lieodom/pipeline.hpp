/**
 * @file pipeline.hpp
 * @brief Wiring of the streaming estimation loop: sensor records through the
 *        contact source (schedule flags or the torque-based estimator) into
 *        the contact-aided filter.
 */
#pragma once

#include <lieodom/contact.hpp>
#include <lieodom/inekf.hpp>
#include <lieodom/kinematics.hpp>
#include <lieodom/simio.hpp>

#include <array>
#include <optional>
#include <vector>

namespace lieodom::pipeline {

enum class ContactSource {
    Flags,      // trust the dataset contact flags, zero contact covariance
    Estimator,  // torque-based probability estimator drives flags + covariance
};

struct PipelineConfig {
    inekf::NoiseConfig noise;
    inekf::FilterConfig filter;
    contact::ContactModelParams contact_params;
    ContactSource contact_source = ContactSource::Estimator;
    double initial_contact_cov = 0.0;  // extra variance on fresh contacts [m^2]
};

/// Streaming runner. Feed records in time order; the first record initializes
/// contacts without an update. Returns the updated base state per tick.
class EstimationPipeline {
public:
    EstimationPipeline(const PipelineConfig& config, const kin::RobotGeometry& geometry);

    void initialize(const lie::GroupElement& initial_state);
    lie::GroupElement feed(const simio::SensorRecord& record);

    const inekf::ContactFilter& filter() const { return filter_; }
    const std::array<bool, 4>& active_contacts() const { return active_; }

private:
    inekf::KinematicsMeasurement measure(const simio::SensorRecord& record, int foot) const;

    PipelineConfig config_;
    kin::RobotGeometry geometry_;
    inekf::ContactFilter filter_;
    contact::ContactEstimator contact_estimator_;
    std::array<bool, 4> active_{false, false, false, false};
    std::optional<double> last_t_;
};

struct FilterRun {
    simio::Trajectory estimate;         // updated base state per tick
    std::vector<double> cov_trace;      // tr(P) per tick
    std::vector<Eigen::MatrixXd> covariances;  // optional full P per tick
};

/// Batch runner over a dataset; the filter starts from the first truth pose.
/// keep_covariances stores P per tick (used by tests and diagnostics).
FilterRun run_filter(const simio::Dataset& dataset, const PipelineConfig& config,
                     bool keep_covariances = false);

}  // namespace lieodom::pipeline
