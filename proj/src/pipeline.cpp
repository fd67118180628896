#include <lieodom/pipeline.hpp>

namespace lieodom::pipeline {

using lie::GroupElement;

EstimationPipeline::EstimationPipeline(const PipelineConfig& config,
                                       const kin::RobotGeometry& geometry)
    : config_(config),
      geometry_(geometry),
      filter_(config.noise, config.filter),
      contact_estimator_(config.contact_params, geometry) {}

void EstimationPipeline::initialize(const GroupElement& initial_state) {
    filter_.reset(initial_state);
    contact_estimator_.reset();
    active_ = {false, false, false, false};
    last_t_.reset();
}

inekf::KinematicsMeasurement EstimationPipeline::measure(const simio::SensorRecord& record,
                                                         int foot) const {
    inekf::KinematicsMeasurement m;
    m.foot = foot;
    const Vec3 q = record.q.segment<3>(3 * foot);
    m.p_fk = kin::leg_forward_kinematics(geometry_, foot, q);
    m.R_fk = kin::leg_orientation(foot, q);
    m.J_p = kin::leg_jacobian(geometry_, foot, q);
    return m;
}

GroupElement EstimationPipeline::feed(const simio::SensorRecord& record) {
    if (last_t_) {
        const double dt = record.t - *last_t_;
        filter_.predict(record.omega_meas, record.accel_meas, dt);
    }
    last_t_ = record.t;

    std::array<bool, 4> flags{};
    std::array<double, 4> contact_cov{};
    if (config_.contact_source == ContactSource::Flags) {
        flags = record.contact;
        contact_cov = {0.0, 0.0, 0.0, 0.0};
    } else {
        const auto readings = contact_estimator_.process(record);
        for (int f = 0; f < 4; ++f) {
            flags[f] = readings[f].in_contact;
            contact_cov[f] = readings[f].covariance;
        }
    }

    // Sequential per-foot bookkeeping in fixed foot order.
    for (int foot = 0; foot < 4; ++foot) {
        const bool registered = filter_.state().has_contact(foot);
        if (flags[foot] && !registered) {
            filter_.add_contact(measure(record, foot), config_.initial_contact_cov);
        } else if (flags[foot] && registered) {
            filter_.update_contact(measure(record, foot), contact_cov[foot]);
        } else if (!flags[foot] && registered) {
            filter_.remove_contact(foot);
        }
    }
    active_ = flags;
    return filter_.extract_base();
}

FilterRun run_filter(const simio::Dataset& dataset, const PipelineConfig& config,
                     bool keep_covariances) {
    if (dataset.truth.empty() || dataset.sensors.empty())
        throw simio::DataError("dataset must contain sensor and truth records");

    EstimationPipeline pipe(config, dataset.meta.geometry);
    pipe.initialize(dataset.truth.front().X);

    FilterRun run;
    run.estimate.reserve(dataset.sensors.size());
    run.cov_trace.reserve(dataset.sensors.size());
    for (const auto& rec : dataset.sensors) {
        const GroupElement x = pipe.feed(rec);
        run.estimate.push_back({rec.t, x});
        run.cov_trace.push_back(pipe.filter().covariance().trace());
        if (keep_covariances) run.covariances.push_back(pipe.filter().covariance());
    }
    return run;
}

}  // namespace lieodom::pipeline
