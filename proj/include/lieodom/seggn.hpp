/**
 * @file seggn.hpp
 * @brief Group-generation network: a causal dilated temporal-convolution
 *        backbone emits nine generator coefficients that are exponentially
 *        mapped to SE2(3), plus the composite rotation/translation loss, the
 *        hand-derived backward pass, an Adam trainer, and the compensation
 *        step applied to filter estimates.
 *
 * Backbone: kernel-size-2 causal convolutions, dilation 2^layer, ReLU, with
 * dropout on hidden activations during training. The affine head reads the
 * final time step, so outputs at tick t depend on ticks <= t only.
 */
#pragma once

#include <lieodom/lie.hpp>
#include <lieodom/pipeline.hpp>
#include <lieodom/simio.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lieodom::seggn {

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyDataset : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kFeatureCount = 67;  // see assemble_features
inline constexpr int kWindow = 50;        // ticks per window (0.1 s at 500 Hz)
inline constexpr int kOutputs = 9;

struct LossWeights {
    double alpha = 1.0;  // Frobenius share of the rotation loss
    double beta = 1.0;   // geodesic share of the rotation loss
    double c1 = 1.0;     // rotation weight in the total loss
    double c2 = 1.0;     // translation weight in the total loss

    void validate() const;
};

/// Clamp margin that keeps arccos differentiable at the boundary.
inline constexpr double kGeodesicEps = 1e-7;

double rotation_loss(const Mat3& r1, const Mat3& r2, double alpha, double beta);
double translation_loss(const Vec3& v1, const Vec3& p1, const Vec3& v2, const Vec3& p2);
double total_loss(const lie::GroupElement& e_hat, const lie::GroupElement& label,
                  const LossWeights& weights);

/// Gradient of total_loss with respect to the generator coefficients, chained
/// through exp_se23 via the closed-form right Jacobian. Returns the loss.
double loss_gradient(const lie::Tangent& coeffs, const lie::GroupElement& label,
                     const LossWeights& weights, Vec9* d_coeffs);

struct SeggnConfig {
    int in_features = kFeatureCount;
    int window = kWindow;
    std::vector<int> widths{16, 16, 32};
    double dropout = 0.5;  // training only

    static SeggnConfig tiny();
    static SeggnConfig paper();
};

struct ConvLayer {
    Eigen::MatrixXd w_prev;  // out x in, applied at t - dilation
    Eigen::MatrixXd w_curr;  // out x in, applied at t
    Eigen::VectorXd bias;
    int dilation = 1;
};

struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    void apply(Eigen::Ref<Eigen::MatrixXd> features) const;
};

struct Gradients;

class SeggnModel {
public:
    SeggnModel() = default;
    explicit SeggnModel(const SeggnConfig& config);

    /// Fan-in-scaled uniform weights, zero biases (head included, so the
    /// fresh model emits the identity element).
    void init_random(std::mt19937_64& rng);

    const SeggnConfig& config() const { return config_; }
    const std::vector<ConvLayer>& layers() const { return layers_; }
    std::vector<ConvLayer>& layers() { return layers_; }
    const Eigen::MatrixXd& head_weight() const { return head_w_; }
    Eigen::MatrixXd& head_weight() { return head_w_; }
    const Eigen::VectorXd& head_bias() const { return head_b_; }
    Eigen::VectorXd& head_bias() { return head_b_; }
    Normalization& normalization() { return norm_; }
    const Normalization& normalization() const { return norm_; }

    /// Generator coefficients for one window (in_features x window),
    /// inference mode (no dropout), evaluating only the causal cone that
    /// feeds the final time step.
    Vec9 forward_window(const Eigen::MatrixXd& window) const;

    /// Coefficients and the exponentially mapped group element.
    std::pair<Vec9, lie::GroupElement> forward(const Eigen::MatrixXd& window) const;

    /// Coefficients at every tick of a feature sequence (zero left padding).
    /// Column t equals forward_window on the window ending at t whenever at
    /// least window ticks of history exist (the receptive field is smaller
    /// than the window).
    Eigen::MatrixXd forward_sequence(const Eigen::MatrixXd& features) const;

    int parameter_count() const;

private:
    friend struct WindowTape;

    SeggnConfig config_;
    std::vector<ConvLayer> layers_;
    Eigen::MatrixXd head_w_;  // 9 x last width
    Eigen::VectorXd head_b_;
    Normalization norm_;
    // Causal-cone time positions per layer that feed the final output.
    std::vector<std::vector<int>> cone_;
    std::vector<int> input_cone_;

    void build_cone();
};

struct Gradients {
    std::vector<ConvLayer> layers;  // same shapes as the model, zero dilation
    Eigen::MatrixXd head_w;
    Eigen::VectorXd head_b;

    static Gradients zeros_like(const SeggnModel& model);
    void add(const Gradients& other);
    void scale(double s);
    double squared_norm() const;
};

/// Loss and parameter gradients for one window/label pair. Dropout masks are
/// drawn from `rng` at `dropout_rate` when training is true.
double backward(const SeggnModel& model, const Eigen::MatrixXd& window,
                const lie::GroupElement& label, const LossWeights& weights, Gradients* grads,
                bool training = false, double dropout_rate = 0.0,
                std::mt19937_64* rng = nullptr);

/// Windowed training set over one or more feature sequences; labels attach to
/// the final tick of each window.
struct WindowDataset {
    std::vector<Eigen::MatrixXd> sequences;  // in_features x T, unnormalized
    struct Sample {
        int sequence = 0;
        int end_tick = 0;
        lie::GroupElement label;
    };
    std::vector<Sample> samples;

    Eigen::MatrixXd window_of(const Sample& s, int window) const;
};

/// Per-feature z-score statistics over every tick of the dataset sequences.
Normalization fit_normalization(const WindowDataset& dataset);

struct TrainConfig {
    double learning_rate = 5e-4;  // Adam step size
    int batch = 32;
    int epochs = 60;
    uint64_t seed = 0;
    LossWeights weights;
    double dropout = -1.0;       // <0: use the model config value
    double val_fraction = 0.1;   // tail fraction of samples held for validation
};

struct TrainHistory {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;
};

/// Adam on the composite loss; deterministic given the seed. Fits the input
/// normalization from the dataset before the first step.
TrainHistory train(SeggnModel& model, const WindowDataset& dataset, const TrainConfig& config);

void save_model(const std::string& path, const SeggnModel& model);
SeggnModel load_model(const std::string& path);

/// Per-tick feature matrix (kFeatureCount x T): specific force (3), angular
/// rate (3), joint position (12), joint velocity (12), foot position (12),
/// foot velocity (12), contact flags (4), and the filter estimate encoded as
/// log_se23 (9).
Eigen::MatrixXd assemble_features(const simio::SensorSequence& sensors,
                                  const simio::Trajectory& estimates);

/// Builds windows/labels from datasets: runs the filter, assembles features,
/// and attaches labels estimate * inverse(truth) at each window end.
WindowDataset make_window_dataset(const std::vector<simio::Dataset>& datasets,
                                  const pipeline::PipelineConfig& config, int stride,
                                  int window = kWindow);

/// Error compensation: inverse(e_hat) * x_plus.
lie::GroupElement compensate(const lie::GroupElement& x_plus, const lie::GroupElement& e_hat);

struct CompensatedRun {
    simio::Trajectory raw;          // filter output
    simio::Trajectory compensated;  // error-compensated output
    std::vector<double> cov_trace;  // filter covariance trace (identical to raw run)
};

/// Runs the filter over the dataset, then applies the compensator at every
/// tick with a full window of history (earlier ticks pass through). The
/// filter never sees the compensated state; in streaming deployments the
/// compensated value for tick t becomes available one tick later.
CompensatedRun run_compensated(const simio::Dataset& dataset,
                               const pipeline::PipelineConfig& config, const SeggnModel& model);

}  // namespace lieodom::seggn
