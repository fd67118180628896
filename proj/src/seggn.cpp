#include <lieodom/seggn.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace lieodom::seggn {

using lie::GroupElement;
using lie::Tangent;

void LossWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0 || c1 < 0.0 || c2 < 0.0)
        throw std::invalid_argument("loss weights must be nonnegative");
    if (!(c1 + c2 > 0.0)) throw std::invalid_argument("c1 + c2 must be positive");
}

double rotation_loss(const Mat3& r1, const Mat3& r2, double alpha, double beta) {
    const double fro = 0.5 * (r1 - r2).squaredNorm();
    const double c = std::clamp(0.5 * ((r1.transpose() * r2).trace() - 1.0),
                                -1.0 + kGeodesicEps, 1.0 - kGeodesicEps);
    return alpha * fro + beta * std::acos(c);
}

double translation_loss(const Vec3& v1, const Vec3& p1, const Vec3& v2, const Vec3& p2) {
    return (v1 - v2).lpNorm<1>() + (p1 - p2).lpNorm<1>();
}

double total_loss(const GroupElement& e_hat, const GroupElement& label,
                  const LossWeights& weights) {
    return weights.c1 * rotation_loss(e_hat.R, label.R, weights.alpha, weights.beta)
        + weights.c2 * translation_loss(e_hat.v, e_hat.p, label.v, label.p);
}

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double loss_gradient(const Tangent& coeffs, const GroupElement& label,
                     const LossWeights& weights, Vec9* d_coeffs) {
    const GroupElement e = lie::exp_se23(coeffs);
    const double loss = total_loss(e, label, weights);
    if (d_coeffs == nullptr) return loss;

    // dL/dE, blockwise. The geodesic term differentiates through the clamp:
    // zero slope once the clamp saturates.
    const double c_raw = 0.5 * ((e.R.transpose() * label.R).trace() - 1.0);
    Mat3 g_rot = weights.alpha * (e.R - label.R);
    if (c_raw > -1.0 + kGeodesicEps && c_raw < 1.0 - kGeodesicEps)
        g_rot -= weights.beta * 0.5 / std::sqrt(1.0 - c_raw * c_raw) * label.R;
    g_rot *= weights.c1;

    const Vec3 g_vel = weights.c2
        * Vec3(sign_of(e.v.x() - label.v.x()), sign_of(e.v.y() - label.v.y()),
               sign_of(e.v.z() - label.v.z()));
    const Vec3 g_pos = weights.c2
        * Vec3(sign_of(e.p.x() - label.p.x()), sign_of(e.p.y() - label.p.y()),
               sign_of(e.p.z() - label.p.z()));

    Mat5 g_e = Mat5::Zero();
    g_e.block<3, 3>(0, 0) = g_rot;
    g_e.block<3, 1>(0, 3) = g_vel;
    g_e.block<3, 1>(0, 4) = g_pos;

    // Chain rule through exp: dL = <g_e, E hat(J_r d)> so
    // dL/dxi = J_r^T pi(E^T g_e) with pi the projection onto the algebra.
    const Mat5 m = e.matrix().transpose() * g_e;
    Vec9 pi;
    pi << m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1), m.block<3, 1>(0, 3),
        m.block<3, 1>(0, 4);
    *d_coeffs = lie::right_jacobian_se23(coeffs).transpose() * pi;
    return loss;
}

SeggnConfig SeggnConfig::tiny() {
    SeggnConfig c;
    c.widths = {16, 16, 32};
    return c;
}

SeggnConfig SeggnConfig::paper() {
    SeggnConfig c;
    c.widths = {128, 128, 128, 256, 256};
    return c;
}

void Normalization::apply(Eigen::Ref<Eigen::MatrixXd> features) const {
    if (mean.size() == 0) return;
    if (features.rows() != mean.size())
        throw ShapeMismatch("normalization fitted for a different feature count");
    features.colwise() -= mean;
    features.array().colwise() /= stddev.array();
}

SeggnModel::SeggnModel(const SeggnConfig& config) : config_(config) {
    if (config_.widths.empty()) throw ShapeMismatch("at least one hidden layer required");
    if (config_.window < 1 || config_.in_features < 1)
        throw ShapeMismatch("window and feature count must be positive");
    int in = config_.in_features;
    int dilation = 1;
    for (int width : config_.widths) {
        ConvLayer layer;
        layer.w_prev = Eigen::MatrixXd::Zero(width, in);
        layer.w_curr = Eigen::MatrixXd::Zero(width, in);
        layer.bias = Eigen::VectorXd::Zero(width);
        layer.dilation = dilation;
        layers_.push_back(std::move(layer));
        in = width;
        dilation *= 2;
    }
    head_w_ = Eigen::MatrixXd::Zero(kOutputs, in);
    head_b_ = Eigen::VectorXd::Zero(kOutputs);
    build_cone();
}

void SeggnModel::build_cone() {
    const int last = config_.window - 1;
    cone_.assign(layers_.size(), {});
    std::vector<int> need{last};
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        cone_[l] = need;
        std::vector<int> prev;
        for (int p : need) {
            prev.push_back(p);
            if (p - layers_[l].dilation >= 0) prev.push_back(p - layers_[l].dilation);
        }
        std::sort(prev.begin(), prev.end());
        prev.erase(std::unique(prev.begin(), prev.end()), prev.end());
        need = std::move(prev);
    }
    input_cone_ = need;
}

void SeggnModel::init_random(std::mt19937_64& rng) {
    auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto fill = [&](Eigen::MatrixXd& w) {
        const double bound = std::sqrt(1.0 / (2.0 * w.cols()));
        for (int i = 0; i < w.rows(); ++i)
            for (int j = 0; j < w.cols(); ++j) w(i, j) = bound * (2.0 * unit() - 1.0);
    };
    for (auto& layer : layers_) {
        fill(layer.w_prev);
        fill(layer.w_curr);
        layer.bias.setZero();
    }
    fill(head_w_);
    head_b_.setZero();
}

int SeggnModel::parameter_count() const {
    int n = static_cast<int>(head_w_.size() + head_b_.size());
    for (const auto& l : layers_)
        n += static_cast<int>(l.w_prev.size() + l.w_curr.size() + l.bias.size());
    return n;
}

/// Forward pass on the causal cone with caches for the backward pass.
struct WindowTape {
    const SeggnModel* model = nullptr;
    Eigen::MatrixXd input;                       // gathered, normalized input columns
    std::vector<Eigen::MatrixXd> activations;    // per layer, post ReLU (and dropout)
    std::vector<Eigen::MatrixXd> relu_mask;      // 1 where pre-activation > 0
    std::vector<Eigen::MatrixXd> dropout_mask;   // empty when not training
    Vec9 coeffs;

    void run(const SeggnModel& m, const Eigen::MatrixXd& window, bool training,
             double dropout_rate, std::mt19937_64* rng) {
        model = &m;
        if (window.rows() != m.config_.in_features || window.cols() != m.config_.window)
            throw ShapeMismatch("window must be " + std::to_string(m.config_.in_features)
                                + " x " + std::to_string(m.config_.window));
        const size_t n_layers = m.layers_.size();
        activations.assign(n_layers, {});
        relu_mask.assign(n_layers, {});
        dropout_mask.assign(n_layers, {});

        input.resize(window.rows(), m.input_cone_.size());
        for (size_t i = 0; i < m.input_cone_.size(); ++i)
            input.col(i) = window.col(m.input_cone_[i]);
        m.norm_.apply(input);

        const std::vector<int>* prev_pos = &m.input_cone_;
        const Eigen::MatrixXd* prev_act = &input;
        const double keep = 1.0 - dropout_rate;
        for (size_t l = 0; l < n_layers; ++l) {
            const ConvLayer& layer = m.layers_[l];
            const auto& pos = m.cone_[l];
            Eigen::MatrixXd z(layer.bias.size(), pos.size());
            for (size_t i = 0; i < pos.size(); ++i) {
                const int p = pos[i];
                const auto it = std::lower_bound(prev_pos->begin(), prev_pos->end(), p);
                z.col(i) = layer.bias + layer.w_curr * prev_act->col(it - prev_pos->begin());
                const int q = p - layer.dilation;
                if (q >= 0) {
                    const auto qt = std::lower_bound(prev_pos->begin(), prev_pos->end(), q);
                    z.col(i) += layer.w_prev * prev_act->col(qt - prev_pos->begin());
                }
            }
            relu_mask[l] = (z.array() > 0.0).cast<double>();
            Eigen::MatrixXd a = z.cwiseProduct(relu_mask[l]);
            if (training && dropout_rate > 0.0) {
                Eigen::MatrixXd mask(a.rows(), a.cols());
                for (int cc = 0; cc < mask.cols(); ++cc)
                    for (int rr = 0; rr < mask.rows(); ++rr) {
                        const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
                        mask(rr, cc) = (u < keep) ? 1.0 / keep : 0.0;
                    }
                dropout_mask[l] = mask;
                a = a.cwiseProduct(mask);
            }
            activations[l] = std::move(a);
            prev_pos = &m.cone_[l];
            prev_act = &activations[l];
        }
        coeffs = m.head_w_ * activations.back().rightCols<1>() + m.head_b_;
    }
};

Vec9 SeggnModel::forward_window(const Eigen::MatrixXd& window) const {
    WindowTape tape;
    tape.run(*this, window, false, 0.0, nullptr);
    return tape.coeffs;
}

std::pair<Vec9, GroupElement> SeggnModel::forward(const Eigen::MatrixXd& window) const {
    const Vec9 xi = forward_window(window);
    return {xi, lie::exp_se23(Tangent(xi))};
}

Eigen::MatrixXd SeggnModel::forward_sequence(const Eigen::MatrixXd& features) const {
    if (features.rows() != config_.in_features)
        throw ShapeMismatch("feature rows must equal the configured input count");
    const int t_len = static_cast<int>(features.cols());
    Eigen::MatrixXd x = features;
    norm_.apply(x);
    for (const auto& layer : layers_) {
        Eigen::MatrixXd z = layer.w_curr * x;
        z.colwise() += layer.bias;
        if (t_len > layer.dilation)
            z.rightCols(t_len - layer.dilation).noalias() +=
                layer.w_prev * x.leftCols(t_len - layer.dilation);
        x = z.cwiseMax(0.0);
    }
    Eigen::MatrixXd out = head_w_ * x;
    out.colwise() += head_b_;
    return out;
}

Gradients Gradients::zeros_like(const SeggnModel& model) {
    Gradients g;
    for (const auto& l : model.layers()) {
        ConvLayer z;
        z.w_prev = Eigen::MatrixXd::Zero(l.w_prev.rows(), l.w_prev.cols());
        z.w_curr = Eigen::MatrixXd::Zero(l.w_curr.rows(), l.w_curr.cols());
        z.bias = Eigen::VectorXd::Zero(l.bias.size());
        g.layers.push_back(std::move(z));
    }
    g.head_w = Eigen::MatrixXd::Zero(model.head_weight().rows(), model.head_weight().cols());
    g.head_b = Eigen::VectorXd::Zero(model.head_bias().size());
    return g;
}

void Gradients::add(const Gradients& other) {
    for (size_t l = 0; l < layers.size(); ++l) {
        layers[l].w_prev += other.layers[l].w_prev;
        layers[l].w_curr += other.layers[l].w_curr;
        layers[l].bias += other.layers[l].bias;
    }
    head_w += other.head_w;
    head_b += other.head_b;
}

void Gradients::scale(double s) {
    for (auto& l : layers) {
        l.w_prev *= s;
        l.w_curr *= s;
        l.bias *= s;
    }
    head_w *= s;
    head_b *= s;
}

double Gradients::squared_norm() const {
    double n = head_w.squaredNorm() + head_b.squaredNorm();
    for (const auto& l : layers)
        n += l.w_prev.squaredNorm() + l.w_curr.squaredNorm() + l.bias.squaredNorm();
    return n;
}

double backward(const SeggnModel& model, const Eigen::MatrixXd& window,
                const GroupElement& label, const LossWeights& weights, Gradients* grads,
                bool training, double dropout_rate, std::mt19937_64* rng) {
    WindowTape tape;
    tape.run(model, window, training, dropout_rate, rng);

    Vec9 d_coeffs;
    const double loss = loss_gradient(Tangent(tape.coeffs), label, weights, &d_coeffs);
    if (grads == nullptr) return loss;

    grads->head_w += d_coeffs * tape.activations.back().rightCols<1>().transpose();
    grads->head_b += d_coeffs;

    const auto& layers = model.layers();
    const int n_layers = static_cast<int>(layers.size());

    // Upstream gradient over the cone positions of the current layer.
    Eigen::MatrixXd g =
        Eigen::MatrixXd::Zero(tape.activations.back().rows(), tape.activations.back().cols());
    g.rightCols<1>() = model.head_weight().transpose() * d_coeffs;

    for (int l = n_layers - 1; l >= 0; --l) {
        const auto& pos = model_cone(model, l);
        const std::vector<int>& prev_pos =
            (l == 0) ? model_input_cone(model) : model_cone(model, l - 1);
        const Eigen::MatrixXd& prev_act = (l == 0) ? tape.input : tape.activations[l - 1];

        if (tape.dropout_mask[l].size() > 0) g = g.cwiseProduct(tape.dropout_mask[l]);
        g = g.cwiseProduct(tape.relu_mask[l]);

        grads->layers[l].bias += g.rowwise().sum();
        Eigen::MatrixXd g_prev = Eigen::MatrixXd::Zero(prev_act.rows(), prev_act.cols());
        for (size_t i = 0; i < pos.size(); ++i) {
            const int p = pos[i];
            const auto it = std::lower_bound(prev_pos.begin(), prev_pos.end(), p);
            const int j_curr = static_cast<int>(it - prev_pos.begin());
            grads->layers[l].w_curr += g.col(i) * prev_act.col(j_curr).transpose();
            g_prev.col(j_curr) += layers[l].w_curr.transpose() * g.col(i);
            const int q = p - layers[l].dilation;
            if (q >= 0) {
                const auto qt = std::lower_bound(prev_pos.begin(), prev_pos.end(), q);
                const int j_prev = static_cast<int>(qt - prev_pos.begin());
                grads->layers[l].w_prev += g.col(i) * prev_act.col(j_prev).transpose();
                g_prev.col(j_prev) += layers[l].w_prev.transpose() * g.col(i);
            }
        }
        g = std::move(g_prev);
    }
    return loss;
}

Eigen::MatrixXd WindowDataset::window_of(const Sample& s, int window) const {
    const Eigen::MatrixXd& seq = sequences.at(s.sequence);
    if (s.end_tick + 1 < window || s.end_tick >= seq.cols())
        throw ShapeMismatch("sample window out of range");
    return seq.middleCols(s.end_tick - window + 1, window);
}

Normalization fit_normalization(const WindowDataset& dataset) {
    if (dataset.sequences.empty()) throw EmptyDataset("no sequences to fit");
    const int rows = static_cast<int>(dataset.sequences.front().rows());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(rows);
    long count = 0;
    for (const auto& seq : dataset.sequences) {
        mean += seq.rowwise().sum();
        sq += seq.array().square().matrix().rowwise().sum();
        count += seq.cols();
    }
    mean /= static_cast<double>(count);
    Normalization norm;
    norm.mean = mean;
    norm.stddev = (sq / static_cast<double>(count) - mean.cwiseAbs2())
                      .cwiseMax(0.0)
                      .cwiseSqrt();
    for (int i = 0; i < rows; ++i)
        if (norm.stddev(i) < 1e-8) norm.stddev(i) = 1.0;
    return norm;
}

namespace {

struct AdamState {
    Gradients m, v;
    long t = 0;
};

void adam_step(SeggnModel& model, const Gradients& g, AdamState& state, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++state.t;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    auto update = [&](Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                      Eigen::MatrixXd& m, Eigen::MatrixXd& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseAbs2();
        param -= (lr * (m / corr1).array()
                  / ((v / corr2).array().sqrt() + eps))
                     .matrix();
    };
    for (size_t l = 0; l < model.layers().size(); ++l) {
        update(model.layers()[l].w_prev, g.layers[l].w_prev, state.m.layers[l].w_prev,
               state.v.layers[l].w_prev);
        update(model.layers()[l].w_curr, g.layers[l].w_curr, state.m.layers[l].w_curr,
               state.v.layers[l].w_curr);
        Eigen::MatrixXd gb = g.layers[l].bias;
        Eigen::MatrixXd mb = state.m.layers[l].bias, vb = state.v.layers[l].bias;
        update(model.layers()[l].bias, gb, mb, vb);
        state.m.layers[l].bias = mb;
        state.v.layers[l].bias = vb;
    }
    update(model.head_weight(), g.head_w, state.m.head_w, state.v.head_w);
    Eigen::MatrixXd gb = g.head_b;
    Eigen::MatrixXd mb = state.m.head_b, vb = state.v.head_b;
    update(model.head_bias(), gb, mb, vb);
    state.m.head_b = mb;
    state.v.head_b = vb;
}

}  // namespace

TrainHistory train(SeggnModel& model, const WindowDataset& dataset, const TrainConfig& config) {
    config.weights.validate();
    if (dataset.samples.empty()) throw EmptyDataset("training dataset has no samples");

    model.normalization() = fit_normalization(dataset);

    const int n = static_cast<int>(dataset.samples.size());
    int n_val = static_cast<int>(std::floor(config.val_fraction * n));
    n_val = std::clamp(n_val, 0, n - 1);
    const int n_train = n - n_val;

    const double dropout = config.dropout >= 0.0 ? config.dropout : model.config().dropout;
    std::mt19937_64 rng(config.seed);
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    AdamState adam;
    adam.m = Gradients::zeros_like(model);
    adam.v = Gradients::zeros_like(model);

    TrainHistory history;
    const int window = model.config().window;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with explicit draws so the shuffle is stdlib-independent.
        for (int i = n_train - 1; i > 0; --i) {
            const int j = static_cast<int>(rng() % static_cast<uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n_train; start += config.batch) {
            const int end = std::min(start + config.batch, n_train);
            Gradients grads = Gradients::zeros_like(model);
            double batch_loss = 0.0;
            for (int i = start; i < end; ++i) {
                const auto& sample = dataset.samples[order[i]];
                batch_loss += backward(model, dataset.window_of(sample, window), sample.label,
                                       config.weights, &grads, true, dropout, &rng);
            }
            const double inv = 1.0 / (end - start);
            grads.scale(inv);
            adam_step(model, grads, adam, config.learning_rate);
            epoch_loss += batch_loss * inv;
            ++batches;
        }
        history.train_loss.push_back(epoch_loss / std::max(1, batches));

        double val_loss = 0.0;
        for (int i = n_train; i < n; ++i) {
            const auto& sample = dataset.samples[i];
            const auto [xi, e_hat] = model.forward(dataset.window_of(sample, window));
            val_loss += total_loss(e_hat, sample.label, config.weights);
        }
        history.val_loss.push_back(n_val > 0 ? val_loss / n_val : 0.0);
    }
    return history;
}

namespace {

void write_u32(std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8)
        | (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64s(std::ofstream& out, const double* data, size_t count) {
    out.write(reinterpret_cast<const char*>(data), count * sizeof(double));
}

void read_f64s(std::ifstream& in, double* data, size_t count) {
    in.read(reinterpret_cast<char*>(data), count * sizeof(double));
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    // Row-major byte order, shape known from the manifest.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_f64s(out, rm.data(), static_cast<size_t>(rm.size()));
}

void read_matrix(std::ifstream& in, Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(m.rows(),
                                                                              m.cols());
    read_f64s(in, rm.data(), static_cast<size_t>(rm.size()));
    m = rm;
}

constexpr char kMagic[4] = {'S', 'G', 'N', '1'};
constexpr uint32_t kModelVersion = 1;

}  // namespace

void save_model(const std::string& path, const SeggnModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelFormatError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kModelVersion);
    write_u32(out, static_cast<uint32_t>(model.config().in_features));
    write_u32(out, static_cast<uint32_t>(model.config().window));
    const double dropout = model.config().dropout;
    write_f64s(out, &dropout, 1);
    write_u32(out, static_cast<uint32_t>(model.layers().size()));
    for (const auto& l : model.layers()) {
        write_u32(out, static_cast<uint32_t>(l.w_curr.rows()));
        write_u32(out, static_cast<uint32_t>(l.dilation));
    }
    const auto& norm = model.normalization();
    write_u32(out, static_cast<uint32_t>(norm.mean.size()));
    if (norm.mean.size() > 0) {
        write_f64s(out, norm.mean.data(), static_cast<size_t>(norm.mean.size()));
        write_f64s(out, norm.stddev.data(), static_cast<size_t>(norm.stddev.size()));
    }
    for (const auto& l : model.layers()) {
        write_matrix(out, l.w_prev);
        write_matrix(out, l.w_curr);
        write_matrix(out, l.bias);
    }
    write_matrix(out, model.head_weight());
    write_matrix(out, model.head_bias());
    if (!out) throw ModelFormatError("write failed: " + path);
}

SeggnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ModelFormatError("bad magic, not a model file: " + path);
    const uint32_t version = read_u32(in);
    if (version != kModelVersion)
        throw ModelFormatError("unsupported model version " + std::to_string(version));

    SeggnConfig config;
    config.in_features = static_cast<int>(read_u32(in));
    config.window = static_cast<int>(read_u32(in));
    read_f64s(in, &config.dropout, 1);
    const uint32_t n_layers = read_u32(in);
    if (n_layers == 0 || n_layers > 64) throw ModelFormatError("implausible layer count");
    std::vector<uint32_t> dilations;
    config.widths.clear();
    for (uint32_t l = 0; l < n_layers; ++l) {
        config.widths.push_back(static_cast<int>(read_u32(in)));
        dilations.push_back(read_u32(in));
    }
    SeggnModel model(config);
    for (uint32_t l = 0; l < n_layers; ++l)
        if (model.layers()[l].dilation != static_cast<int>(dilations[l]))
            throw ModelFormatError("dilation manifest mismatch");

    const uint32_t norm_size = read_u32(in);
    if (norm_size > 0) {
        if (norm_size != static_cast<uint32_t>(config.in_features))
            throw ModelFormatError("normalization size mismatch");
        model.normalization().mean.resize(norm_size);
        model.normalization().stddev.resize(norm_size);
        read_f64s(in, model.normalization().mean.data(), norm_size);
        read_f64s(in, model.normalization().stddev.data(), norm_size);
    }
    for (auto& l : model.layers()) {
        read_matrix(in, l.w_prev);
        read_matrix(in, l.w_curr);
        Eigen::MatrixXd b(l.bias.size(), 1);
        read_matrix(in, b);
        l.bias = b;
    }
    read_matrix(in, model.head_weight());
    Eigen::MatrixXd hb(model.head_bias().size(), 1);
    read_matrix(in, hb);
    model.head_bias() = hb;
    if (!in) throw ModelFormatError("truncated model file: " + path);
    return model;
}

Eigen::MatrixXd assemble_features(const simio::SensorSequence& sensors,
                                  const simio::Trajectory& estimates) {
    if (sensors.size() != estimates.size())
        throw ShapeMismatch("sensor and estimate streams must align");
    Eigen::MatrixXd f(kFeatureCount, sensors.size());
    for (size_t k = 0; k < sensors.size(); ++k) {
        const auto& s = sensors[k];
        int row = 0;
        f.block<3, 1>(row, k) = s.accel_meas;
        row += 3;
        f.block<3, 1>(row, k) = s.omega_meas;
        row += 3;
        f.block<12, 1>(row, k) = s.q;
        row += 12;
        f.block<12, 1>(row, k) = s.dq;
        row += 12;
        for (int leg = 0; leg < 4; ++leg, row += 3) f.block<3, 1>(row, k) = s.foot_pos[leg];
        for (int leg = 0; leg < 4; ++leg, row += 3) f.block<3, 1>(row, k) = s.foot_vel[leg];
        for (int leg = 0; leg < 4; ++leg, ++row) f(row, k) = s.contact[leg] ? 1.0 : 0.0;
        f.block<9, 1>(row, k) = lie::log_se23(estimates[k].X, 1e-6).vector();
    }
    return f;
}

WindowDataset make_window_dataset(const std::vector<simio::Dataset>& datasets,
                                  const pipeline::PipelineConfig& config, int stride,
                                  int window) {
    if (datasets.empty()) throw EmptyDataset("no datasets given");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");

    WindowDataset out;
    for (const auto& ds : datasets) {
        if (ds.truth.size() != ds.sensors.size())
            throw simio::DataError("dataset truth/sensor record counts differ");
        const pipeline::FilterRun run = pipeline::run_filter(ds, config);
        out.sequences.push_back(assemble_features(ds.sensors, run.estimate));
        const int seq = static_cast<int>(out.sequences.size()) - 1;
        const int t_len = static_cast<int>(ds.sensors.size());
        for (int t = window - 1; t < t_len; t += stride) {
            WindowDataset::Sample s;
            s.sequence = seq;
            s.end_tick = t;
            s.label = lie::compose(run.estimate[t].X, lie::inverse(ds.truth[t].X));
            out.samples.push_back(std::move(s));
        }
    }
    if (out.samples.empty()) throw EmptyDataset("sequences shorter than one window");
    return out;
}

GroupElement compensate(const GroupElement& x_plus, const GroupElement& e_hat) {
    return lie::compose(lie::inverse(e_hat), x_plus);
}

CompensatedRun run_compensated(const simio::Dataset& dataset,
                               const pipeline::PipelineConfig& config,
                               const SeggnModel& model) {
    const pipeline::FilterRun run = pipeline::run_filter(dataset, config);
    const Eigen::MatrixXd features = assemble_features(dataset.sensors, run.estimate);
    const Eigen::MatrixXd coeffs = model.forward_sequence(features);

    CompensatedRun out;
    out.raw = run.estimate;
    out.cov_trace = run.cov_trace;
    out.compensated = run.estimate;
    const int warmup = model.config().window - 1;
    for (int t = warmup; t < static_cast<int>(out.raw.size()); ++t) {
        const GroupElement e_hat = lie::exp_se23(Tangent(Vec9(coeffs.col(t))));
        out.compensated[t].X = compensate(out.raw[t].X, e_hat);
    }
    return out;
}

}  // namespace lieodom::seggn
