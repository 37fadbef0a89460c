#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchnet/activations.hpp"
#include "branchnet/dataset.hpp"
#include "branchnet/losses.hpp"
#include "branchnet/numerics.hpp"

namespace branchnet {

struct LayerSpec {
    std::size_t neurons = 1;
    Activation activation;
};

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double momentum = 0.0;  // SGD
    double beta1 = 0.9;     // Adam
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static OptimizerConfig sgd(double momentum = 0.0) {
        OptimizerConfig c;
        c.kind = OptimizerKind::Sgd;
        c.momentum = momentum;
        return c;
    }
    static OptimizerConfig adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8) {
        OptimizerConfig c;
        c.kind = OptimizerKind::Adam;
        c.beta1 = beta1;
        c.beta2 = beta2;
        c.epsilon = epsilon;
        return c;
    }
};

struct EarlyStopping {
    std::size_t patience = 10;
    double min_delta = 0.0;
    double validation_fraction = 0.1;
};

/// FixedNormal draws every weight from N(0, stddev); ScaledNormal uses
/// N(0, sqrt(2/(fan_in+fan_out))) per layer. Biases start at zero.
enum class WeightInit { FixedNormal, ScaledNormal };

struct NetworkConfig {
    std::size_t input_dim = 1;
    std::vector<LayerSpec> layers;  // hidden + output
    Loss loss;
    OptimizerConfig optimizer;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::vector<double> learn_rate_schedule = {1e-3};  // each rate runs for `epochs` epochs
    std::optional<EarlyStopping> early_stopping;
    std::uint64_t seed = 0;
    WeightInit init = WeightInit::FixedNormal;
    double init_stddev = 0.05;
    bool standardize_features = true;

    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().neurons; }

    void validate() const {
        if (input_dim == 0) throw std::invalid_argument("NetworkConfig: input_dim must be >= 1");
        if (layers.empty()) throw std::invalid_argument("NetworkConfig: no layers");
        for (const auto& l : layers) {
            if (l.neurons == 0) throw std::invalid_argument("NetworkConfig: layer with 0 neurons");
            if (l.activation.kind == ActivationKind::ELU && l.activation.alpha <= 0.0)
                throw std::invalid_argument("NetworkConfig: ELU alpha must be positive");
        }
        if (batch_size == 0) throw std::invalid_argument("NetworkConfig: batch_size must be >= 1");
        if (epochs == 0) throw std::invalid_argument("NetworkConfig: epochs must be >= 1");
        if (learn_rate_schedule.empty())
            throw std::invalid_argument("NetworkConfig: learn_rate_schedule must be nonempty");
        for (double lr : learn_rate_schedule)
            if (!(lr > 0.0)) throw std::invalid_argument("NetworkConfig: learning rates must be positive");
        if (loss.kind == LossKind::Huber && loss.delta <= 0.0)
            throw std::invalid_argument("NetworkConfig: Huber delta must be positive");
        if (init == WeightInit::FixedNormal && init_stddev <= 0.0)
            throw std::invalid_argument("NetworkConfig: init_stddev must be positive");
        if (early_stopping) {
            if (early_stopping->patience == 0)
                throw std::invalid_argument("NetworkConfig: early stopping patience must be >= 1");
            if (early_stopping->validation_fraction <= 0.0 || early_stopping->validation_fraction >= 1.0)
                throw std::invalid_argument("NetworkConfig: validation_fraction must lie in (0,1)");
        }
    }
};

/// Per-feature z-score transform fitted on the training split. Empty means
/// identity (standardization disabled or hand-built model).
struct Standardizer {
    Vector mean;
    Vector stddev;

    bool active() const { return !mean.empty(); }

    static Standardizer fit(const Matrix& x, const std::vector<std::size_t>& rows) {
        Standardizer s;
        s.mean.assign(x.cols, 0.0);
        s.stddev.assign(x.cols, 0.0);
        const double n = static_cast<double>(rows.size());
        for (std::size_t r : rows)
            for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x(r, j);
        for (auto& m : s.mean) m /= n;
        for (std::size_t r : rows)
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double d = x(r, j) - s.mean[j];
                s.stddev[j] += d * d;
            }
        for (auto& v : s.stddev) {
            v = std::sqrt(v / n);
            if (v == 0.0) v = 1.0;  // constant feature passes through centered
        }
        return s;
    }

    void apply_in_place(Vector& x) const {
        if (!active()) return;
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / stddev[j];
    }
};

struct TrainedModel {
    NetworkConfig config;
    std::vector<Matrix> weights;  // W[l]: neurons(l) x neurons(l-1)
    std::vector<Vector> biases;   // b[l]: neurons(l)
    Standardizer standardizer;
    std::vector<double> loss_trace;           // mean per-sample training loss per epoch
    std::optional<std::size_t> stopped_epoch;  // 0-based global epoch early stopping fired at
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

namespace detail {

inline void check_model_dims(const TrainedModel& m) {
    const auto& cfg = m.config;
    if (m.weights.size() != cfg.layers.size() || m.biases.size() != cfg.layers.size())
        throw std::invalid_argument("model: layer count mismatch");
    std::size_t prev = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
        if (m.weights[l].rows != cfg.layers[l].neurons || m.weights[l].cols != prev)
            throw std::invalid_argument("model: weight shape mismatch at layer " + std::to_string(l));
        if (m.biases[l].size() != cfg.layers[l].neurons)
            throw std::invalid_argument("model: bias length mismatch at layer " + std::to_string(l));
        prev = cfg.layers[l].neurons;
    }
}

struct ForwardTrace {
    std::vector<Vector> pre;   // z per layer
    std::vector<Vector> post;  // activations; post[0] is the (standardized) input
};

inline void forward_trace(const TrainedModel& m, const Vector& x, ForwardTrace& t) {
    const std::size_t L = m.config.layers.size();
    t.pre.resize(L);
    t.post.resize(L + 1);
    t.post[0] = x;
    m.standardizer.apply_in_place(t.post[0]);
    for (std::size_t l = 0; l < L; ++l) {
        Vector z = matvec(m.weights[l], t.post[l]);
        const Vector& b = m.biases[l];
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += b[i];
        t.post[l + 1] = activate(m.config.layers[l].activation, z);
        t.pre[l] = std::move(z);
    }
}

inline bool fused_softmax_ce(const TrainedModel& m) {
    return m.config.layers.back().activation.kind == ActivationKind::Softmax &&
           m.config.loss.kind == LossKind::CrossEntropy;
}

/// Accumulates this sample's gradient into `acc`. Returns nothing; the
/// caller owns scaling by the batch size.
inline void backward_accumulate(const TrainedModel& m, const ForwardTrace& t, const Vector& y,
                                Gradients& acc) {
    const std::size_t L = m.config.layers.size();
    Vector delta;
    if (fused_softmax_ce(m)) {
        // d(CE(softmax(z)))/dz = p - t
        const Vector& p = t.post[L];
        delta.resize(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) delta[i] = p[i] - y[i];
    } else {
        if (m.config.layers.back().activation.kind == ActivationKind::Softmax)
            throw std::invalid_argument("backward: softmax output requires cross-entropy loss");
        delta = hadamard(loss_gradient(m.config.loss, y, t.post[L]),
                         derivative(m.config.layers.back().activation, t.pre[L - 1]));
    }
    for (std::size_t l = L; l-- > 0;) {
        Matrix& gw = acc.weights[l];
        Vector& gb = acc.biases[l];
        const Vector& h = t.post[l];
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const double d = delta[i];
            gb[i] += d;
            double* row = gw.data.data() + i * gw.cols;
            for (std::size_t j = 0; j < h.size(); ++j) row[j] += d * h[j];
        }
        if (l > 0) {
            const Matrix& w = m.weights[l];
            Vector up(w.cols, 0.0);  // W^T delta
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double d = delta[i];
                const double* row = w.data.data() + i * w.cols;
                for (std::size_t j = 0; j < w.cols; ++j) up[j] += row[j] * d;
            }
            delta = hadamard(up, derivative(m.config.layers[l - 1].activation, t.pre[l - 1]));
        }
    }
}

inline Gradients zero_gradients(const TrainedModel& m) {
    Gradients g;
    g.weights.reserve(m.weights.size());
    g.biases.reserve(m.biases.size());
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        g.weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
        g.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    return g;
}

}  // namespace detail

inline Vector forward(const TrainedModel& m, const Vector& x) {
    if (x.size() != m.config.input_dim)
        throw std::invalid_argument("forward: input length " + std::to_string(x.size()) +
                                    " != input_dim " + std::to_string(m.config.input_dim));
    detail::ForwardTrace t;
    detail::forward_trace(m, x, t);
    return t.post.back();
}

/// Gradient of the per-sample loss with respect to every weight and bias.
inline Gradients backward(const TrainedModel& m, const Vector& x, const Vector& y) {
    if (x.size() != m.config.input_dim)
        throw std::invalid_argument("backward: input length mismatch");
    if (y.size() != m.config.output_dim())
        throw std::invalid_argument("backward: target length mismatch");
    detail::ForwardTrace t;
    detail::forward_trace(m, x, t);
    Gradients g = detail::zero_gradients(m);
    detail::backward_accumulate(m, t, y, g);
    return g;
}

inline Matrix predict_batch(const TrainedModel& m, const Matrix& xs) {
    if (xs.rows > 0 && xs.cols != m.config.input_dim)
        throw std::invalid_argument("predict_batch: feature dim " + std::to_string(xs.cols) +
                                    " != input_dim " + std::to_string(m.config.input_dim));
    Matrix out(xs.rows, m.config.output_dim());
    detail::ForwardTrace t;
    for (std::size_t i = 0; i < xs.rows; ++i) {
        detail::forward_trace(m, xs.row_vector(i), t);
        const Vector& y = t.post.back();
        for (std::size_t j = 0; j < y.size(); ++j) out(i, j) = y[j];
    }
    return out;
}

struct EpochInfo {
    std::size_t epoch;         // global, 0-based
    std::size_t schedule_step;
    double train_loss;
    double validation_loss;    // NaN when no validation split
    const TrainedModel& model;
};

using EpochCallback = std::function<void(const EpochInfo&)>;

namespace detail {

struct OptimizerState {
    std::vector<Matrix> mw, vw;
    std::vector<Vector> mb, vb;
    std::size_t t = 0;

    void reset(const TrainedModel& m) {
        mw.clear(); vw.clear(); mb.clear(); vb.clear();
        t = 0;
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            mw.emplace_back(m.weights[l].rows, m.weights[l].cols);
            vw.emplace_back(m.weights[l].rows, m.weights[l].cols);
            mb.emplace_back(m.biases[l].size(), 0.0);
            vb.emplace_back(m.biases[l].size(), 0.0);
        }
    }
};

inline void apply_update(double& p, double g, double& m1, double& v1, double lr,
                         const OptimizerConfig& opt, std::size_t t) {
    if (opt.kind == OptimizerKind::Sgd) {
        m1 = opt.momentum * m1 + g;
        p -= lr * m1;
    } else {
        m1 = opt.beta1 * m1 + (1.0 - opt.beta1) * g;
        v1 = opt.beta2 * v1 + (1.0 - opt.beta2) * g * g;
        const double mhat = m1 / (1.0 - std::pow(opt.beta1, static_cast<double>(t)));
        const double vhat = v1 / (1.0 - std::pow(opt.beta2, static_cast<double>(t)));
        p -= lr * mhat / (std::sqrt(vhat) + opt.epsilon);
    }
}

inline double mean_loss(const TrainedModel& m, const Matrix& x, const Matrix& y,
                        const std::vector<std::size_t>& rows) {
    ForwardTrace t;
    double acc = 0.0;
    for (std::size_t r : rows) {
        forward_trace(m, x.row_vector(r), t);
        acc += loss_value(m.config.loss, y.row_vector(r), t.post.back());
    }
    return acc / static_cast<double>(rows.size());
}

}  // namespace detail

/// Mini-batch training over the full learn-rate schedule. Deterministic for
/// a fixed config: one Rng drives init, the validation split and every
/// shuffle. Optimizer state resets at each schedule step.
inline TrainedModel train(const NetworkConfig& config, const Dataset& data,
                          const EpochCallback& on_epoch = {}) {
    config.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (data.features.cols != config.input_dim)
        throw std::invalid_argument("train: feature dim " + std::to_string(data.features.cols) +
                                    " != input_dim " + std::to_string(config.input_dim));
    if (data.targets.cols != config.output_dim())
        throw std::invalid_argument("train: target dim " + std::to_string(data.targets.cols) +
                                    " != output layer size " + std::to_string(config.output_dim()));

    Rng rng(config.seed);
    TrainedModel model;
    model.config = config;

    std::size_t fan_in = config.input_dim;
    for (const auto& layer : config.layers) {
        const double sd = config.init == WeightInit::FixedNormal
                              ? config.init_stddev
                              : std::sqrt(2.0 / static_cast<double>(fan_in + layer.neurons));
        Matrix w(layer.neurons, fan_in);
        for (auto& v : w.data) v = rng.normal(0.0, sd);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(layer.neurons, 0.0);
        fan_in = layer.neurons;
    }

    // Validation split, if early stopping is on.
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> train_rows, val_rows;
    if (config.early_stopping) {
        std::vector<std::size_t> shuffled = order;
        rng.shuffle(shuffled);
        std::size_t n_val = static_cast<std::size_t>(
            std::llround(config.early_stopping->validation_fraction *
                         static_cast<double>(data.size())));
        n_val = std::min(n_val, data.size() - 1);
        if (n_val == 0) n_val = 1;
        val_rows.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_rows.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
        std::sort(val_rows.begin(), val_rows.end());
        std::sort(train_rows.begin(), train_rows.end());
    } else {
        train_rows = order;
    }

    if (config.standardize_features)
        model.standardizer = Standardizer::fit(data.features, train_rows);

    detail::OptimizerState opt;
    Gradients grad = detail::zero_gradients(model);
    detail::ForwardTrace trace;

    double best_val = HUGE_VAL;
    std::size_t stall = 0;
    std::size_t global_epoch = 0;
    bool stopped = false;

    for (std::size_t step = 0; step < config.learn_rate_schedule.size() && !stopped; ++step) {
        const double lr = config.learn_rate_schedule[step];
        opt.reset(model);
        for (std::size_t epoch = 0; epoch < config.epochs && !stopped; ++epoch, ++global_epoch) {
            rng.shuffle(train_rows);
            for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
                const std::size_t stop = std::min(start + config.batch_size, train_rows.size());
                // Shuffle decides membership; accumulation order stays canonical
                // so a full batch reproduces plain gradient descent exactly.
                std::sort(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                          train_rows.begin() + static_cast<std::ptrdiff_t>(stop));
                const double batch_n = static_cast<double>(stop - start);
                for (auto& m : grad.weights) std::fill(m.data.begin(), m.data.end(), 0.0);
                for (auto& b : grad.biases) std::fill(b.begin(), b.end(), 0.0);
                for (std::size_t k = start; k < stop; ++k) {
                    const std::size_t r = train_rows[k];
                    detail::forward_trace(model, data.features.row_vector(r), trace);
                    detail::backward_accumulate(model, trace, data.targets.row_vector(r), grad);
                }
                for (auto& m : grad.weights)
                    for (auto& v : m.data) v /= batch_n;
                for (auto& b : grad.biases)
                    for (auto& v : b) v /= batch_n;

                ++opt.t;
                for (std::size_t l = 0; l < model.weights.size(); ++l) {
                    auto& w = model.weights[l].data;
                    const auto& gw = grad.weights[l].data;
                    auto& mw = opt.mw[l].data;
                    auto& vw = opt.vw[l].data;
                    for (std::size_t i = 0; i < w.size(); ++i)
                        detail::apply_update(w[i], gw[i], mw[i], vw[i], lr, config.optimizer, opt.t);
                    auto& b = model.biases[l];
                    const auto& gb = grad.biases[l];
                    auto& mb = opt.mb[l];
                    auto& vb = opt.vb[l];
                    for (std::size_t i = 0; i < b.size(); ++i)
                        detail::apply_update(b[i], gb[i], mb[i], vb[i], lr, config.optimizer, opt.t);
                }
            }

            const double train_loss = detail::mean_loss(model, data.features, data.targets, train_rows);
            if (!std::isfinite(train_loss))
                throw std::runtime_error("train: non-finite training loss at epoch " +
                                         std::to_string(global_epoch));
            model.loss_trace.push_back(train_loss);

            double val_loss = std::numeric_limits<double>::quiet_NaN();
            if (config.early_stopping) {
                val_loss = detail::mean_loss(model, data.features, data.targets, val_rows);
                if (val_loss < best_val - config.early_stopping->min_delta) {
                    best_val = val_loss;
                    stall = 0;
                } else if (++stall >= config.early_stopping->patience) {
                    model.stopped_epoch = global_epoch;
                    stopped = true;
                }
            }
            if (on_epoch) on_epoch({global_epoch, step, train_loss, val_loss, model});
        }
    }
    return model;
}

}  // namespace branchnet
