#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "branchnet/network.hpp"

namespace branchnet {

using json = nlohmann::ordered_json;

inline json to_json(const Activation& a) {
    json j{{"kind", to_string(a.kind)}};
    if (a.kind == ActivationKind::ELU) j["alpha"] = a.alpha;
    return j;
}

inline Activation activation_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "sigmoid") return Activation::sigmoid();
    if (kind == "tanh") return Activation::tanh();
    if (kind == "relu") return Activation::relu();
    if (kind == "elu") return Activation::elu(j.value("alpha", 1.0));
    if (kind == "softmax") return Activation::softmax();
    if (kind == "identity") return Activation::identity();
    throw std::runtime_error("unknown activation kind '" + kind + "'");
}

inline json to_json(const Loss& l) {
    json j{{"kind", to_string(l.kind)}};
    if (l.kind == LossKind::Huber) j["delta"] = l.delta;
    return j;
}

inline Loss loss_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "mse") return Loss::mse();
    if (kind == "mae") return Loss::mae();
    if (kind == "huber") return Loss::huber(j.value("delta", 1.0));
    if (kind == "logcosh") return Loss::log_cosh();
    if (kind == "cross_entropy") return Loss::cross_entropy();
    throw std::runtime_error("unknown loss kind '" + kind + "'");
}

inline json to_json(const OptimizerConfig& o) {
    if (o.kind == OptimizerKind::Sgd)
        return json{{"kind", "sgd"}, {"momentum", o.momentum}};
    return json{{"kind", "adam"}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"epsilon", o.epsilon}};
}

inline OptimizerConfig optimizer_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "sgd") return OptimizerConfig::sgd(j.value("momentum", 0.0));
    if (kind == "adam")
        return OptimizerConfig::adam(j.value("beta1", 0.9), j.value("beta2", 0.999),
                                     j.value("epsilon", 1e-8));
    throw std::runtime_error("unknown optimizer kind '" + kind + "'");
}

inline json to_json(const NetworkConfig& c) {
    json layers = json::array();
    for (const auto& l : c.layers)
        layers.push_back(json{{"neurons", l.neurons}, {"activation", to_json(l.activation)}});
    json j{{"input_dim", c.input_dim},
           {"layers", layers},
           {"loss", to_json(c.loss)},
           {"optimizer", to_json(c.optimizer)},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"learn_rate_schedule", c.learn_rate_schedule},
           {"seed", c.seed},
           {"init", c.init == WeightInit::FixedNormal ? "fixed_normal" : "scaled_normal"},
           {"init_stddev", c.init_stddev},
           {"standardize_features", c.standardize_features}};
    if (c.early_stopping) {
        j["early_stopping"] = json{{"patience", c.early_stopping->patience},
                                   {"min_delta", c.early_stopping->min_delta},
                                   {"validation_fraction", c.early_stopping->validation_fraction}};
    }
    return j;
}

inline NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    c.input_dim = j.at("input_dim");
    c.layers.clear();
    for (const auto& lj : j.at("layers"))
        c.layers.push_back({lj.at("neurons"), activation_from_json(lj.at("activation"))});
    c.loss = loss_from_json(j.at("loss"));
    c.optimizer = optimizer_from_json(j.at("optimizer"));
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.learn_rate_schedule = j.at("learn_rate_schedule").get<std::vector<double>>();
    c.seed = j.at("seed");
    const std::string init = j.value("init", "fixed_normal");
    c.init = init == "scaled_normal" ? WeightInit::ScaledNormal : WeightInit::FixedNormal;
    c.init_stddev = j.value("init_stddev", 0.05);
    c.standardize_features = j.value("standardize_features", true);
    if (j.contains("early_stopping")) {
        const auto& e = j.at("early_stopping");
        c.early_stopping = EarlyStopping{e.at("patience"), e.at("min_delta"),
                                         e.at("validation_fraction")};
    }
    c.validate();
    return c;
}

inline json to_json(const TrainedModel& m) {
    json layers = json::array();
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        layers.push_back(json{{"rows", m.weights[l].rows},
                              {"cols", m.weights[l].cols},
                              {"weights", m.weights[l].data},
                              {"biases", m.biases[l]}});
    }
    json j{{"config", to_json(m.config)},
           {"layers", layers},
           {"standardizer", json{{"mean", m.standardizer.mean},
                                 {"stddev", m.standardizer.stddev}}},
           {"loss_trace", m.loss_trace}};
    if (m.stopped_epoch) j["stopped_epoch"] = *m.stopped_epoch;
    return j;
}

inline TrainedModel model_from_json(const json& j) {
    TrainedModel m;
    m.config = network_config_from_json(j.at("config"));
    for (const auto& lj : j.at("layers")) {
        Matrix w(lj.at("rows"), lj.at("cols"));
        w.data = lj.at("weights").get<std::vector<double>>();
        if (w.data.size() != w.rows * w.cols)
            throw std::runtime_error("model json: weight payload size mismatch");
        m.weights.push_back(std::move(w));
        m.biases.push_back(lj.at("biases").get<Vector>());
    }
    m.standardizer.mean = j.at("standardizer").at("mean").get<Vector>();
    m.standardizer.stddev = j.at("standardizer").at("stddev").get<Vector>();
    m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    if (j.contains("stopped_epoch")) m.stopped_epoch = j.at("stopped_epoch").get<std::size_t>();
    detail::check_model_dims(m);
    return m;
}

inline void save_model(const std::string& path, const TrainedModel& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(m).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace branchnet
