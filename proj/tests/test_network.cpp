#include <catch_amalgamated.hpp>

#include <cmath>

#include "branchnet/model_io.hpp"
#include "branchnet/network.hpp"

using namespace branchnet;

namespace {

Dataset make_dataset(const std::vector<Vector>& xs, const std::vector<Vector>& ys) {
    Dataset d;
    d.features = Matrix(xs.size(), xs.front().size());
    d.targets = Matrix(ys.size(), ys.front().size());
    d.tags.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < xs[i].size(); ++j) d.features(i, j) = xs[i][j];
        for (std::size_t j = 0; j < ys[i].size(); ++j) d.targets(i, j) = ys[i][j];
    }
    return d;
}

TrainedModel manual_model(std::size_t input_dim, std::vector<LayerSpec> layers,
                          std::vector<Matrix> weights, std::vector<Vector> biases,
                          Loss loss = Loss::mse()) {
    TrainedModel m;
    m.config.input_dim = input_dim;
    m.config.layers = std::move(layers);
    m.config.loss = loss;
    m.config.standardize_features = false;
    m.weights = std::move(weights);
    m.biases = std::move(biases);
    m.loss_trace = {0.0};
    return m;
}

TrainedModel random_model(Rng& rng, std::size_t input_dim, const std::vector<LayerSpec>& layers,
                          Loss loss, double scale = 0.7) {
    std::vector<Matrix> ws;
    std::vector<Vector> bs;
    std::size_t prev = input_dim;
    for (const auto& l : layers) {
        Matrix w(l.neurons, prev);
        for (auto& v : w.data) v = rng.uniform(-scale, scale);
        Vector b(l.neurons);
        for (auto& v : b) v = rng.uniform(-scale, scale);
        ws.push_back(std::move(w));
        bs.push_back(std::move(b));
        prev = l.neurons;
    }
    return manual_model(input_dim, layers, std::move(ws), std::move(bs), loss);
}

double total_loss(const TrainedModel& m, const Vector& x, const Vector& y) {
    return loss_value(m.config.loss, y, forward(m, x));
}

}  // namespace

TEST_CASE("forward: identity and constant networks") {
    Matrix eye(3, 3);
    for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
    auto ident = manual_model(3, {{3, Activation::identity()}}, {eye}, {Vector(3, 0.0)});
    const Vector x{1.5, -2.0, 0.25};
    CHECK(forward(ident, x) == x);

    auto constant = manual_model(3, {{2, Activation::identity()}},
                                 {Matrix(2, 3, 0.0)}, {Vector{4.0, -1.0}});
    CHECK(forward(constant, x) == Vector{4.0, -1.0});
    CHECK(forward(constant, {9.0, 9.0, 9.0}) == Vector{4.0, -1.0});
}

TEST_CASE("forward equals an independently composed two-layer network") {
    Rng rng(31);
    auto m = random_model(rng, 2, {{4, Activation::tanh()}, {3, Activation::sigmoid()}},
                          Loss::mse());
    const Vector x{0.3, -1.2};
    const Vector h1 = activate(Activation::tanh(), [&] {
        Vector z = matvec(m.weights[0], x);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += m.biases[0][i];
        return z;
    }());
    const Vector h2 = activate(Activation::sigmoid(), [&] {
        Vector z = matvec(m.weights[1], h1);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += m.biases[1][i];
        return z;
    }());
    CHECK(forward(m, x) == h2);
}

TEST_CASE("forward rejects wrong input length") {
    Rng rng(1);
    auto m = random_model(rng, 3, {{2, Activation::identity()}}, Loss::mse());
    CHECK_THROWS_AS(forward(m, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("backward: zero residual under MSE gives zero gradients") {
    Rng rng(7);
    auto m = random_model(rng, 2, {{3, Activation::tanh()}, {1, Activation::identity()}},
                          Loss::mse());
    const Vector x{0.4, -0.9};
    const Vector y = forward(m, x);
    const Gradients g = backward(m, x, y);
    for (const auto& gw : g.weights)
        for (double v : gw.data) CHECK(v == 0.0);
    for (const auto& gb : g.biases)
        for (double v : gb) CHECK(v == 0.0);
}

TEST_CASE("backward: scalar linear net matches closed form") {
    const double w = 1.7, b = -0.4, x = 2.3, y = 5.0;
    auto m = manual_model(1, {{1, Activation::identity()}}, {Matrix(1, 1, w)}, {Vector{b}});
    const Gradients g = backward(m, {x}, {y});
    CHECK(g.weights[0](0, 0) == Catch::Approx(2.0 * (w * x + b - y) * x).epsilon(1e-12));
    CHECK(g.biases[0][0] == Catch::Approx(2.0 * (w * x + b - y)).epsilon(1e-12));
}

TEST_CASE("backward matches finite differences across activations and losses") {
    const std::vector<Activation> acts = {Activation::sigmoid(), Activation::tanh(),
                                          Activation::relu(), Activation::elu(1.0),
                                          Activation::identity()};
    const std::vector<Loss> losses = {Loss::mse(), Loss::mae(), Loss::huber(1.0),
                                      Loss::log_cosh()};
    Rng rng(2024);
    const double h = 1e-6;
    for (const auto& act : acts) {
        for (const auto& loss : losses) {
            for (int rep = 0; rep < 2; ++rep) {
                const std::size_t hidden = 2 + rng.index(4);
                auto m = random_model(
                    rng, 2, {{hidden, act}, {2, Activation::identity()}}, loss);
                Vector x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
                Vector y{rng.uniform(-2, 2), rng.uniform(-2, 2)};
                // keep kinked losses away from their kinks
                const Vector out = forward(m, x);
                for (std::size_t i = 0; i < y.size(); ++i)
                    if (std::fabs(out[i] - y[i]) < 1e-3) y[i] += 0.5;
                const Gradients g = backward(m, x, y);
                for (std::size_t l = 0; l < m.weights.size(); ++l) {
                    for (std::size_t idx = 0; idx < m.weights[l].data.size(); ++idx) {
                        const double save = m.weights[l].data[idx];
                        m.weights[l].data[idx] = save + h;
                        const double up = total_loss(m, x, y);
                        m.weights[l].data[idx] = save - h;
                        const double dn = total_loss(m, x, y);
                        m.weights[l].data[idx] = save;
                        const double fd = (up - dn) / (2.0 * h);
                        const double an = g.weights[l].data[idx];
                        const double tol = std::max(1e-6, 1e-4 * std::fabs(fd));
                        if (act.kind == ActivationKind::ReLU && std::fabs(fd - an) > tol)
                            continue;  // kink crossing, not informative
                        CHECK(std::fabs(fd - an) <= tol);
                    }
                }
            }
        }
    }
}

TEST_CASE("fused softmax cross-entropy gradient matches finite differences") {
    Rng rng(55);
    auto m = random_model(rng, 2, {{4, Activation::tanh()}, {3, Activation::softmax()}},
                          Loss::cross_entropy());
    const Vector x{0.2, -0.7};
    const Vector y{0.0, 1.0, 0.0};
    const Gradients g = backward(m, x, y);
    const double h = 1e-6;
    for (std::size_t l = 0; l < m.weights.size(); ++l)
        for (std::size_t idx = 0; idx < m.weights[l].data.size(); ++idx) {
            const double save = m.weights[l].data[idx];
            m.weights[l].data[idx] = save + h;
            const double up = total_loss(m, x, y);
            m.weights[l].data[idx] = save - h;
            const double dn = total_loss(m, x, y);
            m.weights[l].data[idx] = save;
            CHECK(std::fabs((up - dn) / (2 * h) - g.weights[l].data[idx]) <= 1e-5);
        }
}

TEST_CASE("softmax output without cross-entropy is rejected") {
    Rng rng(3);
    auto m = random_model(rng, 2, {{3, Activation::softmax()}}, Loss::mse());
    CHECK_THROWS_AS(backward(m, {0.1, 0.2}, {1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("train: recovers the line y = 2x + 1") {
    Rng rng(9);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 64; ++i) {
        const double x = rng.uniform(-2.0, 2.0);
        xs.push_back({x});
        ys.push_back({2.0 * x + 1.0});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{1, Activation::identity()}};
    cfg.loss = Loss::mse();
    cfg.optimizer = OptimizerConfig::adam();
    cfg.batch_size = 16;
    cfg.epochs = 500;
    cfg.learn_rate_schedule = {1e-2};
    cfg.seed = 1;
    cfg.standardize_features = false;
    const TrainedModel m = train(cfg, make_dataset(xs, ys));
    // closed-form least squares on the noiseless line yields exactly (2, 1)
    CHECK(std::fabs(m.weights[0](0, 0) - 2.0) < 0.05);
    CHECK(std::fabs(m.biases[0][0] - 1.0) < 0.05);
}

TEST_CASE("train: constant target is reproduced on the training inputs") {
    Rng rng(10);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 50; ++i) {
        xs.push_back({rng.uniform(-5.0, 5.0)});
        ys.push_back({7.3});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{1, Activation::identity()}};
    cfg.loss = Loss::mse();
    cfg.batch_size = 10;
    cfg.epochs = 300;
    cfg.learn_rate_schedule = {1e-1};
    cfg.seed = 2;
    const TrainedModel m = train(cfg, make_dataset(xs, ys));
    for (const auto& x : xs) CHECK(std::fabs(forward(m, x)[0] - 7.3) < 1e-2);
}

TEST_CASE("train is deterministic: same config, same dataset, bit-identical model") {
    Rng rng(11);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 40; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        xs.push_back({x});
        ys.push_back({std::sin(3.0 * x)});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{8, Activation::elu(1.0)}, {1, Activation::identity()}};
    cfg.loss = Loss::log_cosh();
    cfg.batch_size = 8;
    cfg.epochs = 20;
    cfg.learn_rate_schedule = {1e-3, 1e-4};
    cfg.seed = 77;
    cfg.early_stopping = EarlyStopping{5, 0.0, 0.2};
    const Dataset data = make_dataset(xs, ys);
    const TrainedModel a = train(cfg, data);
    const TrainedModel b = train(cfg, data);
    CHECK(a.weights == b.weights);
    CHECK(a.biases == b.biases);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("full-batch SGD with zero momentum steps by exactly -lr * mean gradient") {
    Rng data_rng(12);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 24; ++i) {
        xs.push_back({data_rng.uniform(-1, 1), data_rng.uniform(-1, 1)});
        ys.push_back({data_rng.uniform(-1, 1)});
    }
    const Dataset data = make_dataset(xs, ys);

    NetworkConfig cfg;
    cfg.input_dim = 2;
    cfg.layers = {{4, Activation::tanh()}, {1, Activation::identity()}};
    cfg.loss = Loss::mse();
    cfg.optimizer = OptimizerConfig::sgd(0.0);
    cfg.batch_size = data.size();
    cfg.epochs = 1;
    const double lr = 0.05;
    cfg.learn_rate_schedule = {lr};
    cfg.seed = 5;
    cfg.standardize_features = false;

    // replicate the seeded init: weights drawn row-major, layer by layer
    TrainedModel init;
    init.config = cfg;
    Rng rng(cfg.seed);
    std::size_t prev = cfg.input_dim;
    for (const auto& l : cfg.layers) {
        Matrix w(l.neurons, prev);
        for (auto& v : w.data) v = rng.normal(0.0, cfg.init_stddev);
        init.weights.push_back(std::move(w));
        init.biases.emplace_back(l.neurons, 0.0);
        prev = l.neurons;
    }

    Gradients mean = detail::zero_gradients(init);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Gradients g = backward(init, xs[i], ys[i]);
        for (std::size_t l = 0; l < mean.weights.size(); ++l) {
            for (std::size_t k = 0; k < mean.weights[l].data.size(); ++k)
                mean.weights[l].data[k] += g.weights[l].data[k];
            for (std::size_t k = 0; k < mean.biases[l].size(); ++k)
                mean.biases[l][k] += g.biases[l][k];
        }
    }
    const double n = static_cast<double>(data.size());
    for (auto& m : mean.weights)
        for (auto& v : m.data) v /= n;
    for (auto& b : mean.biases)
        for (auto& v : b) v /= n;

    const TrainedModel stepped = train(cfg, data);
    for (std::size_t l = 0; l < init.weights.size(); ++l) {
        for (std::size_t k = 0; k < init.weights[l].data.size(); ++k) {
            double expect = init.weights[l].data[k];
            expect -= lr * mean.weights[l].data[k];
            CHECK(stepped.weights[l].data[k] == expect);
        }
        for (std::size_t k = 0; k < init.biases[l].size(); ++k) {
            double expect = init.biases[l][k];
            expect -= lr * mean.biases[l][k];
            CHECK(stepped.biases[l][k] == expect);
        }
    }
}

TEST_CASE("early stopping fires after patience epochs without improvement") {
    Rng rng(13);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 30; ++i) {
        xs.push_back({rng.uniform(-1, 1)});
        ys.push_back({0.0});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{1, Activation::identity()}};
    cfg.loss = Loss::mse();
    cfg.batch_size = 30;
    cfg.epochs = 100;
    cfg.learn_rate_schedule = {1e-3};
    cfg.seed = 3;
    // min_delta so large no improvement can ever exceed it
    cfg.early_stopping = EarlyStopping{4, 1e12, 0.2};
    std::vector<double> val_trace;
    const TrainedModel m = train(cfg, make_dataset(xs, ys),
                                 [&](const EpochInfo& e) { val_trace.push_back(e.validation_loss); });
    REQUIRE(m.stopped_epoch.has_value());
    CHECK(*m.stopped_epoch == 4);  // epochs 1..4 show no improvement > min_delta over epoch 0
    CHECK(m.loss_trace.size() == 5);
    // the validation trace indeed never improved by more than min_delta
    for (std::size_t i = 1; i < val_trace.size(); ++i)
        CHECK(val_trace[i] >= val_trace[0] - 1e12);
}

TEST_CASE("training loss is non-increasing across schedule steps on a learnable target") {
    Rng rng(14);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 60; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        xs.push_back({x});
        ys.push_back({0.5 * x - 2.0});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{6, Activation::tanh()}, {1, Activation::identity()}};
    cfg.loss = Loss::mse();
    cfg.batch_size = 12;
    cfg.epochs = 30;
    cfg.learn_rate_schedule = {1e-2, 1e-3, 1e-4};
    cfg.seed = 8;
    const TrainedModel m = train(cfg, make_dataset(xs, ys));
    REQUIRE(m.loss_trace.size() == 90);
    const double s1 = m.loss_trace[29], s2 = m.loss_trace[59], s3 = m.loss_trace[89];
    CHECK(s2 <= s1 + 1e-9);
    CHECK(s3 <= s2 + 1e-9);
}

TEST_CASE("predict_batch: empty, single row, and loop-of-forward oracle") {
    Rng rng(15);
    auto m = random_model(rng, 3, {{5, Activation::elu(1.0)}, {2, Activation::identity()}},
                          Loss::mse());
    const Matrix empty(0, 3);
    const Matrix out_empty = predict_batch(m, empty);
    CHECK(out_empty.rows == 0);
    CHECK(out_empty.cols == 2);

    Matrix one(1, 3);
    one(0, 0) = 0.1; one(0, 1) = -0.5; one(0, 2) = 2.0;
    const Matrix out_one = predict_batch(m, one);
    CHECK(out_one.row_vector(0) == forward(m, one.row_vector(0)));

    Matrix many(100, 3);
    for (auto& v : many.data) v = rng.uniform(-2, 2);
    const Matrix out = predict_batch(m, many);
    for (std::size_t i = 0; i < many.rows; ++i)
        CHECK(out.row_vector(i) == forward(m, many.row_vector(i)));

    CHECK_THROWS_AS(predict_batch(m, Matrix(2, 4)), std::invalid_argument);
}

TEST_CASE("model json round-trip is bit-exact") {
    Rng rng(16);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 32; ++i) {
        const double x = rng.uniform(-3.0, 3.0);
        xs.push_back({x});
        ys.push_back({x * x});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{6, Activation::elu(0.9)}, {1, Activation::identity()}};
    cfg.loss = Loss::huber(2.5);
    cfg.batch_size = 8;
    cfg.epochs = 15;
    cfg.learn_rate_schedule = {1e-3};
    cfg.seed = 1234;
    const TrainedModel m = train(cfg, make_dataset(xs, ys));

    const TrainedModel r = model_from_json(to_json(m));
    CHECK(r.weights == m.weights);
    CHECK(r.biases == m.biases);
    CHECK(r.standardizer.mean == m.standardizer.mean);
    CHECK(r.standardizer.stddev == m.standardizer.stddev);
    CHECK(r.loss_trace == m.loss_trace);
    CHECK(r.config.loss.delta == m.config.loss.delta);
    CHECK(forward(r, {1.5}) == forward(m, {1.5}));
}

TEST_CASE("train input validation") {
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{1, Activation::identity()}};
    Dataset empty;
    CHECK_THROWS_AS(train(cfg, empty), std::invalid_argument);

    const Dataset d = make_dataset({{1.0, 2.0}}, {{1.0}});
    CHECK_THROWS_AS(train(cfg, d), std::invalid_argument);

    NetworkConfig bad = cfg;
    bad.learn_rate_schedule = {};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.learn_rate_schedule = {0.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("diverging training reports the epoch") {
    Rng rng(17);
    std::vector<Vector> xs, ys;
    for (int i = 0; i < 16; ++i) {
        xs.push_back({rng.uniform(1.0, 2.0)});
        ys.push_back({1e3});
    }
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.layers = {{4, Activation::identity()}, {1, Activation::identity()}};
    cfg.loss = Loss::mse();
    cfg.optimizer = OptimizerConfig::sgd(0.0);
    cfg.batch_size = 4;
    cfg.epochs = 50;
    cfg.learn_rate_schedule = {1e12};
    cfg.seed = 4;
    try {
        train(cfg, make_dataset(xs, ys));
        FAIL("expected divergence");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}
