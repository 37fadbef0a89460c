#include <catch_amalgamated.hpp>

#include <cmath>

#include "branchnet/branchclass.hpp"
#include "branchnet/features.hpp"

using namespace branchnet;

namespace {

NetworkConfig tiny_net(std::size_t input_dim, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.input_dim = input_dim;
    cfg.layers = {{16, Activation::elu(1.0)}, {16, Activation::elu(1.0)},
                  {1, Activation::identity()}};
    cfg.loss = Loss::log_cosh();
    cfg.batch_size = 64;
    cfg.epochs = 12;
    cfg.learn_rate_schedule = {1e-2};
    cfg.seed = seed;
    cfg.init = WeightInit::ScaledNormal;
    return cfg;
}

std::map<std::string, std::string> partition_from_panel(const Panel& p) {
    std::map<std::string, std::string> out;
    for (const auto& r : p.records) out[r.id] = r.population_label;
    return out;
}

Dataset design_for(const Panel& p) {
    FeatureStrategy st;
    st.kind = FeatureStrategyKind::TimeSeriesFirstDay;
    return build_design(p, st);
}

}  // namespace

TEST_CASE("classify_by_branch recovers tags exactly on noiseless mixtures") {
    for (double frac : {0.3, 0.5, 0.8}) {
        MixtureConfig mc;
        mc.fraction_first = frac;
        mc.n_samples = 1500;
        mc.noise_stddev = 0.0;
        mc.seed = 42;
        const auto [train_set, test_set] = generate_mixture(mc);
        // the model only decides the majority id; a constant model is fine here
        TrainedModel m;
        m.config.input_dim = 1;
        m.config.layers = {{1, Activation::identity()}};
        m.config.standardize_features = false;
        m.weights = {Matrix(1, 1, 0.0)};
        m.biases = {Vector{0.0}};
        const BranchAssignment ba =
            classify_by_branch(m, train_set, branch_f1_1d(), branch_f2_1d());
        for (std::size_t i = 0; i < train_set.size(); ++i) {
            const double x = train_set.features(i, 0);
            if (x > -4.0 && x < 4.0) {
                // branches differ: recovery is exact
                CHECK(ba.samples[i].assigned_branch == train_set.tags[i].branch);
            } else {
                // branches coincide: both residuals are zero, ties go to id 1
                CHECK(ba.samples[i].assigned_branch == 1);
            }
        }
    }
}

TEST_CASE("classify_by_branch at gap/sigma >= 6: tag agreement >= 99% in the gap region") {
    MixtureConfig mc;
    mc.fraction_first = 0.5;
    mc.n_samples = 20000;
    mc.noise_stddev = 5.0;
    mc.seed = 11;
    const auto [train_set, test_set] = generate_mixture(mc);
    TrainedModel m;
    m.config.input_dim = 1;
    m.config.layers = {{1, Activation::identity()}};
    m.config.standardize_features = false;
    m.weights = {Matrix(1, 1, 0.0)};
    m.biases = {Vector{0.0}};
    const BranchAssignment ba = classify_by_branch(m, train_set, branch_f1_1d(), branch_f2_1d());
    // restrict to samples where the branch gap is at least 6 sigma;
    // Gaussian tail oracle: misclassification ~ Phi(-gap/2sigma) <= Phi(-3) ~ 0.13%
    std::size_t considered = 0, agree = 0;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        const double x = train_set.features(i, 0);
        if (x <= -4.0 || x >= 4.0) continue;
        if (eval_f1_1d(x) < 6.0 * mc.noise_stddev) continue;
        ++considered;
        agree += ba.samples[i].assigned_branch == train_set.tags[i].branch;
    }
    REQUIRE(considered > 5000);
    CHECK(static_cast<double>(agree) / static_cast<double>(considered) >= 0.99);
}

TEST_CASE("multivalued_grid masks points where the branches agree") {
    const auto grid = multivalued_grid(branch_f1_1d(), branch_f2_1d(), 401);
    CHECK(grid.size() > 200);
    for (const auto& p : grid) {
        CHECK(p[0] > -4.0);
        CHECK(p[0] < 4.0);
        CHECK(eval_f1_1d(p[0]) != eval_f2_1d(p[0]));
    }
}

TEST_CASE("fit_majority warns when the loss is not logcosh") {
    MixtureConfig mc;
    mc.n_samples = 200;
    mc.seed = 5;
    const auto [train_set, test_set] = generate_mixture(mc);
    NetworkConfig cfg = tiny_net(1, 5);
    cfg.epochs = 2;
    cfg.loss = Loss::mse();
    std::vector<std::string> warnings;
    fit_majority(cfg, train_set, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("mse") != std::string::npos);

    warnings.clear();
    cfg.loss = Loss::log_cosh();
    fit_majority(cfg, train_set, &warnings);
    CHECK(warnings.empty());
}

TEST_CASE("fit_majority on a pure branch matches it within noise tolerance") {
    MixtureConfig mc;
    mc.fraction_first = 1.0;
    mc.n_samples = 2000;
    mc.noise_stddev = 5.0;
    mc.seed = 3;
    const auto [train_set, test_set] = generate_mixture(mc);
    NetworkConfig cfg = tiny_net(1, 3);
    cfg.layers = {{50, Activation::elu(1.0)}, {50, Activation::elu(1.0)},
                  {50, Activation::elu(1.0)}, {1, Activation::identity()}};
    cfg.batch_size = 32;
    cfg.epochs = 150;
    cfg.learn_rate_schedule = {1e-3, 1e-4};
    const TrainedModel m = fit_majority(cfg, train_set);
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double x = -6.0 + 12.0 * i / 100.0;
        worst = std::max(worst, std::fabs(forward(m, {x})[0] - eval_f1_1d(x)));
    }
    CHECK(worst < 5.0 * mc.noise_stddev);
}

TEST_CASE("protocol: degenerate accuracy band makes everything accurate, no clusters") {
    const Panel p = generate_synthetic_panel(12, 40, 0.5, 0.5, 9);
    const Dataset d = design_for(p);
    ProtocolConfig pc;
    pc.accuracy_band = 1e18;
    const CrossEvalReport rep =
        run_hidden_feature_protocol(tiny_net(d.features.cols, 1), d, partition_from_panel(p), pc);
    CHECK(rep.decision == Decision::NoClusters);
    for (const auto& [net, pops] : rep.cells)
        for (const auto& [pop, cell] : pops) {
            CHECK(cell.over == 0);
            CHECK(cell.under == 0);
        }
    CHECK(rep.own_accuracy_a == 1.0);
    CHECK(rep.own_accuracy_b == 1.0);
}

TEST_CASE("protocol is symmetric under swapping the partition labels") {
    const Panel p = generate_synthetic_panel(10, 40, 0.4, 0.5, 13);
    const Dataset d = design_for(p);
    auto part = partition_from_panel(p);
    const NetworkConfig cfg = tiny_net(d.features.cols, 2);
    ProtocolConfig pc;
    const CrossEvalReport a = run_hidden_feature_protocol(cfg, d, part, pc);

    auto swapped = part;
    for (auto& [k, v] : swapped) v = v == "A" ? "B" : "A";
    const CrossEvalReport b = run_hidden_feature_protocol(cfg, d, swapped, pc);

    CHECK(a.decision == b.decision);
    CHECK(a.cells.at("A").at("A").accurate == b.cells.at("B").at("B").accurate);
    CHECK(a.cells.at("A").at("B").over == b.cells.at("B").at("A").over);
    CHECK(a.cells.at("joint").at("A").under == b.cells.at("joint").at("B").under);
    CHECK(a.own_accuracy_a == b.own_accuracy_b);
    CHECK(a.over_b_under_a_net == b.over_a_under_b_net);
}

TEST_CASE("protocol rejects degenerate partitions") {
    const Panel p = generate_synthetic_panel(6, 30, 0.0, 0.5, 1);
    const Dataset d = design_for(p);
    std::map<std::string, std::string> part;
    for (const auto& r : p.records) part[r.id] = "A";
    CHECK_THROWS_WITH(run_hidden_feature_protocol(tiny_net(d.features.cols, 1), d, part,
                                                  ProtocolConfig{}),
                      Catch::Matchers::ContainsSubstring("at least 2 units"));

    part[p.records[0].id] = "C";
    CHECK_THROWS_AS(run_hidden_feature_protocol(tiny_net(d.features.cols, 1), d, part,
                                                ProtocolConfig{}),
                    std::invalid_argument);
}

TEST_CASE("protocol false-positive control: identical populations rarely detect clusters") {
    // both classes drawn from the same generative distribution (effect 0)
    std::size_t detections = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Panel p = generate_synthetic_panel(12, 40, 0.0, 0.5, seed);
        const Dataset d = design_for(p);
        const CrossEvalReport rep = run_hidden_feature_protocol(
            tiny_net(d.features.cols, seed), d, partition_from_panel(p), ProtocolConfig{});
        detections += rep.decision == Decision::ClustersDetected;
    }
    CHECK(detections <= 1);
}

TEST_CASE("compare_losses validates that configs differ only in the loss") {
    MixtureConfig mc;
    mc.n_samples = 200;
    mc.seed = 1;
    const auto [train_set, test_set] = generate_mixture(mc);
    NetworkConfig a = tiny_net(1, 1);
    NetworkConfig b = tiny_net(1, 1);
    a.loss = Loss::log_cosh();
    b.loss = Loss::mse();
    b.epochs = a.epochs + 1;
    CHECK_THROWS_WITH(compare_losses(train_set, {a, b}, branch_f1_1d(), branch_f2_1d()),
                      Catch::Matchers::ContainsSubstring("identical except the loss"));
}

TEST_CASE("compare_losses reports proximity fractions and the oscillation diagnostic") {
    MixtureConfig mc;
    mc.fraction_first = 0.7;
    mc.n_samples = 600;
    mc.seed = 8;
    const auto [train_set, test_set] = generate_mixture(mc);
    NetworkConfig base = tiny_net(1, 4);
    base.epochs = 25;
    std::vector<NetworkConfig> cfgs(2, base);
    cfgs[0].loss = Loss::log_cosh();
    cfgs[1].loss = Loss::mse();
    const auto entries = compare_losses(train_set, cfgs, branch_f1_1d(), branch_f2_1d(), 101);
    REQUIRE(entries.size() == 2);
    for (const auto& e : entries) {
        CHECK(e.fraction_near_first + e.fraction_near_second + e.fraction_midband ==
              Catch::Approx(1.0).margin(1e-12));
        CHECK(e.last10_prediction_variance >= 0.0);
        CHECK(std::isfinite(e.final_train_loss));
    }
}
