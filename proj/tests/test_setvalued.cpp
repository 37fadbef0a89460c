#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "branchnet/setvalued.hpp"

using namespace branchnet;

TEST_CASE("f1 analytic values") {
    CHECK(eval_f1_1d(4.0) == 0.0);
    CHECK(eval_f1_1d(-4.0) == 0.0);
    CHECK(eval_f1_1d(0.0) == 256.0);
    CHECK(eval_f1_1d(-6.0) == 400.0);
    CHECK(eval_f1_1d(6.0) == 400.0);
    CHECK_THROWS_AS(eval_f1_1d(6.0001), std::invalid_argument);
    CHECK_THROWS_AS(eval_f1_1d(-7.0), std::invalid_argument);
}

TEST_CASE("f2 piecewise values, boundary in the flat piece") {
    CHECK(eval_f2_1d(0.0) == 0.0);
    CHECK(eval_f2_1d(5.0) == 81.0);
    CHECK(eval_f2_1d(-4.0) == 0.0);
    CHECK(eval_f2_1d(4.0) == 0.0);
    CHECK(eval_f2_1d(-5.0) == 81.0);
    CHECK_THROWS_AS(eval_f2_1d(-6.5), std::invalid_argument);
}

TEST_CASE("f1 and f2 agree exactly outside the multivalued region, differ inside") {
    for (double x = -6.0; x <= 6.0001; x += 0.01) {
        const double xc = std::min(x, 6.0);
        if (xc < -4.0 || xc > 4.0)
            CHECK(eval_f1_1d(xc) == eval_f2_1d(xc));
        else if (xc > -4.0 && xc < 4.0) {
            CHECK(eval_f1_1d(xc) > 0.0);
            CHECK(eval_f2_1d(xc) == 0.0);
        }
    }
}

TEST_CASE("2d surfaces: sigmoid-wrapped closed-form values") {
    CHECK(eval_2d(Surface2D::F1, 0.0, 1.3) == 0.5);
    CHECK(eval_2d(Surface2D::F1, 1.0, -1.0) == 0.5);  // 2x+2y = 0
    CHECK(eval_2d(Surface2D::F2, 1.0, 1.0) == Catch::Approx(0.8807970779778823).epsilon(1e-12));
    CHECK_THROWS_AS(eval_2d(Surface2D::F1, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("2d targets lie strictly inside (0,1) before noise") {
    Rng rng(3);
    const auto b1 = branch_f1_2d(), b2 = branch_f2_2d();
    for (int i = 0; i < 2000; ++i) {
        const Vector p{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        for (const auto& b : {b1, b2}) {
            const double v = b.eval(p);
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("generate_mixture: degenerate fraction gives a single branch") {
    MixtureConfig cfg;
    cfg.fraction_first = 1.0;
    cfg.n_samples = 500;
    cfg.seed = 9;
    const auto [train_set, test_set] = generate_mixture(cfg);
    for (const auto& t : train_set.tags) CHECK(t.branch == 1);
    for (const auto& t : test_set.tags) CHECK(t.branch == 1);
}

TEST_CASE("generate_mixture: noiseless targets equal their branch function") {
    MixtureConfig cfg;
    cfg.fraction_first = 0.5;
    cfg.n_samples = 2000;
    cfg.noise_stddev = 0.0;
    cfg.seed = 21;
    const auto [train_set, test_set] = generate_mixture(cfg);
    auto check = [](const Dataset& d) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double x = d.features(i, 0);
            const double expect = d.tags[i].branch == 1 ? eval_f1_1d(x) : eval_f2_1d(x);
            CHECK(d.targets(i, 0) == expect);
        }
    };
    check(train_set);
    check(test_set);
}

TEST_CASE("generate_mixture: empirical branch share concentrates near the fraction") {
    MixtureConfig cfg;
    cfg.fraction_first = 0.7;
    cfg.n_samples = 10000;
    cfg.seed = 4;
    const auto [train_set, test_set] = generate_mixture(cfg);
    std::size_t first = 0;
    for (const auto& t : train_set.tags) first += t.branch == 1;
    for (const auto& t : test_set.tags) first += t.branch == 1;
    const double share = static_cast<double>(first) / 10000.0;
    CHECK(std::fabs(share - 0.7) < 0.02);
}

TEST_CASE("generate_mixture: split sizes, determinism, and disjointness") {
    MixtureConfig cfg;
    cfg.fraction_first = 0.6;
    cfg.n_samples = 2000;
    cfg.split_test_fraction = 0.2;
    cfg.seed = 31;
    const auto [train1, test1] = generate_mixture(cfg);
    CHECK(train1.size() == 1600);
    CHECK(test1.size() == 400);

    const auto [train2, test2] = generate_mixture(cfg);
    CHECK(train1.features == train2.features);
    CHECK(train1.targets == train2.targets);
    CHECK(test1.features == test2.features);
    CHECK(train1.tags == train2.tags);

    // disjoint and exhaustive: every generated (x, target) pair appears once
    std::multiset<std::pair<double, double>> seen;
    for (std::size_t i = 0; i < train1.size(); ++i)
        seen.insert({train1.features(i, 0), train1.targets(i, 0)});
    for (std::size_t i = 0; i < test1.size(); ++i)
        seen.insert({test1.features(i, 0), test1.targets(i, 0)});
    CHECK(seen.size() == 2000);

    MixtureConfig other = cfg;
    other.seed = 32;
    const auto [train3, test3] = generate_mixture(other);
    CHECK(train3.features.data != train1.features.data);
}

TEST_CASE("generate_mixture validates its config") {
    MixtureConfig cfg;
    cfg.fraction_first = 1.5;
    CHECK_THROWS_AS(generate_mixture(cfg), std::invalid_argument);
    cfg.fraction_first = 0.5;
    cfg.split_test_fraction = 1.0;
    CHECK_THROWS_AS(generate_mixture(cfg), std::invalid_argument);
    cfg.split_test_fraction = 0.2;
    cfg.noise_stddev = -1.0;
    CHECK_THROWS_AS(generate_mixture(cfg), std::invalid_argument);
}

TEST_CASE("dataset csv round-trip preserves every value and tag") {
    MixtureConfig cfg;
    cfg.fraction_first = 0.7;
    cfg.n_samples = 300;
    cfg.seed = 12;
    const auto [train_set, test_set] = generate_mixture(cfg);
    const auto path = std::filesystem::temp_directory_path() / "branchnet_mix_roundtrip.csv";
    write_dataset_csv(path.string(), train_set);
    const Dataset back = read_dataset_csv(path.string());
    CHECK(back.features == train_set.features);
    CHECK(back.targets == train_set.targets);
    CHECK(back.tags == train_set.tags);
    CHECK(back.feature_names == train_set.feature_names);
    std::filesystem::remove(path);
}
