#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchnet/activations.hpp"
#include "branchnet/dataset.hpp"
#include "branchnet/numerics.hpp"

namespace branchnet {

/// Axis-aligned box; lo/hi per dimension, closed on both ends.
struct Box {
    Vector lo;
    Vector hi;

    std::size_t dims() const { return lo.size(); }

    bool contains(std::span<const double> x) const {
        if (x.size() != lo.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    void validate() const {
        if (lo.empty() || lo.size() != hi.size())
            throw std::invalid_argument("Box: lo/hi length mismatch or empty");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw std::invalid_argument("Box: empty extent in dim " + std::to_string(i));
    }
};

inline Box box_1d() { return {{-6.0}, {6.0}}; }
inline Box box_2d() { return {{-1.5, -1.5}, {1.5, 1.5}}; }

/// f1(x) = ((x-4)(x+4))^2 on [-6,6].
inline double eval_f1_1d(double x) {
    if (x < -6.0 || x > 6.0)
        throw std::invalid_argument("eval_f1_1d: x out of [-6,6]");
    const double p = (x - 4.0) * (x + 4.0);
    return p * p;
}

/// Same polynomial outside, flat zero on the closed interval [-4,4].
inline double eval_f2_1d(double x) {
    if (x < -6.0 || x > 6.0)
        throw std::invalid_argument("eval_f2_1d: x out of [-6,6]");
    if (x >= -4.0 && x <= 4.0) return 0.0;
    const double p = (x - 4.0) * (x + 4.0);
    return p * p;
}

enum class Surface2D { F1, F2 };

/// sigmoid(xy(2x+2y)) or sigmoid(xy(x^2+y^2)) over a configured box.
inline double eval_2d(Surface2D which, double x, double y, const Box& domain = box_2d()) {
    const double pt[2] = {x, y};
    if (!domain.contains(pt))
        throw std::invalid_argument("eval_2d: point out of domain box");
    const double f = which == Surface2D::F1 ? x * y * (2.0 * x + 2.0 * y)
                                            : x * y * (x * x + y * y);
    return sigmoid(f);
}

enum class BranchFunctionKind {
    Quartic1D,       // ((x-4)(x+4))^2
    QuarticFlat1D,   // same with flat zero on [-4,4]
    SigmoidCubic2D,  // sigmoid(xy(2x+2y))
    SigmoidQuartic2D // sigmoid(xy(x^2+y^2))
};

inline const char* to_string(BranchFunctionKind k) {
    switch (k) {
        case BranchFunctionKind::Quartic1D: return "quartic_1d";
        case BranchFunctionKind::QuarticFlat1D: return "quartic_flat_1d";
        case BranchFunctionKind::SigmoidCubic2D: return "sigmoid_cubic_2d";
        case BranchFunctionKind::SigmoidQuartic2D: return "sigmoid_quartic_2d";
    }
    return "?";
}

/// One single-valued branch of a set-valued mapping.
struct BranchSpec {
    int id = 0;
    BranchFunctionKind kind = BranchFunctionKind::Quartic1D;
    Box domain;

    std::size_t input_dims() const {
        return (kind == BranchFunctionKind::Quartic1D || kind == BranchFunctionKind::QuarticFlat1D)
                   ? 1 : 2;
    }

    double eval(std::span<const double> x) const {
        if (!domain.contains(x))
            throw std::invalid_argument("BranchSpec: point out of domain for branch " +
                                        std::to_string(id));
        switch (kind) {
            case BranchFunctionKind::Quartic1D: return eval_f1_1d(x[0]);
            case BranchFunctionKind::QuarticFlat1D: return eval_f2_1d(x[0]);
            case BranchFunctionKind::SigmoidCubic2D: return eval_2d(Surface2D::F1, x[0], x[1], domain);
            case BranchFunctionKind::SigmoidQuartic2D: return eval_2d(Surface2D::F2, x[0], x[1], domain);
        }
        return 0.0;
    }

    double eval1(double x) const {
        const double p[1] = {x};
        return eval(p);
    }
};

inline BranchSpec branch_f1_1d() { return {1, BranchFunctionKind::Quartic1D, box_1d()}; }
inline BranchSpec branch_f2_1d() { return {2, BranchFunctionKind::QuarticFlat1D, box_1d()}; }
inline BranchSpec branch_f1_2d(const Box& b = box_2d()) { return {1, BranchFunctionKind::SigmoidCubic2D, b}; }
inline BranchSpec branch_f2_2d(const Box& b = box_2d()) { return {2, BranchFunctionKind::SigmoidQuartic2D, b}; }

struct MixtureConfig {
    BranchSpec first = branch_f1_1d();
    BranchSpec second = branch_f2_1d();
    double fraction_first = 0.5;     // P(sample drawn from the first branch)
    std::size_t n_samples = 2000;
    double noise_stddev = 5.0;       // additive Gaussian on the target
    double split_test_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        first.domain.validate();
        second.domain.validate();
        if (first.input_dims() != second.input_dims())
            throw std::invalid_argument("MixtureConfig: branch dimensionality mismatch");
        if (fraction_first < 0.0 || fraction_first > 1.0)
            throw std::invalid_argument("MixtureConfig: fraction_first must lie in [0,1]");
        if (n_samples == 0) throw std::invalid_argument("MixtureConfig: n_samples must be >= 1");
        if (noise_stddev < 0.0) throw std::invalid_argument("MixtureConfig: negative noise_stddev");
        if (split_test_fraction <= 0.0 || split_test_fraction >= 1.0)
            throw std::invalid_argument("MixtureConfig: split_test_fraction must lie in (0,1)");
    }
};

/// Uniform inputs over the first branch's domain, i.i.d. Bernoulli branch
/// choice, Gaussian target noise, then a seeded random train/test split.
/// Tags carry the true branch ids.
inline std::pair<Dataset, Dataset> generate_mixture(const MixtureConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t d = cfg.first.input_dims();
    const Box& box = cfg.first.domain;

    Dataset all;
    all.features = Matrix(cfg.n_samples, d);
    all.targets = Matrix(cfg.n_samples, 1);
    all.tags.resize(cfg.n_samples);
    all.feature_names = d == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
    all.target_names = {"target"};

    Vector point(d);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            point[j] = rng.uniform(box.lo[j], box.hi[j]);
            all.features(i, j) = point[j];
        }
        const bool pick_first = rng.bernoulli(cfg.fraction_first);
        const BranchSpec& br = pick_first ? cfg.first : cfg.second;
        all.targets(i, 0) = br.eval(point) + rng.normal(0.0, cfg.noise_stddev);
        all.tags[i].branch = br.id;
    }

    std::vector<std::size_t> order(cfg.n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(cfg.split_test_fraction * static_cast<double>(cfg.n_samples)));

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset out;
        out.feature_names = all.feature_names;
        out.target_names = all.target_names;
        out.features = Matrix(end - begin, d);
        out.targets = Matrix(end - begin, 1);
        out.tags.resize(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t r = order[k];
            for (std::size_t j = 0; j < d; ++j) out.features(k - begin, j) = all.features(r, j);
            out.targets(k - begin, 0) = all.targets(r, 0);
            out.tags[k - begin] = all.tags[r];
        }
        return out;
    };

    Dataset test = take(0, n_test);
    Dataset train = take(n_test, cfg.n_samples);
    return {std::move(train), std::move(test)};
}

}  // namespace branchnet
