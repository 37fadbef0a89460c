#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchnet/dataset.hpp"
#include "branchnet/network.hpp"
#include "branchnet/numerics.hpp"
#include "branchnet/setvalued.hpp"

namespace branchnet {

struct BranchAssignment {
    struct PerSample {
        double prediction = 0.0;
        double residual_first = 0.0;   // target - first branch value
        double residual_second = 0.0;  // target - second branch value
        int assigned_branch = 0;
    };
    std::vector<PerSample> samples;
    std::map<int, std::size_t> branch_counts;
    int majority_branch_id = 0;  // vote of the model prediction over the multivalued grid
};

/// Evenly spaced evaluation grid over the branch domain box: 1D grids are
/// 1D, 2D grids are the tensor grid.
inline std::vector<Vector> domain_grid(const BranchSpec& spec, std::size_t points_per_dim) {
    if (points_per_dim < 2) throw std::invalid_argument("domain_grid: need >= 2 points");
    const Box& box = spec.domain;
    std::vector<Vector> grid;
    if (spec.input_dims() == 1) {
        for (std::size_t i = 0; i < points_per_dim; ++i)
            grid.push_back({box.lo[0] + (box.hi[0] - box.lo[0]) * static_cast<double>(i) /
                                            static_cast<double>(points_per_dim - 1)});
    } else {
        for (std::size_t i = 0; i < points_per_dim; ++i)
            for (std::size_t j = 0; j < points_per_dim; ++j)
                grid.push_back({box.lo[0] + (box.hi[0] - box.lo[0]) * static_cast<double>(i) /
                                                static_cast<double>(points_per_dim - 1),
                                box.lo[1] + (box.hi[1] - box.lo[1]) * static_cast<double>(j) /
                                                static_cast<double>(points_per_dim - 1)});
    }
    return grid;
}

/// The same grid masked to the multivalued region: points where the two
/// branches differ by more than region_epsilon.
inline std::vector<Vector> multivalued_grid(const BranchSpec& first, const BranchSpec& second,
                                            std::size_t points_per_dim,
                                            double region_epsilon = 0.0) {
    std::vector<Vector> grid;
    for (Vector& p : domain_grid(first, points_per_dim)) {
        if (std::fabs(first.eval(p) - second.eval(p)) > region_epsilon)
            grid.push_back(std::move(p));
    }
    return grid;
}

/// Thin wrapper over train() with the experiment bookkeeping: warns when the
/// loss is not logcosh (comparison runs do that deliberately).
inline TrainedModel fit_majority(const NetworkConfig& cfg, const Dataset& mix,
                                 std::vector<std::string>* warnings = nullptr) {
    if (cfg.loss.kind != LossKind::LogCosh && warnings)
        warnings->push_back(std::string("fit_majority: loss is ") + to_string(cfg.loss.kind) +
                            ", majority-branch behaviour is a logcosh property");
    return train(cfg, mix);
}

/// Samples are assigned to the branch whose value is nearest the sample's
/// target; the model's prediction only decides the majority branch id, by
/// vote over the multivalued grid.
inline BranchAssignment classify_by_branch(const TrainedModel& m, const Dataset& data,
                                           const BranchSpec& first, const BranchSpec& second,
                                           std::size_t grid_points_per_dim = 401,
                                           double region_epsilon = 0.0) {
    data.validate();
    BranchAssignment out;
    out.samples.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector x = data.features.row_vector(i);
        BranchAssignment::PerSample s;
        s.prediction = forward(m, x)[0];
        const double target = data.targets(i, 0);
        s.residual_first = target - first.eval(x);
        s.residual_second = target - second.eval(x);
        const double a1 = std::fabs(s.residual_first), a2 = std::fabs(s.residual_second);
        if (a1 < a2) s.assigned_branch = first.id;
        else if (a2 < a1) s.assigned_branch = second.id;
        else s.assigned_branch = std::min(first.id, second.id);
        ++out.branch_counts[s.assigned_branch];
        out.samples.push_back(s);
    }

    std::size_t votes_first = 0, votes_second = 0;
    for (const Vector& p : multivalued_grid(first, second, grid_points_per_dim, region_epsilon)) {
        const double pred = forward(m, p)[0];
        const double d1 = std::fabs(pred - first.eval(p));
        const double d2 = std::fabs(pred - second.eval(p));
        if (d1 < d2) ++votes_first;
        else if (d2 < d1) ++votes_second;
        else (first.id <= second.id ? votes_first : votes_second) += 1;
    }
    if (votes_first == votes_second)
        out.majority_branch_id = std::min(first.id, second.id);
    else
        out.majority_branch_id = votes_first > votes_second ? first.id : second.id;
    return out;
}

struct ProtocolConfig {
    double accuracy_band = 0.15;        // |mean signed error| / mean |target| within this = accurate
    double majority_threshold = 0.6;    // fraction above which a mixture has a majority branch
    double cross_fraction = 0.6;        // min fraction of cross-network over/under predictions
    double own_accuracy_fraction = 0.6; // min fraction of own units predicted accurately

    void validate() const {
        if (accuracy_band <= 0.0) throw std::invalid_argument("ProtocolConfig: accuracy_band must be positive");
        if (majority_threshold <= 0.5 || majority_threshold > 1.0)
            throw std::invalid_argument("ProtocolConfig: majority_threshold must lie in (0.5,1]");
        if (cross_fraction <= 0.0 || cross_fraction > 1.0 || own_accuracy_fraction <= 0.0 ||
            own_accuracy_fraction > 1.0)
            throw std::invalid_argument("ProtocolConfig: fractions must lie in (0,1]");
    }
};

enum class Decision { ClustersDetected, NoClusters, Inconclusive };

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::ClustersDetected: return "clusters_detected";
        case Decision::NoClusters: return "no_clusters";
        case Decision::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct CrossEvalReport {
    struct UnitResult {
        std::string unit;
        std::string population;        // "A" or "B"
        double mean_signed_error = 0.0;
        double mean_abs_target = 0.0;
        double relative_error = 0.0;   // mean signed error / mean |target|
        std::string verdict;           // over | under | accurate
    };
    struct Cell {
        std::size_t over = 0, under = 0, accurate = 0;
        std::size_t total() const { return over + under + accurate; }
    };

    // network name ("A", "B", "joint") -> population -> counts
    std::map<std::string, std::map<std::string, Cell>> cells;
    std::map<std::string, std::vector<UnitResult>> units;  // per network
    Decision decision = Decision::Inconclusive;
    std::string rule;  // which rule fired, in words
    ProtocolConfig config;
    // the numbers the rule looked at
    double own_accuracy_a = 0.0, own_accuracy_b = 0.0;
    double over_b_under_a_net = 0.0;   // fraction of B units over-predicted by net A
    double under_b_under_a_net = 0.0;  // fraction of B units under-predicted by net A
    double over_a_under_b_net = 0.0;
    double under_a_under_b_net = 0.0;
};

namespace detail {

struct UnitRows {
    std::string unit;
    std::string population;
    std::vector<std::size_t> rows;
};

inline Dataset subset(const Dataset& d, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.target_names = d.target_names;
    out.features = Matrix(rows.size(), d.features.cols);
    out.targets = Matrix(rows.size(), d.targets.cols);
    out.tags.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t j = 0; j < d.features.cols; ++j)
            out.features(k, j) = d.features(rows[k], j);
        for (std::size_t j = 0; j < d.targets.cols; ++j)
            out.targets(k, j) = d.targets(rows[k], j);
        out.tags.push_back(d.tags[rows[k]]);
    }
    return out;
}

}  // namespace detail

/// Trains three identically configured networks (population A rows only,
/// population B rows only, all rows), evaluates every unit under every
/// network, and decides whether the partition behaves like two clusters.
/// The decision rule is symmetric in A and B.
inline CrossEvalReport run_hidden_feature_protocol(
    const NetworkConfig& cfg, const Dataset& panel,
    const std::map<std::string, std::string>& partition, const ProtocolConfig& pcfg) {
    pcfg.validate();
    panel.validate();

    std::vector<detail::UnitRows> units;
    std::map<std::string, std::size_t> unit_index;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const std::string& id = panel.tags[i].district;
        if (id.empty())
            throw std::invalid_argument("protocol: panel rows must carry district ids");
        auto it = unit_index.find(id);
        if (it == unit_index.end()) {
            auto pit = partition.find(id);
            if (pit == partition.end())
                throw std::invalid_argument("protocol: no partition label for district '" + id + "'");
            if (pit->second != "A" && pit->second != "B")
                throw std::invalid_argument("protocol: partition label must be A or B, got '" +
                                            pit->second + "'");
            it = unit_index.emplace(id, units.size()).first;
            units.push_back({id, pit->second, {}});
        }
        units[it->second].rows.push_back(i);
    }

    std::vector<std::size_t> rows_a, rows_b;
    std::size_t n_a = 0, n_b = 0;
    for (const auto& u : units) {
        auto& rows = u.population == "A" ? rows_a : rows_b;
        (u.population == "A" ? n_a : n_b) += 1;
        rows.insert(rows.end(), u.rows.begin(), u.rows.end());
    }
    if (n_a < 2 || n_b < 2)
        throw std::invalid_argument(std::string("protocol: partition class ") +
                                    (n_a < 2 ? "A" : "B") + " needs at least 2 units");

    const Dataset data_a = detail::subset(panel, rows_a);
    const Dataset data_b = detail::subset(panel, rows_b);

    // identical config and seed for all three; only the data differs
    auto fut_a = std::async(std::launch::async, [&] { return train(cfg, data_a); });
    auto fut_b = std::async(std::launch::async, [&] { return train(cfg, data_b); });
    TrainedModel net_joint = train(cfg, panel);
    TrainedModel net_a = fut_a.get();
    TrainedModel net_b = fut_b.get();

    CrossEvalReport report;
    report.config = pcfg;

    const std::pair<std::string, const TrainedModel*> nets[] = {
        {"A", &net_a}, {"B", &net_b}, {"joint", &net_joint}};
    for (const auto& [name, net] : nets) {
        for (const auto& u : units) {
            CrossEvalReport::UnitResult res;
            res.unit = u.unit;
            res.population = u.population;
            double signed_sum = 0.0, abs_sum = 0.0;
            std::size_t count = 0;
            for (std::size_t r : u.rows) {
                const Vector pred = forward(*net, panel.features.row_vector(r));
                for (std::size_t j = 0; j < pred.size(); ++j) {
                    signed_sum += pred[j] - panel.targets(r, j);
                    abs_sum += std::fabs(panel.targets(r, j));
                    ++count;
                }
            }
            res.mean_signed_error = signed_sum / static_cast<double>(count);
            res.mean_abs_target = abs_sum / static_cast<double>(count);
            res.relative_error = res.mean_signed_error /
                                 std::max(res.mean_abs_target, 1e-300);
            if (res.relative_error > pcfg.accuracy_band) res.verdict = "over";
            else if (res.relative_error < -pcfg.accuracy_band) res.verdict = "under";
            else res.verdict = "accurate";
            auto& cell = report.cells[name][u.population];
            if (res.verdict == "over") ++cell.over;
            else if (res.verdict == "under") ++cell.under;
            else ++cell.accurate;
            report.units[name].push_back(std::move(res));
        }
    }

    auto frac = [&](const std::string& net, const std::string& pop, auto member) {
        const auto& cell = report.cells.at(net).at(pop);
        return static_cast<double>(cell.*member) / static_cast<double>(cell.total());
    };
    report.own_accuracy_a = frac("A", "A", &CrossEvalReport::Cell::accurate);
    report.own_accuracy_b = frac("B", "B", &CrossEvalReport::Cell::accurate);
    report.over_b_under_a_net = frac("A", "B", &CrossEvalReport::Cell::over);
    report.under_b_under_a_net = frac("A", "B", &CrossEvalReport::Cell::under);
    report.over_a_under_b_net = frac("B", "A", &CrossEvalReport::Cell::over);
    report.under_a_under_b_net = frac("B", "A", &CrossEvalReport::Cell::under);

    const bool own_ok = report.own_accuracy_a >= pcfg.own_accuracy_fraction &&
                        report.own_accuracy_b >= pcfg.own_accuracy_fraction;
    const bool asym_ab = report.over_b_under_a_net >= pcfg.cross_fraction &&
                         report.under_a_under_b_net >= pcfg.cross_fraction;
    const bool asym_ba = report.under_b_under_a_net >= pcfg.cross_fraction &&
                         report.over_a_under_b_net >= pcfg.cross_fraction;
    if (!own_ok) {
        report.decision = Decision::Inconclusive;
        report.rule = "own-network accuracy below threshold for at least one population";
    } else if (asym_ab || asym_ba) {
        report.decision = Decision::ClustersDetected;
        report.rule = asym_ab
                          ? "net A over-predicts B units and net B under-predicts A units, "
                            "with own-network accuracy for both"
                          : "net A under-predicts B units and net B over-predicts A units, "
                            "with own-network accuracy for both";
    } else {
        report.decision = Decision::NoClusters;
        report.rule = "own-network accuracy without cross-network asymmetry";
    }
    return report;
}

struct LossComparisonEntry {
    Loss loss;
    double final_train_loss = 0.0;
    double fraction_near_first = 0.0;   // grid fraction with prediction nearest branch 1
    double fraction_near_second = 0.0;
    double fraction_midband = 0.0;      // within +-10% of the gap around the midpoint
    double last10_prediction_variance = 0.0;  // epoch-to-epoch, averaged over the grid
};

/// Trains one model per config (identical except the loss) and reports the
/// proximity split plus the late-training oscillation diagnostic. Proximity
/// fractions are measured over the multivalued region; the oscillation
/// variance over the whole domain grid, where a converged smooth loss goes
/// quiet and a kinked one keeps jittering.
inline std::vector<LossComparisonEntry> compare_losses(
    const Dataset& mix, const std::vector<NetworkConfig>& cfgs, const BranchSpec& first,
    const BranchSpec& second, std::size_t grid_points_per_dim = 401,
    double region_epsilon = 0.0) {
    if (cfgs.empty()) throw std::invalid_argument("compare_losses: no configs");
    for (const auto& c : cfgs) {
        NetworkConfig a = c, b = cfgs.front();
        a.loss = b.loss = Loss::mse();
        const auto key = [](const NetworkConfig& k) {
            std::string s = std::to_string(k.input_dim) + "|" + std::to_string(k.batch_size) + "|" +
                            std::to_string(k.epochs) + "|" + std::to_string(k.seed) + "|" +
                            std::to_string(k.learn_rate_schedule.size());
            for (const auto& l : k.layers) s += "," + std::to_string(l.neurons);
            return s;
        };
        if (key(a) != key(b))
            throw std::invalid_argument("compare_losses: configs must be identical except the loss");
    }

    const auto full_grid = domain_grid(first, grid_points_per_dim);
    std::vector<std::size_t> region;  // indices of multivalued points
    for (std::size_t g = 0; g < full_grid.size(); ++g)
        if (std::fabs(first.eval(full_grid[g]) - second.eval(full_grid[g])) > region_epsilon)
            region.push_back(g);
    if (region.empty()) throw std::invalid_argument("compare_losses: branches never differ");

    std::vector<LossComparisonEntry> out;
    const std::size_t total_epochs = cfgs.front().epochs * cfgs.front().learn_rate_schedule.size();
    for (const auto& cfg : cfgs) {
        LossComparisonEntry e;
        e.loss = cfg.loss;
        std::vector<Vector> window;  // full-grid predictions for the last 10 epochs
        const auto on_epoch = [&](const EpochInfo& info) {
            if (info.epoch + 10 < total_epochs) return;
            Vector preds(full_grid.size());
            for (std::size_t g = 0; g < full_grid.size(); ++g)
                preds[g] = forward(info.model, full_grid[g])[0];
            window.push_back(std::move(preds));
        };
        const TrainedModel model = train(cfg, mix, on_epoch);
        e.final_train_loss = model.loss_trace.back();

        std::size_t near1 = 0, near2 = 0, mid = 0;
        for (std::size_t g : region) {
            const Vector& p = full_grid[g];
            const double f1 = first.eval(p), f2 = second.eval(p);
            const double pred = forward(model, p)[0];
            const double gap = std::fabs(f1 - f2);
            if (std::fabs(pred - 0.5 * (f1 + f2)) <= 0.1 * gap) ++mid;
            else if (std::fabs(pred - f1) < std::fabs(pred - f2)) ++near1;
            else ++near2;
        }
        const double gn = static_cast<double>(region.size());
        e.fraction_near_first = static_cast<double>(near1) / gn;
        e.fraction_near_second = static_cast<double>(near2) / gn;
        e.fraction_midband = static_cast<double>(mid) / gn;

        if (!window.empty()) {
            double var_sum = 0.0;
            const double wn = static_cast<double>(window.size());
            for (std::size_t g = 0; g < full_grid.size(); ++g) {
                double mean = 0.0;
                for (const auto& w : window) mean += w[g];
                mean /= wn;
                double var = 0.0;
                for (const auto& w : window) var += (w[g] - mean) * (w[g] - mean);
                var_sum += var / wn;
            }
            e.last10_prediction_variance = var_sum / static_cast<double>(full_grid.size());
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace branchnet
