#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "branchnet/csv.hpp"
#include "branchnet/dataset.hpp"
#include "branchnet/numerics.hpp"

namespace branchnet {

/// Which three age bands the band columns mean. Pure bookkeeping: the math
/// never depends on it, but configs and reports record it.
enum class AgeBanding { Y0_30_65, Y0_34_79 };

inline const char* to_string(AgeBanding b) {
    return b == AgeBanding::Y0_30_65 ? "0-30/30-65/65+" : "0-34/35-79/80+";
}

struct DistrictRecord {
    std::string id;
    double population_total = 0.0;
    double area_km2 = 0.0;
    double income = 0.0;                     // per inhabitant
    std::array<double, 3> age_group_pops{};  // banding per strategy
    std::string population_label;            // "A", "B" or empty
};

struct CaseSeries {
    std::string district_id;
    std::vector<double> new_cases;       // day-indexed from day 0
    std::vector<double> new_deaths;
    std::vector<double> new_recoveries;
    bool has_band_data = false;
    std::array<std::vector<double>, 3> band_cases{};
    std::array<std::vector<double>, 3> band_deaths{};

    std::size_t days() const { return new_cases.size(); }
};

struct IngestReport {
    struct RejectedRow {
        std::size_t line;  // 1-based line in the source file
        std::string reason;
    };
    std::vector<std::string> warnings;
    std::vector<RejectedRow> rejected;
};

struct Panel {
    std::vector<DistrictRecord> records;
    std::vector<CaseSeries> series;  // parallel to records
    IngestReport report;

    std::size_t n_districts() const { return records.size(); }
};

inline double density(const DistrictRecord& r) {
    if (r.area_km2 <= 0.0) throw std::invalid_argument("density: area must be positive");
    return r.population_total / r.area_km2;
}

inline std::vector<double> cumulative(std::span<const double> daily) {
    std::vector<double> out(daily.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < daily.size(); ++i) {
        acc += daily[i];
        out[i] = acc;
    }
    return out;
}

/// Smallest day with cumulative cases / population >= 1/100000.
inline std::size_t first_day(const CaseSeries& s, double population) {
    if (population <= 0.0) throw std::invalid_argument("first_day: population must be positive");
    double cum = 0.0;
    for (std::size_t d = 0; d < s.new_cases.size(); ++d) {
        cum += s.new_cases[d];
        if (cum * 100000.0 >= population) return d;
    }
    throw std::runtime_error("first_day: criterion never met for district '" + s.district_id + "'");
}

struct ActiveCases {
    std::vector<double> values;
    std::vector<std::size_t> clamped_days;  // days where the raw value went negative
};

/// active(d) = cum_cases(d) - cum_deaths(d) - cum_recoveries(d-14),
/// recoveries before day 0 count as zero; clamped at zero.
inline ActiveCases active_cases(const CaseSeries& s) {
    const auto cc = cumulative(s.new_cases);
    const auto cd = cumulative(s.new_deaths);
    const auto cr = cumulative(s.new_recoveries);
    ActiveCases out;
    out.values.resize(s.days());
    for (std::size_t d = 0; d < s.days(); ++d) {
        const double shifted_recov = d >= 14 ? cr[d - 14] : 0.0;
        double v = cc[d] - cd[d] - shifted_recov;
        if (v < 0.0) {
            out.clamped_days.push_back(d);
            v = 0.0;
        }
        out.values[d] = v;
    }
    return out;
}

/// Mean of the 7 preceding days; days before 0 count as zero, so the window
/// always divides by 7.
inline double trailing_mean7(std::span<const double> series, std::size_t d) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= 7; ++k) {
        if (d >= k) {
            const std::size_t idx = d - k;
            if (idx < series.size()) acc += series[idx];
        }
    }
    return acc / 7.0;
}

enum class FeatureStrategyKind {
    AccumulatedAgeGroups,
    AccumulatedInfectedAges,
    TimeSeriesCumulative,
    TimeSeriesFirstDay,
    TimeSeriesPast7,
    TimeSeriesLogCases,
    TimeSeriesLogMidAge,
    RelativeProportions,
    RelativeMidAge,
};

inline const char* to_string(FeatureStrategyKind k) {
    switch (k) {
        case FeatureStrategyKind::AccumulatedAgeGroups: return "accumulated_age_groups";
        case FeatureStrategyKind::AccumulatedInfectedAges: return "accumulated_infected_ages";
        case FeatureStrategyKind::TimeSeriesCumulative: return "timeseries_cumulative";
        case FeatureStrategyKind::TimeSeriesFirstDay: return "timeseries_first_day";
        case FeatureStrategyKind::TimeSeriesPast7: return "timeseries_past7";
        case FeatureStrategyKind::TimeSeriesLogCases: return "timeseries_log_cases";
        case FeatureStrategyKind::TimeSeriesLogMidAge: return "timeseries_log_mid_age";
        case FeatureStrategyKind::RelativeProportions: return "relative_proportions";
        case FeatureStrategyKind::RelativeMidAge: return "relative_mid_age";
    }
    return "?";
}

inline FeatureStrategyKind feature_strategy_kind_from_string(const std::string& s) {
    for (auto k : {FeatureStrategyKind::AccumulatedAgeGroups, FeatureStrategyKind::AccumulatedInfectedAges,
                   FeatureStrategyKind::TimeSeriesCumulative, FeatureStrategyKind::TimeSeriesFirstDay,
                   FeatureStrategyKind::TimeSeriesPast7, FeatureStrategyKind::TimeSeriesLogCases,
                   FeatureStrategyKind::TimeSeriesLogMidAge, FeatureStrategyKind::RelativeProportions,
                   FeatureStrategyKind::RelativeMidAge})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown feature strategy '" + s + "'");
}

enum class TargetKind { Cases, Deaths, ActiveCases };

inline const char* to_string(TargetKind t) {
    switch (t) {
        case TargetKind::Cases: return "cases";
        case TargetKind::Deaths: return "deaths";
        case TargetKind::ActiveCases: return "active_cases";
    }
    return "?";
}

struct FeatureStrategy {
    FeatureStrategyKind kind = FeatureStrategyKind::TimeSeriesFirstDay;
    TargetKind target = TargetKind::Cases;       // strategies whose diagram says Cases\Deaths
    AgeBanding banding = AgeBanding::Y0_34_79;
    bool include_partition_label = false;        // the validation variant: feed the label too
    std::vector<std::string> exclude_districts;  // e.g. the outsized cities
};

namespace detail {

inline bool is_time_series(FeatureStrategyKind k) {
    return k != FeatureStrategyKind::AccumulatedAgeGroups &&
           k != FeatureStrategyKind::AccumulatedInfectedAges;
}

inline bool needs_first_day(FeatureStrategyKind k) {
    switch (k) {
        case FeatureStrategyKind::TimeSeriesFirstDay:
        case FeatureStrategyKind::TimeSeriesPast7:
        case FeatureStrategyKind::TimeSeriesLogCases:
        case FeatureStrategyKind::TimeSeriesLogMidAge:
        case FeatureStrategyKind::RelativeProportions:
        case FeatureStrategyKind::RelativeMidAge:
            return true;
        default:
            return false;
    }
}

inline std::array<std::string, 3> band_names(AgeBanding b) {
    if (b == AgeBanding::Y0_30_65) return {"pop_0_30", "pop_30_65", "pop_65_plus"};
    return {"pop_0_34", "pop_35_79", "pop_80_plus"};
}

}  // namespace detail

/// One row per district for accumulated strategies, one per (district, day)
/// for time-series strategies. Features and targets follow the strategy's
/// mapping; log targets replace zero cumulative cases by 1, zero relative
/// cases by the first-day relative value.
inline Dataset build_design(const Panel& panel, const FeatureStrategy& strategy) {
    using K = FeatureStrategyKind;
    const K kind = strategy.kind;
    Dataset out;
    const auto bands = detail::band_names(strategy.banding);

    switch (kind) {
        case K::AccumulatedAgeGroups:
            out.feature_names = {"income", "density", bands[0], bands[1], bands[2]};
            out.target_names = {strategy.target == TargetKind::Deaths ? "target_deaths"
                                                                      : "target_cases"};
            break;
        case K::AccumulatedInfectedAges:
            out.feature_names = {"income", "density", bands[0], bands[1], bands[2]};
            out.target_names = strategy.target == TargetKind::Deaths
                                   ? std::vector<std::string>{"target_deaths_band1",
                                                              "target_deaths_band2",
                                                              "target_deaths_band3"}
                                   : std::vector<std::string>{"target_cases_band1",
                                                              "target_cases_band2",
                                                              "target_cases_band3"};
            break;
        case K::TimeSeriesCumulative:
            out.feature_names = {"income", "density", bands[0], bands[1], bands[2], "day_index"};
            out.target_names = {strategy.target == TargetKind::Deaths ? "target_deaths"
                                                                      : "target_cases"};
            break;
        case K::TimeSeriesFirstDay:
            out.feature_names = {"income", "density", bands[0], bands[1], bands[2],
                                 "first_day", "day_index"};
            out.target_names = {strategy.target == TargetKind::Deaths       ? "target_deaths"
                                : strategy.target == TargetKind::ActiveCases ? "target_active"
                                                                             : "target_cases"};
            break;
        case K::TimeSeriesPast7:
            out.feature_names = {"income", "density", bands[0], bands[1], bands[2],
                                 "first_day", "mean7_active", "day_index"};
            out.target_names = {"target_active"};
            break;
        case K::TimeSeriesLogCases:
            out.feature_names = {"income", "density", bands[0], bands[1], bands[2],
                                 "first_day", "day_index"};
            out.target_names = {"target_log_cases"};
            break;
        case K::TimeSeriesLogMidAge:
            out.feature_names = {"income", "density", bands[1], "first_day", "day_index"};
            out.target_names = {"target_log_cases"};
            break;
        case K::RelativeProportions:
            // the third proportion is redundant and dropped
            out.feature_names = {"income", "density", "rel_" + bands[0], "rel_" + bands[1],
                                 "first_day", "day_index"};
            out.target_names = {"target_log_relative_cases"};
            break;
        case K::RelativeMidAge:
            out.feature_names = {"income", "density", "rel_" + bands[1], "first_day", "day_index"};
            out.target_names = {"target_log_relative_cases"};
            break;
    }
    if (strategy.include_partition_label) out.feature_names.push_back("partition_label");

    std::vector<Vector> feature_rows;
    std::vector<Vector> target_rows;
    std::vector<SampleTag> tags;

    for (std::size_t di = 0; di < panel.records.size(); ++di) {
        const DistrictRecord& r = panel.records[di];
        const CaseSeries& s = panel.series[di];
        if (std::find(strategy.exclude_districts.begin(), strategy.exclude_districts.end(), r.id) !=
            strategy.exclude_districts.end())
            continue;

        const bool needs_bands =
            kind == K::AccumulatedInfectedAges || kind == K::RelativeMidAge;
        if (needs_bands && !s.has_band_data)
            throw std::runtime_error(std::string("build_design: strategy ") + to_string(kind) +
                                     " requires per-band series, missing for district '" + r.id +
                                     "'");

        const double dens = density(r);
        const double label_feature = r.population_label == "A"   ? 0.0
                                     : r.population_label == "B" ? 1.0
                                                                 : -1.0;
        if (strategy.include_partition_label && label_feature < 0.0)
            throw std::runtime_error(
                "build_design: include_partition_label set but district '" + r.id +
                "' has no population label");

        const auto cum_cases = cumulative(s.new_cases);
        const auto cum_deaths = cumulative(s.new_deaths);

        auto push_row = [&](Vector f, Vector t, int day) {
            if (strategy.include_partition_label) f.push_back(label_feature);
            feature_rows.push_back(std::move(f));
            target_rows.push_back(std::move(t));
            SampleTag tag;
            tag.district = r.id;
            tag.population_label = r.population_label;
            tag.day = day;
            tags.push_back(std::move(tag));
        };

        if (kind == K::AccumulatedAgeGroups || kind == K::AccumulatedInfectedAges) {
            if (s.days() == 0)
                throw std::runtime_error("build_design: empty series for district '" + r.id + "'");
            Vector f{r.income, dens, r.age_group_pops[0], r.age_group_pops[1], r.age_group_pops[2]};
            if (kind == K::AccumulatedAgeGroups) {
                const auto& cum = strategy.target == TargetKind::Deaths ? cum_deaths : cum_cases;
                push_row(std::move(f), {cum.back()}, -1);
            } else {
                Vector t(3);
                for (int b = 0; b < 3; ++b) {
                    const auto& daily = strategy.target == TargetKind::Deaths ? s.band_deaths[b]
                                                                              : s.band_cases[b];
                    const auto cum = cumulative(daily);
                    t[b] = cum.empty() ? 0.0 : cum.back();
                }
                push_row(std::move(f), std::move(t), -1);
            }
            continue;
        }

        // time-series strategies
        const std::size_t fd = detail::needs_first_day(kind) ? first_day(s, r.population_total) : 0;
        std::vector<double> active;
        if (kind == K::TimeSeriesPast7 ||
            (kind == K::TimeSeriesFirstDay && strategy.target == TargetKind::ActiveCases)) {
            if (s.new_recoveries.empty() && s.days() > 0)
                throw std::runtime_error(
                    "build_design: active-cases strategies need a recoveries series, missing for "
                    "district '" + r.id + "'");
            active = active_cases(s).values;
        }
        const double first_rel = detail::needs_first_day(kind) && kind == K::RelativeProportions
                                     ? cum_cases[fd] / r.population_total
                                     : 0.0;
        double first_rel_band = 0.0;
        if (kind == K::RelativeMidAge) {
            const auto cum_band = cumulative(s.band_cases[1]);
            // first strictly positive day of the band series anchors the zero replacement
            std::size_t fdb = fd;
            while (fdb < cum_band.size() && cum_band[fdb] <= 0.0) ++fdb;
            if (fdb == cum_band.size())
                throw std::runtime_error("build_design: mid-age band has no cases for district '" +
                                         r.id + "'");
            first_rel_band = cum_band[fdb] / r.age_group_pops[1];
        }

        for (std::size_t d = 0; d < s.days(); ++d) {
            Vector f;
            Vector t;
            const double day = static_cast<double>(d);
            switch (kind) {
                case K::TimeSeriesCumulative:
                    f = {r.income, dens, r.age_group_pops[0], r.age_group_pops[1],
                         r.age_group_pops[2], day};
                    t = {strategy.target == TargetKind::Deaths ? cum_deaths[d] : cum_cases[d]};
                    break;
                case K::TimeSeriesFirstDay:
                    f = {r.income, dens, r.age_group_pops[0], r.age_group_pops[1],
                         r.age_group_pops[2], static_cast<double>(fd), day};
                    t = {strategy.target == TargetKind::Deaths        ? cum_deaths[d]
                         : strategy.target == TargetKind::ActiveCases ? active[d]
                                                                      : cum_cases[d]};
                    break;
                case K::TimeSeriesPast7:
                    f = {r.income, dens, r.age_group_pops[0], r.age_group_pops[1],
                         r.age_group_pops[2], static_cast<double>(fd),
                         trailing_mean7(active, d), day};
                    t = {active[d]};
                    break;
                case K::TimeSeriesLogCases:
                    f = {r.income, dens, r.age_group_pops[0], r.age_group_pops[1],
                         r.age_group_pops[2], static_cast<double>(fd), day};
                    t = {std::log(std::max(cum_cases[d], 1.0))};
                    break;
                case K::TimeSeriesLogMidAge:
                    f = {r.income, dens, r.age_group_pops[1], static_cast<double>(fd), day};
                    t = {std::log(std::max(cum_cases[d], 1.0))};
                    break;
                case K::RelativeProportions: {
                    const double rp0 = r.age_group_pops[0] / r.population_total;
                    const double rp1 = r.age_group_pops[1] / r.population_total;
                    const double rel = cum_cases[d] / r.population_total;
                    f = {r.income, dens, rp0, rp1, static_cast<double>(fd), day};
                    t = {std::log(rel > 0.0 ? rel : first_rel)};
                    break;
                }
                case K::RelativeMidAge: {
                    const double rp1 = r.age_group_pops[1] / r.population_total;
                    const auto cum_band = cumulative(s.band_cases[1]);
                    const double rel = cum_band[d] / r.age_group_pops[1];
                    f = {r.income, dens, rp1, static_cast<double>(fd), day};
                    t = {std::log(rel > 0.0 ? rel : first_rel_band)};
                    break;
                }
                default:
                    break;
            }
            push_row(std::move(f), std::move(t), static_cast<int>(d));
        }
    }

    if (feature_rows.empty()) throw std::runtime_error("build_design: no rows produced");
    out.features = Matrix(feature_rows.size(), feature_rows.front().size());
    out.targets = Matrix(target_rows.size(), target_rows.front().size());
    for (std::size_t i = 0; i < feature_rows.size(); ++i) {
        for (std::size_t j = 0; j < feature_rows[i].size(); ++j)
            out.features(i, j) = feature_rows[i][j];
        for (std::size_t j = 0; j < target_rows[i].size(); ++j) out.targets(i, j) = target_rows[i][j];
    }
    out.tags = std::move(tags);
    out.validate();
    return out;
}

struct CorrelationResult {
    Matrix matrix;
    std::vector<std::string> labels;
    std::vector<std::string> warnings;
};

/// Pearson correlation over all feature and target columns, computed from
/// running sums. Constant columns correlate 0 with everything by convention
/// (diagonal stays 1) and are reported.
inline CorrelationResult correlation_matrix(const Dataset& d) {
    d.validate();
    const std::size_t n = d.size();
    if (n < 2) throw std::invalid_argument("correlation_matrix: need at least 2 rows");
    const std::size_t nf = d.features.cols, nt = d.targets.cols, m = nf + nt;

    auto value = [&](std::size_t row, std::size_t col) {
        return col < nf ? d.features(row, col) : d.targets(row, col - nf);
    };

    CorrelationResult res;
    res.labels.reserve(m);
    for (std::size_t j = 0; j < nf; ++j)
        res.labels.push_back(j < d.feature_names.size() ? d.feature_names[j]
                                                        : "x" + std::to_string(j));
    for (std::size_t j = 0; j < nt; ++j)
        res.labels.push_back(j < d.target_names.size() ? d.target_names[j]
                                                       : "target" + std::to_string(j));

    Vector sum(m, 0.0), sumsq(m, 0.0);
    Matrix cross(m, m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < m; ++a) {
            const double va = value(i, a);
            sum[a] += va;
            sumsq[a] += va * va;
            for (std::size_t b = a + 1; b < m; ++b) cross(a, b) += va * value(i, b);
        }
    }
    const double dn = static_cast<double>(n);
    Vector var(m);
    for (std::size_t a = 0; a < m; ++a) {
        var[a] = sumsq[a] - sum[a] * sum[a] / dn;
        if (var[a] <= 0.0) res.warnings.push_back("constant column '" + res.labels[a] + "'");
    }
    res.matrix = Matrix(m, m);
    for (std::size_t a = 0; a < m; ++a) res.matrix(a, a) = 1.0;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            double r = 0.0;
            if (var[a] > 0.0 && var[b] > 0.0) {
                r = (cross(a, b) - sum[a] * sum[b] / dn) / std::sqrt(var[a] * var[b]);
                r = std::clamp(r, -1.0, 1.0);
            }
            res.matrix(a, b) = res.matrix(b, a) = r;
        }
    return res;
}

/// Synthetic district panel with logistic-growth case curves. Districts
/// labeled 'A' (label_fraction of them) carry capacity scaled by
/// (1 + effect_size); 'B' districts are the baseline. Fully seeded.
inline Panel generate_synthetic_panel(std::size_t n_districts, std::size_t n_days,
                                      double effect_size, double label_fraction,
                                      std::uint64_t seed) {
    if (n_districts < 4)
        throw std::invalid_argument("generate_synthetic_panel: need at least 4 districts");
    if (label_fraction < 0.0 || label_fraction > 1.0)
        throw std::invalid_argument("generate_synthetic_panel: label_fraction must lie in [0,1]");
    Rng rng(seed);
    Panel panel;

    std::vector<std::size_t> order(n_districts);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const std::size_t n_labeled = static_cast<std::size_t>(
        std::llround(label_fraction * static_cast<double>(n_districts)));
    std::vector<bool> labeled(n_districts, false);
    for (std::size_t k = 0; k < n_labeled; ++k) labeled[order[k]] = true;

    for (std::size_t i = 0; i < n_districts; ++i) {
        DistrictRecord r;
        char buf[32];
        std::snprintf(buf, sizeof buf, "D%03u", static_cast<unsigned>(i));
        r.id = buf;
        r.population_total = std::round(std::exp(rng.normal(std::log(1e5), 0.5)));
        r.area_km2 = std::round(std::exp(rng.normal(std::log(1000.0), 0.6)));
        r.income = std::round(std::exp(rng.normal(std::log(22000.0), 0.15)));
        double props[3] = {0.35 + rng.normal(0.0, 0.02), 0.45 + rng.normal(0.0, 0.02),
                           0.20 + rng.normal(0.0, 0.02)};
        double psum = 0.0;
        for (double& p : props) {
            p = std::fabs(p);
            psum += p;
        }
        double assigned = 0.0;
        for (int b = 0; b < 2; ++b) {
            r.age_group_pops[b] = std::round(r.population_total * props[b] / psum);
            assigned += r.age_group_pops[b];
        }
        r.age_group_pops[2] = r.population_total - assigned;
        r.population_label = labeled[i] ? "A" : "B";

        CaseSeries s;
        s.district_id = r.id;
        const double capacity = 0.002 * r.population_total *
                                (1.0 + (labeled[i] ? effect_size : 0.0)) *
                                std::exp(rng.normal(0.0, 0.05));
        const double rate = rng.uniform(0.10, 0.15);
        const double midpoint = rng.uniform(25.0, 45.0);
        double prev_cum = 0.0, prev_deaths = 0.0, prev_recov = 0.0;
        std::vector<double> cum(n_days);
        for (std::size_t d = 0; d < n_days; ++d) {
            cum[d] = std::round(capacity /
                                (1.0 + std::exp(-rate * (static_cast<double>(d) - midpoint))));
            s.new_cases.push_back(cum[d] - prev_cum);
            prev_cum = cum[d];
            const double cum_d = d >= 10 ? std::floor(0.02 * cum[d - 10]) : 0.0;
            s.new_deaths.push_back(cum_d - prev_deaths);
            prev_deaths = cum_d;
            const double cum_r = d >= 14 ? std::floor(0.95 * cum[d - 14]) : 0.0;
            s.new_recoveries.push_back(cum_r - prev_recov);
            prev_recov = cum_r;
        }
        panel.records.push_back(std::move(r));
        panel.series.push_back(std::move(s));
    }
    return panel;
}

inline void write_panel_csv(const Panel& panel, const std::string& districts_path,
                            const std::string& series_path) {
    std::ofstream dout(districts_path);
    if (!dout) throw std::runtime_error("cannot write " + districts_path);
    dout << "id,population,area_km2,income,pop_band1,pop_band2,pop_band3,label\n";
    for (const auto& r : panel.records) {
        dout << r.id << ',' << format_double(r.population_total) << ','
             << format_double(r.area_km2) << ',' << format_double(r.income) << ','
             << format_double(r.age_group_pops[0]) << ',' << format_double(r.age_group_pops[1])
             << ',' << format_double(r.age_group_pops[2]) << ',' << r.population_label << '\n';
    }
    if (!dout) throw std::runtime_error("write failed for " + districts_path);

    std::ofstream sout(series_path);
    if (!sout) throw std::runtime_error("cannot write " + series_path);
    const bool bands = std::any_of(panel.series.begin(), panel.series.end(),
                                   [](const CaseSeries& s) { return s.has_band_data; });
    sout << "id,day,new_cases,new_deaths,new_recoveries";
    if (bands)
        sout << ",band1_cases,band2_cases,band3_cases,band1_deaths,band2_deaths,band3_deaths";
    sout << '\n';
    for (const auto& s : panel.series) {
        for (std::size_t d = 0; d < s.days(); ++d) {
            sout << s.district_id << ',' << d << ',' << format_double(s.new_cases[d]) << ','
                 << format_double(s.new_deaths[d]) << ',' << format_double(s.new_recoveries[d]);
            if (bands) {
                for (int b = 0; b < 3; ++b)
                    sout << ',' << format_double(s.has_band_data ? s.band_cases[b][d] : 0.0);
                for (int b = 0; b < 3; ++b)
                    sout << ',' << format_double(s.has_band_data ? s.band_deaths[b][d] : 0.0);
            }
            sout << '\n';
        }
    }
    if (!sout) throw std::runtime_error("write failed for " + series_path);
}

/// Reads and validates the two-file panel schema. Rows violating invariants
/// are rejected and named in the report; districts without series (and
/// series without districts) drop with a warning.
inline Panel ingest_panel(const std::string& districts_path, const std::string& series_path) {
    Panel panel;
    IngestReport& report = panel.report;

    const CsvTable dt = read_csv_file(districts_path);
    const std::size_t c_id = dt.column("id"), c_pop = dt.column("population"),
                      c_area = dt.column("area_km2"), c_income = dt.column("income"),
                      c_b1 = dt.column("pop_band1"), c_b2 = dt.column("pop_band2"),
                      c_b3 = dt.column("pop_band3"), c_label = dt.column("label");

    std::map<std::string, DistrictRecord> records;
    std::vector<std::string> record_order;
    for (std::size_t i = 0; i < dt.rows.size(); ++i) {
        const auto& row = dt.rows[i];
        const std::size_t line = i + 2;
        const std::string ctx = districts_path + " line " + std::to_string(line);
        DistrictRecord r;
        r.id = row[c_id];
        if (r.id.empty()) {
            report.rejected.push_back({line, "empty district id"});
            continue;
        }
        if (records.count(r.id))
            throw std::runtime_error(districts_path + ": duplicate district id '" + r.id + "'");
        r.population_total = parse_double(row[c_pop], ctx);
        r.area_km2 = parse_double(row[c_area], ctx);
        r.income = parse_double(row[c_income], ctx);
        r.age_group_pops = {parse_double(row[c_b1], ctx), parse_double(row[c_b2], ctx),
                            parse_double(row[c_b3], ctx)};
        r.population_label = row[c_label];
        if (r.area_km2 <= 0.0) {
            report.rejected.push_back({line, "district '" + r.id + "': area must be positive"});
            continue;
        }
        if (r.income <= 0.0) {
            report.rejected.push_back({line, "district '" + r.id + "': income must be positive"});
            continue;
        }
        if (!r.population_label.empty() && r.population_label != "A" && r.population_label != "B") {
            report.rejected.push_back(
                {line, "district '" + r.id + "': label must be A, B or empty"});
            continue;
        }
        const double band_sum =
            r.age_group_pops[0] + r.age_group_pops[1] + r.age_group_pops[2];
        if (std::fabs(band_sum - r.population_total) > 0.005 * r.population_total)
            report.warnings.push_back("district '" + r.id + "': age bands sum to " +
                                      format_double(band_sum) + ", population is " +
                                      format_double(r.population_total));
        record_order.push_back(r.id);
        records.emplace(r.id, std::move(r));
    }

    const CsvTable st = read_csv_file(series_path);
    if (st.rows.empty()) throw std::runtime_error(series_path + ": no series rows");
    const std::size_t s_id = st.column("id"), s_day = st.column("day"),
                      s_cases = st.column("new_cases"), s_deaths = st.column("new_deaths"),
                      s_recov = st.column("new_recoveries");
    const bool has_bands = st.has_column("band1_cases");
    std::array<std::size_t, 3> sb_cases{}, sb_deaths{};
    if (has_bands) {
        for (int b = 0; b < 3; ++b) {
            sb_cases[b] = st.column("band" + std::to_string(b + 1) + "_cases");
            sb_deaths[b] = st.column("band" + std::to_string(b + 1) + "_deaths");
        }
    }

    std::map<std::string, CaseSeries> series;
    std::vector<std::string> unknown_ids;
    for (std::size_t i = 0; i < st.rows.size(); ++i) {
        const auto& row = st.rows[i];
        const std::size_t line = i + 2;
        const std::string ctx = series_path + " line " + std::to_string(line);
        const std::string& id = row[s_id];
        if (!records.count(id)) {
            if (std::find(unknown_ids.begin(), unknown_ids.end(), id) == unknown_ids.end())
                unknown_ids.push_back(id);
            continue;
        }
        const long day = parse_long(row[s_day], ctx);
        if (day < 0) {
            report.rejected.push_back({line, "negative day index"});
            continue;
        }
        const double nc = parse_double(row[s_cases], ctx);
        const double nd = parse_double(row[s_deaths], ctx);
        const double nr = parse_double(row[s_recov], ctx);
        if (nc < 0.0 || nd < 0.0 || nr < 0.0) {
            report.rejected.push_back({line, "district '" + id + "': negative daily count"});
            continue;
        }
        CaseSeries& s = series[id];
        s.district_id = id;
        const std::size_t need = static_cast<std::size_t>(day) + 1;
        auto grow = [&](std::vector<double>& v) { if (v.size() < need) v.resize(need, 0.0); };
        grow(s.new_cases);
        grow(s.new_deaths);
        grow(s.new_recoveries);
        s.new_cases[day] += nc;
        s.new_deaths[day] += nd;
        s.new_recoveries[day] += nr;
        if (has_bands) {
            s.has_band_data = true;
            for (int b = 0; b < 3; ++b) {
                grow(s.band_cases[b]);
                grow(s.band_deaths[b]);
                s.band_cases[b][day] += parse_double(row[sb_cases[b]], ctx);
                s.band_deaths[b][day] += parse_double(row[sb_deaths[b]], ctx);
            }
        }
    }
    for (const auto& id : unknown_ids)
        report.warnings.push_back("series for unknown district '" + id + "' dropped");

    for (const auto& id : record_order) {
        auto it = series.find(id);
        if (it == series.end()) {
            report.warnings.push_back("district '" + id + "' has no series rows, dropped");
            continue;
        }
        // gap days inside a series are zero-filled; align band arrays
        CaseSeries& s = it->second;
        if (s.has_band_data)
            for (int b = 0; b < 3; ++b) {
                s.band_cases[b].resize(s.new_cases.size(), 0.0);
                s.band_deaths[b].resize(s.new_cases.size(), 0.0);
            }
        panel.records.push_back(records.at(id));
        panel.series.push_back(std::move(s));
    }
    return panel;
}

}  // namespace branchnet
