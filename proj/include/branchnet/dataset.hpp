#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchnet/csv.hpp"
#include "branchnet/numerics.hpp"

namespace branchnet {

/// Per-sample metadata. Synthetic mixtures fill `branch`; panel designs fill
/// district/population_label/day. Unset members stay at their defaults and
/// serialize as empty fields.
struct SampleTag {
    int branch = -1;
    std::string district;
    std::string population_label;
    int day = -1;

    bool operator==(const SampleTag&) const = default;
};

struct Dataset {
    Matrix features;
    Matrix targets;
    std::vector<SampleTag> tags;
    std::vector<std::string> feature_names;
    std::vector<std::string> target_names;

    std::size_t size() const { return features.rows; }

    void validate() const {
        if (features.rows != targets.rows || features.rows != tags.size())
            throw std::invalid_argument("Dataset: row count mismatch between features/targets/tags");
        if (!feature_names.empty() && feature_names.size() != features.cols)
            throw std::invalid_argument("Dataset: feature name count mismatch");
        if (!target_names.empty() && target_names.size() != targets.cols)
            throw std::invalid_argument("Dataset: target name mismatch");
    }
};

namespace detail {
inline bool is_tag_column(const std::string& name) {
    return name == "branch" || name == "district" || name == "population_label" || name == "day";
}
}  // namespace detail

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
    d.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    bool any_branch = false, any_district = false, any_label = false, any_day = false;
    for (const auto& t : d.tags) {
        any_branch |= t.branch >= 0;
        any_district |= !t.district.empty();
        any_label |= !t.population_label.empty();
        any_day |= t.day >= 0;
    }
    for (std::size_t j = 0; j < d.features.cols; ++j) {
        if (j) out << ',';
        out << (j < d.feature_names.size() ? d.feature_names[j] : "x" + std::to_string(j));
    }
    for (std::size_t j = 0; j < d.targets.cols; ++j)
        out << ',' << (j < d.target_names.size() ? d.target_names[j] : "target" + std::to_string(j));
    if (any_branch) out << ",branch";
    if (any_district) out << ",district";
    if (any_label) out << ",population_label";
    if (any_day) out << ",day";
    out << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.features.cols; ++j) {
            if (j) out << ',';
            out << format_double(d.features(i, j));
        }
        for (std::size_t j = 0; j < d.targets.cols; ++j) out << ',' << format_double(d.targets(i, j));
        const auto& t = d.tags[i];
        if (any_branch) out << ',' << (t.branch >= 0 ? std::to_string(t.branch) : "");
        if (any_district) out << ',' << t.district;
        if (any_label) out << ',' << t.population_label;
        if (any_day) out << ',' << (t.day >= 0 ? std::to_string(t.day) : "");
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

/// Columns named target* are targets, the reserved tag names are tags,
/// everything else is a feature.
inline Dataset read_dataset_csv(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    Dataset d;
    std::vector<std::size_t> fcols, tcols;
    std::size_t c_branch = SIZE_MAX, c_district = SIZE_MAX, c_label = SIZE_MAX, c_day = SIZE_MAX;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        const std::string& h = t.header[j];
        if (h == "branch") c_branch = j;
        else if (h == "district") c_district = j;
        else if (h == "population_label") c_label = j;
        else if (h == "day") c_day = j;
        else if (h.rfind("target", 0) == 0) {
            tcols.push_back(j);
            d.target_names.push_back(h);
        } else {
            fcols.push_back(j);
            d.feature_names.push_back(h);
        }
    }
    if (tcols.empty()) throw std::runtime_error(path + ": no target columns");
    d.features = Matrix(t.rows.size(), fcols.size());
    d.targets = Matrix(t.rows.size(), tcols.size());
    d.tags.resize(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string ctx = path + " row " + std::to_string(i + 2);
        for (std::size_t j = 0; j < fcols.size(); ++j)
            d.features(i, j) = parse_double(row[fcols[j]], ctx);
        for (std::size_t j = 0; j < tcols.size(); ++j)
            d.targets(i, j) = parse_double(row[tcols[j]], ctx);
        auto& tag = d.tags[i];
        if (c_branch != SIZE_MAX && !row[c_branch].empty())
            tag.branch = static_cast<int>(parse_long(row[c_branch], ctx));
        if (c_district != SIZE_MAX) tag.district = row[c_district];
        if (c_label != SIZE_MAX) tag.population_label = row[c_label];
        if (c_day != SIZE_MAX && !row[c_day].empty())
            tag.day = static_cast<int>(parse_long(row[c_day], ctx));
    }
    return d;
}

}  // namespace branchnet
