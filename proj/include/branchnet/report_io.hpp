#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "branchnet/branchclass.hpp"

namespace branchnet {

inline nlohmann::ordered_json to_json(const CrossEvalReport& r) {
    nlohmann::ordered_json j;
    j["decision"] = to_string(r.decision);
    j["rule"] = r.rule;
    j["thresholds"] = {{"accuracy_band", r.config.accuracy_band},
                       {"cross_fraction", r.config.cross_fraction},
                       {"own_accuracy_fraction", r.config.own_accuracy_fraction}};
    j["notes"] = {"accuracy_band quantifies the qualitative over/under judgement; it is an "
                  "artifact decision, not a value from the source data",
                  "relative_error = mean signed error / mean absolute target, per unit"};
    j["fractions"] = {{"own_accuracy_a", r.own_accuracy_a},
                      {"own_accuracy_b", r.own_accuracy_b},
                      {"b_units_over_predicted_by_net_a", r.over_b_under_a_net},
                      {"b_units_under_predicted_by_net_a", r.under_b_under_a_net},
                      {"a_units_over_predicted_by_net_b", r.over_a_under_b_net},
                      {"a_units_under_predicted_by_net_b", r.under_a_under_b_net}};
    for (const auto& [net, pops] : r.cells) {
        for (const auto& [pop, cell] : pops) {
            j["counts"][net][pop] = {{"over", cell.over},
                                     {"under", cell.under},
                                     {"accurate", cell.accurate}};
        }
    }
    for (const auto& [net, list] : r.units) {
        auto& arr = j["units"][net];
        for (const auto& u : list) {
            arr.push_back({{"unit", u.unit},
                           {"population", u.population},
                           {"mean_signed_error", u.mean_signed_error},
                           {"mean_abs_target", u.mean_abs_target},
                           {"relative_error", u.relative_error},
                           {"verdict", u.verdict}});
        }
    }
    return j;
}

inline std::string to_text_table(const CrossEvalReport& r) {
    std::ostringstream s;
    s << "decision: " << to_string(r.decision) << "\n";
    s << "rule:     " << r.rule << "\n\n";
    s << "network  population  over  under  accurate\n";
    for (const auto& [net, pops] : r.cells)
        for (const auto& [pop, cell] : pops) {
            s << std::left << std::setw(9) << net << std::setw(12) << pop << std::right
              << std::setw(5) << cell.over << std::setw(7) << cell.under << std::setw(10)
              << cell.accurate << "\n";
        }
    s << std::setprecision(4);
    s << "\nown-network accuracy: A " << r.own_accuracy_a << ", B " << r.own_accuracy_b << "\n";
    s << "net A on B units: over " << r.over_b_under_a_net << ", under " << r.under_b_under_a_net
      << "\n";
    s << "net B on A units: over " << r.over_a_under_b_net << ", under " << r.under_a_under_b_net
      << "\n";
    s << "thresholds: accuracy_band " << r.config.accuracy_band << ", cross_fraction "
      << r.config.cross_fraction << ", own_accuracy_fraction " << r.config.own_accuracy_fraction
      << "\n";
    s << "note: the accuracy band is an artifact decision quantifying the qualitative "
         "over/under judgement\n";
    return s.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace branchnet
