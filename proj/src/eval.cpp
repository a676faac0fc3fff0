#include "labsim/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "labsim/errors.hpp"

namespace labsim {

double f1(const EvalCounts& counts) {
    if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0)
        throw std::domain_error("negative count");
    long denom = 2 * counts.tp + counts.fp + counts.fn;
    if (denom == 0) throw std::domain_error("F1 undefined: no positives in either set");
    return 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denom);
}

std::string step_key(const ActionStep& step) {
    std::string key = step.action + "|" + step.module + "|";
    if (step.args) {
        std::vector<std::pair<std::string, std::string>> sorted;
        for (const auto& [k, v] : *step.args) {
            std::string text = std::holds_alternative<int64_t>(v)
                                   ? std::to_string(std::get<int64_t>(v))
                                   : std::get<std::string>(v);
            sorted.emplace_back(k, text);
        }
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [k, v] : sorted) key += k + "=" + v + ";";
    }
    if (step.files)
        for (const auto& [k, v] : *step.files) key += "file:" + k + "=" + v + ";";
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return key;
}

namespace {

// Terminal-state equivalence for benign classification: slot contents and
// seal flags only, lid positions and counters ignored.
bool same_outcome(const WorldState& a, const WorldState& b) {
    auto strip = [](const WorldState& w) {
        std::map<std::string, std::pair<std::string, bool>> out;
        for (const auto& [slot, plate] : w.slot_contents)
            if (plate) out[slot] = {plate->id, plate->sealed};
        return out;
    };
    return strip(a) == strip(b);
}

}  // namespace

ActionDiff diff_actions(const Workflow& candidate, const Workflow& truth,
                        const std::vector<Placement>& placements, const LabConfig& config) {
    const std::size_t n = candidate.flowdef.size();
    const std::size_t m = truth.flowdef.size();
    std::vector<std::string> ckeys(n), tkeys(m);
    for (std::size_t i = 0; i < n; ++i) ckeys[i] = step_key(candidate.flowdef[i]);
    for (std::size_t j = 0; j < m; ++j) tkeys[j] = step_key(truth.flowdef[j]);

    // Longest common subsequence over step keys.
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            lcs[i][j] = ckeys[i - 1] == tkeys[j - 1]
                            ? lcs[i - 1][j - 1] + 1
                            : std::max(lcs[i - 1][j], lcs[i][j - 1]);

    ActionDiff diff;
    std::size_t i = n, j = m;
    while (i > 0 && j > 0) {
        if (ckeys[i - 1] == tkeys[j - 1]) {
            diff.matched.emplace_back(static_cast<int>(i), static_cast<int>(j));
            --i;
            --j;
        } else if (lcs[i - 1][j] >= lcs[i][j - 1]) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(diff.matched.begin(), diff.matched.end());

    std::vector<bool> cand_matched(n + 1, false), truth_matched(m + 1, false);
    for (const auto& [ci, ti] : diff.matched) {
        cand_matched[ci] = true;
        truth_matched[ti] = true;
    }
    for (std::size_t t = 1; t <= m; ++t)
        if (!truth_matched[t]) diff.missing.push_back(static_cast<int>(t));
    for (std::size_t c = 1; c <= n; ++c)
        if (!cand_matched[c]) diff.inserted.push_back(static_cast<int>(c));

    if (!diff.inserted.empty()) {
        WorldState initial = init_world(config, placements);
        SimReport cand_report = simulate(candidate, initial, config);
        if (cand_report.passed) {
            WorldState cand_final = initial;
            for (const auto& step : candidate.flowdef)
                apply_step(cand_final, step, 0, config);
            SimReport truth_report = simulate(truth, initial, config);
            if (truth_report.passed) {
                WorldState truth_final = initial;
                for (const auto& step : truth.flowdef)
                    apply_step(truth_final, step, 0, config);
                if (same_outcome(cand_final, truth_final)) diff.benign = diff.inserted;
            }
        }
    }
    return diff;
}

CategoryScores score_protocol(const Workflow& candidate, const Workflow& truth,
                              const std::map<std::string, std::string>& category_rules,
                              const std::vector<Placement>& placements,
                              const LabConfig& config) {
    auto category_of = [&](const ActionStep& step) -> std::string {
        auto it = category_rules.find(step_key(step));
        if (it != category_rules.end()) return it->second;
        it = category_rules.find(step.action);
        if (it != category_rules.end()) return it->second;
        return "";
    };

    for (const auto& step : truth.flowdef)
        if (category_of(step).empty())
            throw ConfigError("no category rule covers truth step '" + step.action + "' (" +
                                  step.name + ")",
                              step.action);

    ActionDiff diff = diff_actions(candidate, truth, placements, config);
    std::set<int> benign(diff.benign.begin(), diff.benign.end());

    CategoryScores scores;
    for (const auto& [ci, ti] : diff.matched) {
        (void)ci;
        ++scores.by_category[category_of(truth.flowdef[ti - 1])].tp;
    }
    for (int t : diff.missing) ++scores.by_category[category_of(truth.flowdef[t - 1])].fn;
    for (int c : diff.inserted) {
        if (benign.count(c)) continue;
        std::string cat = category_of(candidate.flowdef[c - 1]);
        if (cat.empty()) cat = "uncategorized";
        ++scores.by_category[cat].fp;
    }

    for (const auto& [cat, counts] : scores.by_category) {
        scores.pooled.tp += counts.tp;
        scores.pooled.fp += counts.fp;
        scores.pooled.fn += counts.fn;
        if (2 * counts.tp + counts.fp + counts.fn > 0)
            scores.f1_by_category[cat] = f1(counts);
    }
    scores.overall = f1(scores.pooled);
    return scores;
}

std::map<std::string, std::string> load_category_rules(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ParseError("category rules: " + e.msg);
    }
    if (!root.IsMap()) throw ParseError("category rules: document must be a mapping");
    std::map<std::string, std::string> rules;
    for (const auto& kv : root) rules[kv.first.as<std::string>()] = kv.second.as<std::string>();
    return rules;
}

std::string scores_to_json(const CategoryScores& scores) {
    nlohmann::ordered_json j;
    j["categories"] = nlohmann::ordered_json::object();
    for (const auto& [cat, counts] : scores.by_category) {
        nlohmann::ordered_json entry = {
            {"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}};
        auto it = scores.f1_by_category.find(cat);
        if (it != scores.f1_by_category.end()) entry["f1"] = it->second;
        j["categories"][cat] = entry;
    }
    j["pooled"] = {{"tp", scores.pooled.tp},
                   {"fp", scores.pooled.fp},
                   {"fn", scores.pooled.fn}};
    j["overall_f1"] = scores.overall;
    return j.dump(2) + "\n";
}

std::string scores_to_text(const CategoryScores& scores) {
    std::ostringstream out;
    out << "category            tp   fp   fn     f1\n";
    auto row = [&out](const std::string& name, const EvalCounts& c,
                      const double* score) {
        out << name;
        for (std::size_t i = name.size(); i < 18; ++i) out << ' ';
        char buf[64];
        if (score)
            std::snprintf(buf, sizeof(buf), "%4ld %4ld %4ld  %.4f", c.tp, c.fp, c.fn, *score);
        else
            std::snprintf(buf, sizeof(buf), "%4ld %4ld %4ld       -", c.tp, c.fp, c.fn);
        out << buf << "\n";
    };
    for (const auto& [cat, counts] : scores.by_category) {
        auto it = scores.f1_by_category.find(cat);
        row(cat, counts, it != scores.f1_by_category.end() ? &it->second : nullptr);
    }
    row("overall", scores.pooled, &scores.overall);
    return out.str();
}

}  // namespace labsim
