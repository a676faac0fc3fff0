#pragma once

#include <map>
#include <string>
#include <vector>

#include "labsim/sim.hpp"
#include "labsim/workflow.hpp"

namespace labsim {

struct EvalCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// F1 = 2*TP / (2*TP + FP + FN). Throws std::domain_error when all counts
/// are zero instead of silently returning 0.
double f1(const EvalCounts& counts);

struct ActionDiff {
    // (candidate index, truth index), both 1-based, strictly increasing.
    std::vector<std::pair<int, int>> matched;
    std::vector<int> missing;   // truth indices with no counterpart
    std::vector<int> inserted;  // candidate indices with no counterpart
    std::vector<int> benign;    // inserted steps that provably do no harm
};

/// Normalized identity of a step for alignment: action, module and args
/// (lowercased, arg keys sorted). The human `name` field is ignored.
std::string step_key(const ActionStep& step);

/// Longest order-preserving alignment on step keys. Unmatched candidate
/// steps are reclassified benign iff the candidate simulates to pass and
/// its terminal world (slot contents + seal flags) equals the truth's.
ActionDiff diff_actions(const Workflow& candidate, const Workflow& truth,
                        const std::vector<Placement>& placements,
                        const LabConfig& config);

struct CategoryScores {
    std::map<std::string, EvalCounts> by_category;
    std::map<std::string, double> f1_by_category;  // absent when undefined
    EvalCounts pooled;
    double overall = 0.0;
};

/// Per-category tallies from diff_actions; benign steps excluded from FP.
/// `category_rules` maps action names (or full step keys) to categories;
/// throws ConfigError naming any uncategorized truth step.
CategoryScores score_protocol(const Workflow& candidate, const Workflow& truth,
                              const std::map<std::string, std::string>& category_rules,
                              const std::vector<Placement>& placements,
                              const LabConfig& config);

std::map<std::string, std::string> load_category_rules(const std::string& path);

std::string scores_to_json(const CategoryScores& scores);
std::string scores_to_text(const CategoryScores& scores);

}  // namespace labsim
