#pragma once

#include <optional>
#include <string>
#include <vector>

#include "labsim/generator.hpp"
#include "labsim/sim.hpp"
#include "labsim/workflow.hpp"

namespace labsim {

struct IterationRecord {
    std::string workflow_digest;        // empty when nothing extractable
    std::optional<SimReport> report;    // absent for extraction/parse failures
    std::string failure_note;           // why no report exists
    bool stalled = false;               // digest repeated a previous iteration
};

struct RefinementResult {
    bool converged = false;
    int iterations = 0;  // simulation-loop runs, including failed extractions
    std::vector<IterationRecord> per_iteration;
    std::optional<Workflow> final_workflow;
    Conversation transcript;
    bool operator_assisted = false;
};

/// Feedback for a failed run: the rendered first error, then the fixed
/// correction request line. Throws std::logic_error on a passing report.
std::string build_feedback(const SimReport& report);

struct RefineSettings {
    int max_iters = 3;
    std::vector<Placement> initial_placements;
    // Hint supplied by a human operator. Sent only when the loop exhausts
    // max_iters without converging; buys one extra generate/simulate round.
    std::optional<std::string> operator_message;
};

/// The iterate-until-valid loop: generate, extract, validate, simulate;
/// on failure feed the first error back and retry, up to max_iters.
RefinementResult refine(const Conversation& seed, GeneratorBackend& backend,
                        const LabConfig& config, const RefineSettings& settings);

std::string refinement_to_json(const RefinementResult& result);

}  // namespace labsim
