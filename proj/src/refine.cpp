#include "labsim/refine.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace labsim {

namespace {

const char* kCorrectionRequest = "Rewrite the full YAML file with the correction applied.";

struct RoundOutcome {
    IterationRecord record;
    std::optional<Workflow> workflow;  // engaged only on a passing simulation
    std::string feedback;              // empty when the round passed
};

RoundOutcome run_round(const std::string& response, const LabConfig& config,
                       const RefineSettings& settings, std::set<std::string>& seen_digests) {
    RoundOutcome outcome;

    Workflow workflow;
    try {
        auto artifacts = extract_artifacts(response);
        workflow = parse_workflow(artifacts.workflows.back().second);
    } catch (const std::exception& e) {
        outcome.record.failure_note = e.what();
        outcome.feedback = std::string(e.what()) + "\n" + kCorrectionRequest;
        return outcome;
    }

    outcome.record.workflow_digest = workflow_digest(workflow);
    outcome.record.stalled = !seen_digests.insert(outcome.record.workflow_digest).second;

    ValidationReport validation = validate_workflow(workflow, config);
    if (!validation.ok()) {
        std::ostringstream note;
        for (const Diagnostic* d : validation.errors()) {
            if (note.tellp() > 0) note << "\n";
            if (d->step) note << "Step " << *d->step << ": ";
            note << d->message;
        }
        outcome.record.failure_note = note.str();
        outcome.feedback = note.str() + "\n" + kCorrectionRequest;
        return outcome;
    }

    WorldState world = init_world(config, settings.initial_placements);
    SimReport report = simulate(workflow, std::move(world), config);
    if (report.passed) {
        outcome.workflow = std::move(workflow);
        outcome.record.report = std::move(report);
        return outcome;
    }
    outcome.feedback = build_feedback(report);
    outcome.record.report = std::move(report);
    return outcome;
}

}  // namespace

std::string build_feedback(const SimReport& report) {
    if (report.passed || !report.first_error)
        throw std::logic_error("no feedback to build for a passing simulation");
    return render_error(*report.first_error) + "\n" + kCorrectionRequest;
}

RefinementResult refine(const Conversation& seed, GeneratorBackend& backend,
                        const LabConfig& config, const RefineSettings& settings) {
    RefinementResult result;
    result.transcript = seed;
    std::set<std::string> seen_digests;

    for (int iter = 0; iter < settings.max_iters && !result.converged; ++iter) {
        std::string response = backend.generate(result.transcript);
        result.transcript.add(Role::Assistant, response);

        RoundOutcome outcome = run_round(response, config, settings, seen_digests);
        result.per_iteration.push_back(std::move(outcome.record));
        if (outcome.workflow) {
            result.converged = true;
            result.final_workflow = std::move(outcome.workflow);
        } else {
            result.transcript.add(Role::User, outcome.feedback);
        }
    }

    if (!result.converged && settings.operator_message) {
        result.operator_assisted = true;
        result.transcript.add(Role::User, *settings.operator_message);
        std::string response = backend.generate(result.transcript);
        result.transcript.add(Role::Assistant, response);
        RoundOutcome outcome = run_round(response, config, settings, seen_digests);
        result.per_iteration.push_back(std::move(outcome.record));
        if (outcome.workflow) {
            result.converged = true;
            result.final_workflow = std::move(outcome.workflow);
        }
    }

    result.iterations = static_cast<int>(result.per_iteration.size());
    return result;
}

std::string refinement_to_json(const RefinementResult& result) {
    nlohmann::ordered_json j;
    j["converged"] = result.converged;
    j["iterations"] = result.iterations;
    j["operator_assisted"] = result.operator_assisted;
    j["per_iteration"] = nlohmann::ordered_json::array();
    for (const auto& rec : result.per_iteration) {
        nlohmann::ordered_json entry;
        entry["workflow_digest"] = rec.workflow_digest;
        entry["stalled"] = rec.stalled;
        if (rec.report) {
            entry["status"] = rec.report->passed ? "pass" : "fail";
            if (rec.report->first_error)
                entry["error"] = render_error(*rec.report->first_error);
        } else {
            entry["status"] = "unusable";
            entry["note"] = rec.failure_note;
        }
        j["per_iteration"].push_back(entry);
    }
    if (result.final_workflow)
        j["final_workflow_digest"] = workflow_digest(*result.final_workflow);
    j["transcript"] = nlohmann::ordered_json::array();
    for (const auto& msg : result.transcript.messages)
        j["transcript"].push_back({{"role", to_string(msg.role)}, {"text", msg.text}});
    return j.dump(2) + "\n";
}

}  // namespace labsim
