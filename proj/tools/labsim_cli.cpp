#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "labsim/errors.hpp"
#include "labsim/eval.hpp"
#include "labsim/generator.hpp"
#include "labsim/plan.hpp"
#include "labsim/refine.hpp"
#include "labsim/sim.hpp"
#include "labsim/workflow.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

struct CommonArgs {
    std::string lab_path;
    std::string placements_path;
    bool json = false;
};

labsim::LabConfig load_lab(const CommonArgs& args) {
    return labsim::load_lab_config_file(args.lab_path);
}

std::vector<labsim::Placement> load_world(const CommonArgs& args) {
    if (args.placements_path.empty()) return {};
    return labsim::load_placements(args.placements_path);
}

int cmd_validate(const CommonArgs& common, const std::string& workflow_path) {
    labsim::LabConfig config = load_lab(common);
    std::vector<labsim::Diagnostic> warnings;
    labsim::Workflow workflow = labsim::parse_workflow(read_file(workflow_path), &warnings);
    labsim::ValidationReport report = labsim::validate_workflow(workflow, config);
    for (const auto& d : warnings) report.diagnostics.push_back(d);

    for (const auto& d : report.diagnostics) {
        std::cerr << (d.severity == labsim::Severity::Error ? "error" : "warning");
        if (d.step) std::cerr << " (step " << *d.step << ")";
        std::cerr << ": " << d.message << "\n";
    }
    if (common.json) {
        std::cout << "{\"ok\": " << (report.ok() ? "true" : "false") << "}\n";
    } else if (report.ok()) {
        std::cout << "workflow is statically valid\n";
    }
    return report.ok() ? kExitOk : kExitDomain;
}

int cmd_simulate(const CommonArgs& common, const std::string& workflow_path, bool trace) {
    labsim::LabConfig config = load_lab(common);
    labsim::Workflow workflow = labsim::parse_workflow(read_file(workflow_path));
    labsim::WorldState world = labsim::init_world(config, load_world(common));
    labsim::SimReport report = labsim::simulate(workflow, std::move(world), config);

    if (common.json) {
        std::cout << labsim::report_to_json(report);
    } else if (report.passed) {
        std::cout << "simulation passed (" << report.trace.size() << " steps)\n";
        if (trace)
            for (const auto& entry : report.trace)
                std::cout << "  " << entry.step_index << ": " << entry.description << " ["
                          << entry.world_digest << "]\n";
    } else {
        std::cout << labsim::render_error(*report.first_error) << "\n";
        if (trace)
            for (const auto& entry : report.trace)
                std::cout << "  " << entry.step_index << ": " << entry.description << " ["
                          << entry.world_digest << "]\n";
    }
    return report.passed ? kExitOk : kExitDomain;
}

int cmd_refine(const CommonArgs& common, const std::string& backend_name,
               const std::string& replay_file, const std::string& scripted_seed,
               const std::string& scripted_scope, const std::string& prompt_path,
               int max_iters, const std::string& out_dir,
               const std::string& operator_message) {
    labsim::LabConfig config = load_lab(common);

    std::unique_ptr<labsim::GeneratorBackend> backend;
    if (backend_name == "replay") {
        if (replay_file.empty()) {
            std::cerr << "error: --backend replay requires --replay-file\n";
            return kExitUsage;
        }
        backend = std::make_unique<labsim::ReplayBackend>(
            labsim::ReplayBackend::from_file(replay_file));
    } else if (backend_name == "scripted") {
        if (scripted_seed.empty()) {
            std::cerr << "error: --backend scripted requires --scripted-seed\n";
            return kExitUsage;
        }
        auto scope = scripted_scope == "global"
                         ? labsim::ScriptedBackend::FixScope::Global
                         : labsim::ScriptedBackend::FixScope::Localized;
        backend = std::make_unique<labsim::ScriptedBackend>(read_file(scripted_seed), scope,
                                                            config);
    } else {
        backend = std::make_unique<labsim::RemoteBackend>(labsim::RemoteConfig::from_env());
    }

    labsim::Conversation seed;
    if (!prompt_path.empty()) seed.add(labsim::Role::User, read_file(prompt_path));

    labsim::RefineSettings settings;
    settings.max_iters = max_iters > 0 ? max_iters : config.options.max_refine_iterations;
    settings.initial_placements = load_world(common);
    if (!operator_message.empty()) settings.operator_message = operator_message;

    labsim::RefinementResult result = labsim::refine(seed, *backend, config, settings);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir + "/session.json", labsim::refinement_to_json(result));
        if (result.final_workflow)
            write_file(out_dir + "/final_workflow.yaml",
                       labsim::serialize_workflow(*result.final_workflow));
    }
    if (common.json) {
        std::cout << labsim::refinement_to_json(result);
    } else {
        std::cout << (result.converged ? "converged" : "did not converge") << " after "
                  << result.iterations << " iteration(s)\n";
        for (std::size_t i = 0; i < result.per_iteration.size(); ++i) {
            const auto& rec = result.per_iteration[i];
            std::cout << "  iteration " << (i + 1) << ": ";
            if (!rec.report)
                std::cout << "unusable response (" << rec.failure_note << ")";
            else if (rec.report->passed)
                std::cout << "pass";
            else
                std::cout << labsim::render_error(*rec.report->first_error);
            if (rec.stalled) std::cout << " [stalled]";
            std::cout << "\n";
        }
    }
    return result.converged ? kExitOk : kExitDomain;
}

int cmd_evaluate(const CommonArgs& common, const std::string& workflow_path,
                 const std::string& truth_path, const std::string& categories_path) {
    labsim::LabConfig config = load_lab(common);
    labsim::Workflow candidate = labsim::parse_workflow(read_file(workflow_path));
    labsim::Workflow truth = labsim::parse_workflow(read_file(truth_path));
    auto rules = labsim::load_category_rules(categories_path);
    labsim::CategoryScores scores =
        labsim::score_protocol(candidate, truth, rules, load_world(common), config);
    std::cout << (common.json ? labsim::scores_to_json(scores)
                              : labsim::scores_to_text(scores));
    return kExitOk;
}

int cmd_plan_check(const std::string& plan_path, const std::string& mode,
                   const std::string& spec_path, bool json) {
    labsim::PlanParse parse = labsim::parse_plan(read_file(plan_path));
    labsim::PlanSpec spec = spec_path.empty() ? labsim::default_pcr_plan_spec()
                                              : labsim::load_plan_spec(spec_path);
    labsim::CriteriaReport report = mode == "open-ended"
                                        ? labsim::check_open_ended(parse, spec)
                                        : labsim::check_constrained(parse, spec);
    std::cout << (json ? labsim::criteria_to_json(report)
                       : labsim::criteria_to_text(report));
    return report.all_pass() ? kExitOk : kExitDomain;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Symbolic lab-protocol validator, simulator and refinement harness"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string workflow_path, truth_path, categories_path, plan_path;
    std::string backend_name = "replay", replay_file, scripted_seed,
                scripted_scope = "localized", prompt_path, out_dir, operator_message,
                mode = "constrained", spec_path;
    int max_iters = 0;
    bool trace = false;

    auto add_common = [&](CLI::App* cmd, bool need_lab = true) {
        auto* lab = cmd->add_option("--lab", common.lab_path, "lab configuration YAML");
        if (need_lab) lab->required();
        cmd->add_option("--placements", common.placements_path, "initial plate placements YAML");
        cmd->add_flag("--json", common.json, "structured output");
    };

    auto* validate = app.add_subcommand("validate", "static workflow checks");
    add_common(validate);
    validate->add_option("--workflow", workflow_path, "workflow YAML")->required();

    auto* simulate = app.add_subcommand("simulate", "run the digital twin");
    add_common(simulate);
    simulate->add_option("--workflow", workflow_path, "workflow YAML")->required();
    simulate->add_flag("--trace", trace, "print the executed step log");

    auto* refine = app.add_subcommand("refine", "iterative correction loop");
    add_common(refine);
    refine->add_option("--backend", backend_name, "remote|replay|scripted")
        ->check(CLI::IsMember({"remote", "replay", "scripted"}));
    refine->add_option("--replay-file", replay_file, "canned responses YAML");
    refine->add_option("--scripted-seed", scripted_seed, "initial response file");
    refine->add_option("--scripted-scope", scripted_scope, "localized|global")
        ->check(CLI::IsMember({"localized", "global"}));
    refine->add_option("--prompt", prompt_path, "seed prompt file");
    refine->add_option("--max-iters", max_iters, "iteration budget");
    refine->add_option("--out", out_dir, "session output directory");
    refine->add_option("--operator-message", operator_message,
                       "extra hint after a non-converged run");

    auto* evaluate = app.add_subcommand("evaluate", "score a candidate against ground truth");
    add_common(evaluate);
    evaluate->add_option("--workflow", workflow_path, "candidate workflow YAML")->required();
    evaluate->add_option("--truth", truth_path, "ground-truth workflow YAML")->required();
    evaluate->add_option("--categories", categories_path, "category rules YAML")->required();

    auto* plan_check = app.add_subcommand("plan-check", "liquid-handling plan criteria");
    plan_check->add_option("--plan", plan_path, "plan text file")->required();
    plan_check->add_option("--mode", mode, "constrained|open-ended")
        ->check(CLI::IsMember({"constrained", "open-ended"}));
    plan_check->add_option("--spec", spec_path, "plan spec YAML");
    plan_check->add_flag("--json", common.json, "structured output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(common, workflow_path);
        if (simulate->parsed()) return cmd_simulate(common, workflow_path, trace);
        if (refine->parsed())
            return cmd_refine(common, backend_name, replay_file, scripted_seed, scripted_scope,
                              prompt_path, max_iters, out_dir, operator_message);
        if (evaluate->parsed())
            return cmd_evaluate(common, workflow_path, truth_path, categories_path);
        if (plan_check->parsed())
            return cmd_plan_check(plan_path, mode, spec_path, common.json);
    } catch (const labsim::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const labsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
