#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "labsim/lab_model.hpp"

namespace labsim {

// Scalars keep their authored type so error messages can render args exactly
// as written: integers unquoted, everything else as text.
using ArgValue = std::variant<std::int64_t, std::string>;

std::string arg_to_string(const ArgValue& v);

struct ActionStep {
    std::string action;
    std::string name;
    std::string module;
    // Insertion order preserved; nullopt means the key was absent, an engaged
    // empty vector means a literal `args: {}`.
    std::optional<std::vector<std::pair<std::string, ArgValue>>> args;
    std::optional<std::vector<std::pair<std::string, std::string>>> files;

    const ArgValue* arg(std::string_view key) const;
    std::string arg_text(std::string_view key) const;  // "" when absent
};

/// Args rendered in authored order as {'key': 'value', ...}; ints unquoted.
std::string render_args(const ActionStep& step);

struct Workflow {
    std::string name;
    std::string author;
    std::string info;
    std::string version;
    std::vector<ActionStep> flowdef;

    bool operator==(const Workflow&) const = default;
};

bool operator==(const ActionStep& a, const ActionStep& b);

enum class Severity { Error, Warning };

struct Diagnostic {
    std::optional<int> step;  // 1-based flowdef index; nullopt for metadata
    Severity severity = Severity::Error;
    std::string message;
};

struct ValidationReport {
    std::vector<Diagnostic> diagnostics;

    bool ok() const;
    std::vector<const Diagnostic*> errors() const;
};

/// Parse a YAML workflow document. Unknown extra keys are reported through
/// `warnings` when given, never as failures. Throws ParseError; a missing
/// metadata field names the field.
Workflow parse_workflow(const std::string& text,
                        std::vector<Diagnostic>* warnings = nullptr);

/// Static checks only: module/action existence, required args, transfer arg
/// sanity, the exchange never-both rule, rotation consistency. Dynamic
/// feasibility belongs to the simulator.
ValidationReport validate_workflow(const Workflow& workflow, const LabConfig& config);

/// Canonical rendering, 2-space indentation. parse(serialize(w)) == w.
std::string serialize_workflow(const Workflow& workflow);

std::string workflow_digest(const Workflow& workflow);

}  // namespace labsim
