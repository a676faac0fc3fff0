#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "labsim/errors.hpp"

namespace labsim {

// Structured-English liquid-handling plan language.

struct TransferStep {
    double volume_ul = 0;
    std::string reagent;
    std::string source_well;
    std::string source_label;  // labware label, e.g. "reaction plate"
    std::string dest_well;
    std::string dest_label;
    int mix_cycles = 0;
    bool eject_tip = true;

    bool operator==(const TransferStep&) const = default;
};

struct ThermoStep {
    double temperature_c = 0;
    double duration_s = 0;
    bool operator==(const ThermoStep&) const = default;
};

struct MixStep {
    int cycles = 0;
    double volume_ul = 0;
    std::vector<std::string> wells;
    bool operator==(const MixStep&) const = default;
};

struct ReadStep {
    std::string instrument;
    std::string assay;
    bool operator==(const ReadStep&) const = default;
};

struct SealStep {
    bool operator==(const SealStep&) const = default;
};
struct PeelStep {
    bool operator==(const PeelStep&) const = default;
};

using PlanStep = std::variant<TransferStep, ThermoStep, MixStep, ReadStep, SealStep, PeelStep>;

class PlanFormatError : public ParseError {
public:
    PlanFormatError(std::string message, std::string slot, int line = -1)
        : ParseError(std::move(message), line), slot_(std::move(slot)) {}

    /// First template slot that failed to match ("volume", "reagent", ...).
    const std::string& slot() const { return slot_; }

private:
    std::string slot_;
};

bool well_id_valid(const std::string& well);  // A-H x 1-12

/// Parse one plan line. A leading "X.)" index is accepted and discarded.
/// Fan-out shorthand ("A1->B2, A2->B11") expands to one TransferStep per
/// pair, hence the vector. Throws PlanFormatError.
std::vector<PlanStep> parse_step_line(const std::string& line);

/// Canonical rendering; parse_step_line(format_step(s)) round-trips.
std::string format_step(const PlanStep& step, int index);

struct PlanLineError {
    int line = 0;  // 1-based
    std::string slot;
    std::string message;
};

struct Plan {
    std::vector<PlanStep> steps;
    // reagent -> [(labware label, well)] from the materials section.
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> reagent_sources;
    std::set<std::string> test_wells;
    std::set<std::string> control_wells;
};

struct PlanParse {
    Plan plan;
    std::vector<PlanLineError> errors;
};

/// Whole-document parse; per-line format failures are aggregated, not fatal.
PlanParse parse_plan(const std::string& text);

struct PlanSpec {
    std::map<std::string, double> reagent_volumes;  // per-transfer, uL
    std::string filler_reagent = "Nuclease-free Biowater";
    // Filler volume differs between test and control wells when set.
    std::optional<double> control_filler_volume;
    std::string template_reagent = "Template DNA";
    int expected_thermo_steps = 3;
    double min_transfer_volume = 5.0;
    double well_working_volume = 100.0;
    double pipette_max = 20.0;
    std::set<std::string> test_wells;
    std::set<std::string> control_wells;
    double total_reaction_volume = 40.0;
};

/// The Luna qPCR reference constants used by the shipped fixtures.
PlanSpec default_pcr_plan_spec();
PlanSpec load_plan_spec(const std::string& path);

enum class FindingKind { Missing, Extra, WrongValue, Format };
const char* to_string(FindingKind k);

struct Finding {
    std::string criterion;
    FindingKind kind = FindingKind::Format;
    std::string detail;
};

struct CriterionVerdict {
    std::string id;
    bool pass = true;
};

struct CriteriaReport {
    std::string mode;  // "constrained" | "open-ended"
    std::vector<CriterionVerdict> verdicts;
    std::vector<Finding> findings;

    bool all_pass() const;
    bool passed(const std::string& criterion) const;
};

/// Six constrained-mode criteria: well assignments, volumes, thermo count,
/// step format, test/control reagent logic, pipette selection.
CriteriaReport check_constrained(const PlanParse& parse, const PlanSpec& spec);

/// Eight open-ended criteria: well mapping, test/control spacing (Chebyshev
/// >= 2), per-well volume totals, thermo count, step format, reagent logic,
/// pipette use, minimum-volume and source-capacity limits.
CriteriaReport check_open_ended(const PlanParse& parse, const PlanSpec& spec);

std::string criteria_to_json(const CriteriaReport& report);
std::string criteria_to_text(const CriteriaReport& report);

}  // namespace labsim
