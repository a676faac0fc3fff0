#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labsim/lab_model.hpp"
#include "labsim/workflow.hpp"

namespace labsim {

enum class SimErrorKind {
    CollisionClosedDevice,
    SourceEmpty,
    TargetOccupied,
    RotationMismatch,
    NotHoldingPlate,
    PlateMissingForAction,
    LidNotClosedForRun,
    SealStateError,
    UnknownLocation,
    ApproachMismatch,
    ExchangeRuleViolation,
};

const char* to_string(SimErrorKind k);

enum class LidState { Open, Closed };

struct PlateState {
    std::string id;
    Rotation rotation_as_placed = Rotation::Wide;
    bool sealed = false;
};

struct WorldState {
    // Physical slot id (LabConfig::slot_of) -> occupant. Alias-group members
    // share one entry, so presence is shared across orientations.
    std::map<std::string, std::optional<PlateState>> slot_contents;
    std::optional<PlateState> arm_holding;
    std::map<std::string, LidState> lids;  // only modules with has_lid
    int steps_executed = 0;

    const PlateState* plate_at_slot(const std::string& slot) const;
    std::vector<std::string> plate_ids() const;  // conservation checks
    std::string digest() const;
};

struct Placement {
    std::string plate_id;
    std::string location;
    Rotation rotation = Rotation::Wide;
    bool sealed = false;
};

/// Lids start closed; arm starts empty. Throws ConfigError on duplicate slot
/// use or UnknownLocationError on a bad location.
WorldState init_world(const LabConfig& config, const std::vector<Placement>& placements);

/// YAML file with a top-level `placements` list of
/// {plate, location, rotation, sealed} entries.
std::vector<Placement> load_placements(const std::string& path);

struct SimError {
    SimErrorKind kind = SimErrorKind::UnknownLocation;
    int step_index = 0;  // 1-based
    ActionStep step;     // action/module/args as authored
    std::string detail;
};

/// The exact feedback line fed back to generators:
///   Error while executing step {i} (`action=..., module=..., args={...}`): {detail}
std::string render_error(const SimError& err);

struct TraceEntry {
    int step_index = 0;
    std::string description;
    std::string world_digest;
};

struct SimReport {
    bool passed = false;
    std::vector<TraceEntry> trace;
    std::optional<SimError> first_error;
};

/// One step against the world. On success mutates `world` in place and
/// returns nullopt; on failure leaves `world` untouched and returns the
/// first violated check. `step_index` is 1-based. Benign oddities (open on
/// an already-open lid) land in `warnings` when given.
std::optional<SimError> apply_step(WorldState& world, const ActionStep& step,
                                   int step_index, const LabConfig& config,
                                   std::vector<std::string>* warnings = nullptr);

/// Fold apply_step over the flowdef; stops at the first error when
/// options.halt_on_first_error. Pure function of its arguments.
SimReport simulate(const Workflow& workflow, WorldState world, const LabConfig& config);

std::string report_to_json(const SimReport& report);

}  // namespace labsim
