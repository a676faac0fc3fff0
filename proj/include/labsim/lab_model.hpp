#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "labsim/errors.hpp"

namespace labsim {

enum class Rotation { Wide, Narrow };

const char* to_string(Rotation r);
Rotation rotation_from_string(std::string_view s);  // throws ParseError

enum class SealEffect { Sealed, Unsealed };

struct ActionSpec {
    std::string name;
    std::vector<std::string> required_args;
    std::vector<std::string> optional_args;
    std::vector<std::string> requires_files;
};

struct ModuleSpec {
    std::string name;
    std::vector<ActionSpec> actions;
    bool has_lid = false;
    std::optional<std::string> nest;
    std::set<std::string> requires_plate_for;
    std::set<std::string> requires_closed_for;
    bool requires_open_for_access = false;
    std::set<std::string> requires_sealed_plate_for;
    std::map<std::string, SealEffect> sets_seal_state;

    const ActionSpec* find_action(std::string_view action) const;
};

struct LocationSpec {
    std::string name;
    Rotation rotation = Rotation::Wide;
    std::string approach;
    int capacity = 1;  // one plate per location, stacking unsupported
};

struct SimOptions {
    bool exchange_regrip = true;
    int max_refine_iterations = 3;
    bool halt_on_first_error = true;
};

struct AliasGroup {
    std::string id;
    std::vector<std::string> members;
};

// Immutable after load; safe to share across concurrent simulations.
struct LabConfig {
    std::vector<ModuleSpec> modules;
    std::vector<LocationSpec> locations;
    std::string transfer_module;
    std::vector<AliasGroup> alias_groups;
    SimOptions options;

    const ModuleSpec* find_module(std::string_view name) const;
    const LocationSpec* find_location(std::string_view name) const;

    /// Spec for a named location; throws UnknownLocationError if absent.
    const LocationSpec& location(const std::string& name) const;

    /// All locations sharing the physical slot with `name`, including `name`
    /// itself. Singleton list when unaliased.
    std::vector<std::string> alias_peers(const std::string& name) const;

    /// Canonical physical-slot id: the alias group id when aliased,
    /// otherwise the location name.
    std::string slot_of(const std::string& location_name) const;

    bool is_exchange_alias(const std::string& location_name) const;

    /// Module whose nest is this location, or nullptr.
    const ModuleSpec* module_of_nest(std::string_view location_name) const;

    bool approach_known(std::string_view approach) const;
};

/// Parse and consistency-check a lab configuration document (YAML schema
/// described in docs/lab_config.md). Throws ParseError / ConfigError.
LabConfig load_lab_config(const std::string& text);
LabConfig load_lab_config_file(const std::string& path);

}  // namespace labsim
