#include "labsim/sim.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "labsim/digest.hpp"

namespace labsim {

const char* to_string(SimErrorKind k) {
    switch (k) {
        case SimErrorKind::CollisionClosedDevice: return "CollisionClosedDevice";
        case SimErrorKind::SourceEmpty: return "SourceEmpty";
        case SimErrorKind::TargetOccupied: return "TargetOccupied";
        case SimErrorKind::RotationMismatch: return "RotationMismatch";
        case SimErrorKind::NotHoldingPlate: return "NotHoldingPlate";
        case SimErrorKind::PlateMissingForAction: return "PlateMissingForAction";
        case SimErrorKind::LidNotClosedForRun: return "LidNotClosedForRun";
        case SimErrorKind::SealStateError: return "SealStateError";
        case SimErrorKind::UnknownLocation: return "UnknownLocation";
        case SimErrorKind::ApproachMismatch: return "ApproachMismatch";
        case SimErrorKind::ExchangeRuleViolation: return "ExchangeRuleViolation";
    }
    return "?";
}

const PlateState* WorldState::plate_at_slot(const std::string& slot) const {
    auto it = slot_contents.find(slot);
    if (it == slot_contents.end() || !it->second) return nullptr;
    return &*it->second;
}

std::vector<std::string> WorldState::plate_ids() const {
    std::vector<std::string> ids;
    for (const auto& [slot, plate] : slot_contents) {
        (void)slot;
        if (plate) ids.push_back(plate->id);
    }
    if (arm_holding) ids.push_back(arm_holding->id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::string WorldState::digest() const {
    std::ostringstream out;
    for (const auto& [slot, plate] : slot_contents) {
        out << slot << "=";
        if (plate)
            out << plate->id << "/" << to_string(plate->rotation_as_placed) << "/"
                << (plate->sealed ? "sealed" : "unsealed");
        else
            out << "-";
        out << ";";
    }
    out << "arm=" << (arm_holding ? arm_holding->id : "-") << ";";
    for (const auto& [module, lid] : lids)
        out << module << "=" << (lid == LidState::Open ? "open" : "closed") << ";";
    return digest_hex(out.str());
}

WorldState init_world(const LabConfig& config, const std::vector<Placement>& placements) {
    WorldState world;
    for (const auto& mod : config.modules)
        if (mod.has_lid) world.lids[mod.name] = LidState::Closed;
    for (const auto& p : placements) {
        config.location(p.location);  // throws UnknownLocationError
        std::string slot = config.slot_of(p.location);
        auto [it, inserted] = world.slot_contents.emplace(slot, PlateState{});
        if (!inserted && it->second)
            throw ConfigError("duplicate placement at physical slot '" + slot + "'", slot);
        it->second = PlateState{p.plate_id, p.rotation, p.sealed};
    }
    return world;
}

std::vector<Placement> load_placements(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ParseError("placements: " + e.msg);
    }
    if (!root["placements"] || !root["placements"].IsSequence())
        throw ParseError("placements: expected a top-level 'placements' sequence");
    std::vector<Placement> out;
    for (const auto& node : root["placements"]) {
        Placement p;
        p.plate_id = node["plate"].as<std::string>();
        p.location = node["location"].as<std::string>();
        if (node["rotation"]) p.rotation = rotation_from_string(node["rotation"].as<std::string>());
        if (node["sealed"]) p.sealed = node["sealed"].as<bool>();
        out.push_back(p);
    }
    return out;
}

std::string render_error(const SimError& err) {
    std::ostringstream out;
    out << "Error while executing step " << err.step_index << " (`action=" << err.step.action
        << ", module=" << err.step.module << ", args=" << render_args(err.step)
        << "`): " << err.detail;
    return out.str();
}

namespace {

SimError make_error(SimErrorKind kind, int index, const ActionStep& step, std::string detail) {
    return SimError{kind, index, step, std::move(detail)};
}

std::optional<SimError> apply_transfer(WorldState& world, const ActionStep& step, int index,
                                       const LabConfig& config) {
    const std::string source = step.arg_text("source");
    const std::string target = step.arg_text("target");

    // Check order is part of the contract; multi-fault steps report the
    // first failure in this sequence.
    const LocationSpec* src = config.find_location(source);
    const LocationSpec* dst = config.find_location(target);
    if (!src)
        return make_error(SimErrorKind::UnknownLocation, index, step,
                          "Unknown location " + source);
    if (!dst)
        return make_error(SimErrorKind::UnknownLocation, index, step,
                          "Unknown location " + target);

    const std::string src_approach = step.arg_text("source_approach");
    const std::string dst_approach = step.arg_text("target_approach");
    if (src_approach != src->approach)
        return make_error(SimErrorKind::ApproachMismatch, index, step,
                          "Approach " + src_approach + " does not match configured approach " +
                              src->approach + " for " + source);
    if (dst_approach != dst->approach)
        return make_error(SimErrorKind::ApproachMismatch, index, step,
                          "Approach " + dst_approach + " does not match configured approach " +
                              dst->approach + " for " + target);

    const std::string src_slot = config.slot_of(source);
    const std::string dst_slot = config.slot_of(target);
    if (config.is_exchange_alias(source) && config.is_exchange_alias(target) &&
        src_slot == dst_slot)
        return make_error(SimErrorKind::ExchangeRuleViolation, index, step,
                          "Transfer uses exchange deck aliases for both source and target");

    Rotation declared_src, declared_dst;
    try {
        declared_src = rotation_from_string(step.arg_text("source_plate_rotation"));
        declared_dst = rotation_from_string(step.arg_text("target_plate_rotation"));
    } catch (const ParseError& e) {
        return make_error(SimErrorKind::RotationMismatch, index, step, e.what());
    }
    if (declared_src != declared_dst)
        return make_error(SimErrorKind::RotationMismatch, index, step,
                          std::string("Source and target plate rotations differ (") +
                              to_string(declared_src) + " vs " + to_string(declared_dst) + ")");

    const PlateState* plate = world.plate_at_slot(src_slot);
    if (!plate)
        return make_error(SimErrorKind::SourceEmpty, index, step, "No plate present at " + source);

    // Pickup rotation must match how the plate was set down, except at the
    // exchange deck where a regrip is permitted by configuration.
    const bool regrip_ok = config.options.exchange_regrip && config.is_exchange_alias(source);
    if (plate->rotation_as_placed != src->rotation && !regrip_ok)
        return make_error(SimErrorKind::RotationMismatch, index, step,
                          "Plate at " + source + " is oriented " +
                              to_string(plate->rotation_as_placed) + " but pickup requested " +
                              to_string(src->rotation));

    // Lidded devices must be open for plate access, removal included.
    const ModuleSpec* src_mod = config.module_of_nest(source);
    if (src_mod && src_mod->has_lid && src_mod->requires_open_for_access &&
        world.lids.at(src_mod->name) == LidState::Closed)
        return make_error(SimErrorKind::CollisionClosedDevice, index, step,
                          "Collision between microplate and " + src_mod->name);

    const ModuleSpec* dst_mod = config.module_of_nest(target);
    if (dst_mod && dst_mod->has_lid && dst_mod->requires_open_for_access &&
        world.lids.at(dst_mod->name) == LidState::Closed)
        return make_error(SimErrorKind::CollisionClosedDevice, index, step,
                          "Collision between microplate and " + dst_mod->name);

    if (world.plate_at_slot(dst_slot))
        return make_error(SimErrorKind::TargetOccupied, index, step,
                          "Target location " + target + " is already occupied");

    PlateState moved = *plate;
    moved.rotation_as_placed = dst->rotation;
    world.slot_contents[src_slot] = std::nullopt;
    world.slot_contents[dst_slot] = moved;
    return std::nullopt;
}

std::optional<SimError> apply_device_action(WorldState& world, const ActionStep& step, int index,
                                            const LabConfig& config,
                                            std::vector<std::string>* warnings) {
    const ModuleSpec* mod = config.find_module(step.module);
    if (!mod)
        return make_error(SimErrorKind::UnknownLocation, index, step,
                          "Unknown module " + step.module);

    if (step.action == "open" || step.action == "close") {
        if (!mod->has_lid)
            return make_error(SimErrorKind::UnknownLocation, index, step,
                              "Module " + mod->name + " has no lid");
        LidState want = step.action == "open" ? LidState::Open : LidState::Closed;
        LidState& lid = world.lids.at(mod->name);
        if (lid == want && warnings)
            warnings->push_back(mod->name + " lid already " +
                                (want == LidState::Open ? "open" : "closed"));
        lid = want;
        return std::nullopt;
    }

    if (mod->requires_closed_for.count(step.action) && mod->has_lid &&
        world.lids.at(mod->name) != LidState::Closed)
        return make_error(SimErrorKind::LidNotClosedForRun, index, step,
                          mod->name + " must be closed before " + step.action);

    const PlateState* plate = nullptr;
    if (mod->nest) plate = world.plate_at_slot(config.slot_of(*mod->nest));

    if (mod->requires_plate_for.count(step.action) && !plate) {
        std::string where = mod->nest ? *mod->nest : mod->name;
        return make_error(SimErrorKind::PlateMissingForAction, index, step,
                          "No plate present at " + where + " for " + step.action);
    }

    if (mod->requires_sealed_plate_for.count(step.action) && plate && !plate->sealed)
        return make_error(SimErrorKind::SealStateError, index, step,
                          "Plate at " + (mod->nest ? *mod->nest : mod->name) + " is not sealed");

    auto effect = mod->sets_seal_state.find(step.action);
    if (effect != mod->sets_seal_state.end() && plate && mod->nest) {
        auto& slot = world.slot_contents.at(config.slot_of(*mod->nest));
        slot->sealed = effect->second == SealEffect::Sealed;
    }
    return std::nullopt;
}

}  // namespace

std::optional<SimError> apply_step(WorldState& world, const ActionStep& step, int step_index,
                                   const LabConfig& config, std::vector<std::string>* warnings) {
    std::optional<SimError> err;
    if (step.action == "transfer" && step.module == config.transfer_module)
        err = apply_transfer(world, step, step_index, config);
    else
        err = apply_device_action(world, step, step_index, config, warnings);
    if (!err) ++world.steps_executed;
    return err;
}

SimReport simulate(const Workflow& workflow, WorldState world, const LabConfig& config) {
    SimReport report;
    int index = 0;
    for (const auto& step : workflow.flowdef) {
        ++index;
        std::vector<std::string> warnings;
        auto err = apply_step(world, step, index, config, &warnings);
        if (err) {
            report.passed = false;
            report.first_error = std::move(err);
            if (config.options.halt_on_first_error) return report;
            continue;
        }
        std::string description = step.action + " (" + step.module + ")";
        for (const auto& w : warnings) description += " [warning: " + w + "]";
        report.trace.push_back({index, description, world.digest()});
    }
    report.passed = !report.first_error;
    return report;
}

std::string report_to_json(const SimReport& report) {
    nlohmann::ordered_json j;
    j["status"] = report.passed ? "pass" : "fail";
    j["trace"] = nlohmann::ordered_json::array();
    for (const auto& entry : report.trace) {
        j["trace"].push_back({{"step", entry.step_index},
                              {"description", entry.description},
                              {"world", entry.world_digest}});
    }
    if (report.first_error) {
        const auto& e = *report.first_error;
        j["first_error"] = {{"kind", to_string(e.kind)},
                            {"step", e.step_index},
                            {"action", e.step.action},
                            {"module", e.step.module},
                            {"args", render_args(e.step)},
                            {"detail", e.detail},
                            {"rendered", render_error(e)}};
    }
    return j.dump(2) + "\n";
}

}  // namespace labsim
