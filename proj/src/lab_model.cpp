#include "labsim/lab_model.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace labsim {

const char* to_string(Rotation r) {
    return r == Rotation::Wide ? "wide" : "narrow";
}

Rotation rotation_from_string(std::string_view s) {
    if (s == "wide") return Rotation::Wide;
    if (s == "narrow") return Rotation::Narrow;
    throw ParseError("invalid rotation '" + std::string(s) + "' (expected wide or narrow)");
}

const ActionSpec* ModuleSpec::find_action(std::string_view action) const {
    for (const auto& a : actions)
        if (a.name == action) return &a;
    return nullptr;
}

const ModuleSpec* LabConfig::find_module(std::string_view name) const {
    for (const auto& m : modules)
        if (m.name == name) return &m;
    return nullptr;
}

const LocationSpec* LabConfig::find_location(std::string_view name) const {
    for (const auto& l : locations)
        if (l.name == name) return &l;
    return nullptr;
}

const LocationSpec& LabConfig::location(const std::string& name) const {
    const LocationSpec* spec = find_location(name);
    if (!spec) throw UnknownLocationError(name);
    return *spec;
}

std::vector<std::string> LabConfig::alias_peers(const std::string& name) const {
    location(name);  // existence check
    for (const auto& group : alias_groups) {
        if (std::find(group.members.begin(), group.members.end(), name) != group.members.end())
            return group.members;
    }
    return {name};
}

std::string LabConfig::slot_of(const std::string& location_name) const {
    for (const auto& group : alias_groups) {
        if (std::find(group.members.begin(), group.members.end(), location_name) !=
            group.members.end())
            return group.id;
    }
    return location_name;
}

bool LabConfig::is_exchange_alias(const std::string& location_name) const {
    for (const auto& group : alias_groups) {
        if (std::find(group.members.begin(), group.members.end(), location_name) !=
            group.members.end())
            return true;
    }
    return false;
}

const ModuleSpec* LabConfig::module_of_nest(std::string_view location_name) const {
    for (const auto& m : modules)
        if (m.nest && *m.nest == location_name) return &m;
    return nullptr;
}

bool LabConfig::approach_known(std::string_view approach) const {
    for (const auto& l : locations)
        if (l.approach == approach) return true;
    return false;
}

namespace {

std::vector<std::string> string_list(const YAML::Node& node) {
    std::vector<std::string> out;
    if (!node) return out;
    for (const auto& item : node) out.push_back(item.as<std::string>());
    return out;
}

std::set<std::string> string_set(const YAML::Node& node) {
    std::set<std::string> out;
    if (!node) return out;
    for (const auto& item : node) out.insert(item.as<std::string>());
    return out;
}

ActionSpec parse_action(const YAML::Node& node) {
    ActionSpec spec;
    spec.name = node["name"].as<std::string>();
    spec.required_args = string_list(node["required_args"]);
    spec.optional_args = string_list(node["optional_args"]);
    spec.requires_files = string_list(node["requires_files"]);
    std::unordered_set<std::string> seen;
    for (const auto& arg : spec.required_args)
        if (!seen.insert(arg).second)
            throw ConfigError("duplicate argument '" + arg + "' in action " + spec.name, spec.name);
    for (const auto& arg : spec.optional_args)
        if (!seen.insert(arg).second)
            throw ConfigError("duplicate argument '" + arg + "' in action " + spec.name, spec.name);
    return spec;
}

ModuleSpec parse_module(const YAML::Node& node) {
    ModuleSpec mod;
    mod.name = node["name"].as<std::string>();
    if (node["actions"])
        for (const auto& a : node["actions"]) mod.actions.push_back(parse_action(a));
    mod.has_lid = node["has_lid"] ? node["has_lid"].as<bool>() : false;
    if (node["nest"]) mod.nest = node["nest"].as<std::string>();
    mod.requires_plate_for = string_set(node["requires_plate_for"]);
    mod.requires_closed_for = string_set(node["requires_closed_for"]);
    mod.requires_open_for_access =
        node["requires_open_for_access"] ? node["requires_open_for_access"].as<bool>() : false;
    mod.requires_sealed_plate_for = string_set(node["requires_sealed_plate_for"]);
    if (node["sets_seal_state"]) {
        for (const auto& kv : node["sets_seal_state"]) {
            auto value = kv.second.as<std::string>();
            if (value != "sealed" && value != "unsealed")
                throw ConfigError("sets_seal_state value must be sealed or unsealed", mod.name);
            mod.sets_seal_state[kv.first.as<std::string>()] =
                value == "sealed" ? SealEffect::Sealed : SealEffect::Unsealed;
        }
    }
    return mod;
}

void check_action_subset(const ModuleSpec& mod, const std::set<std::string>& subset,
                         const char* field) {
    for (const auto& action : subset) {
        if (!mod.find_action(action))
            throw ConfigError("module " + mod.name + ": " + field + " names undeclared action '" +
                                  action + "'",
                              mod.name);
    }
}

void check_consistency(const LabConfig& config) {
    std::unordered_set<std::string> module_names;
    for (const auto& mod : config.modules) {
        if (!module_names.insert(mod.name).second)
            throw ConfigError("duplicate module name '" + mod.name + "'", mod.name);
        check_action_subset(mod, mod.requires_plate_for, "requires_plate_for");
        check_action_subset(mod, mod.requires_closed_for, "requires_closed_for");
        check_action_subset(mod, mod.requires_sealed_plate_for, "requires_sealed_plate_for");
        for (const auto& [action, effect] : mod.sets_seal_state) {
            (void)effect;
            if (!mod.find_action(action))
                throw ConfigError("module " + mod.name + ": sets_seal_state names undeclared action '" +
                                      action + "'",
                                  mod.name);
        }
        if (!mod.has_lid && (!mod.requires_closed_for.empty() || mod.requires_open_for_access))
            throw ConfigError("module " + mod.name + " has no lid but declares lid restrictions",
                              mod.name);
        std::unordered_set<std::string> action_names;
        for (const auto& a : mod.actions)
            if (!action_names.insert(a.name).second)
                throw ConfigError("module " + mod.name + ": duplicate action '" + a.name + "'",
                                  mod.name);
        if (mod.nest && !config.find_location(*mod.nest))
            throw ConfigError("module " + mod.name + ": nest references missing location '" +
                                  *mod.nest + "'",
                              *mod.nest);
    }

    std::unordered_set<std::string> location_names;
    for (const auto& loc : config.locations) {
        if (!location_names.insert(loc.name).second)
            throw ConfigError("duplicate location name '" + loc.name + "'", loc.name);
        if (loc.capacity != 1)
            throw ConfigError("location " + loc.name + ": capacity must be 1", loc.name);
    }

    std::unordered_set<std::string> grouped;
    for (const auto& group : config.alias_groups) {
        if (group.members.size() < 2)
            throw ConfigError("alias group " + group.id + " needs at least 2 members", group.id);
        std::set<Rotation> rotations;
        for (const auto& member : group.members) {
            const LocationSpec* spec = config.find_location(member);
            if (!spec)
                throw ConfigError("alias group " + group.id + " references missing location '" +
                                      member + "'",
                                  member);
            if (!grouped.insert(member).second)
                throw ConfigError("location '" + member + "' appears in multiple alias groups",
                                  member);
            if (!rotations.insert(spec->rotation).second)
                throw ConfigError("alias group " + group.id + " members must have distinct rotations",
                                  group.id);
        }
    }

    if (!config.transfer_module.empty()) {
        const ModuleSpec* mod = config.find_module(config.transfer_module);
        if (!mod)
            throw ConfigError("transfer_module '" + config.transfer_module + "' is not a module",
                              config.transfer_module);
        if (!mod->find_action("transfer"))
            throw ConfigError("transfer_module '" + config.transfer_module +
                                  "' has no transfer action",
                              config.transfer_module);
    }

    if (config.options.max_refine_iterations < 1)
        throw ConfigError("options.max_refine_iterations must be >= 1");
}

}  // namespace

LabConfig load_lab_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(std::string("lab config: ") + e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (!root.IsMap()) throw ParseError("lab config: document must be a mapping");

    LabConfig config;
    try {
        if (root["modules"])
            for (const auto& m : root["modules"]) config.modules.push_back(parse_module(m));
        if (root["locations"]) {
            for (const auto& l : root["locations"]) {
                LocationSpec loc;
                loc.name = l["name"].as<std::string>();
                loc.rotation = rotation_from_string(l["rotation"].as<std::string>());
                loc.approach = l["approach"] ? l["approach"].as<std::string>() : "";
                if (l["capacity"]) loc.capacity = l["capacity"].as<int>();
                config.locations.push_back(loc);
            }
        }
        if (root["alias_groups"]) {
            for (const auto& g : root["alias_groups"]) {
                AliasGroup group;
                group.id = g["id"].as<std::string>();
                group.members = string_list(g["members"]);
                config.alias_groups.push_back(group);
            }
        }
        if (root["transfer_module"])
            config.transfer_module = root["transfer_module"].as<std::string>();
        if (root["options"]) {
            const auto& opt = root["options"];
            if (opt["exchange_regrip"])
                config.options.exchange_regrip = opt["exchange_regrip"].as<bool>();
            if (opt["max_refine_iterations"])
                config.options.max_refine_iterations = opt["max_refine_iterations"].as<int>();
            if (opt["halt_on_first_error"])
                config.options.halt_on_first_error = opt["halt_on_first_error"].as<bool>();
        }
    } catch (const YAML::Exception& e) {
        throw ParseError(std::string("lab config: ") + e.msg, e.mark.line + 1, e.mark.column + 1);
    }

    check_consistency(config);
    return config;
}

LabConfig load_lab_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open lab config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_lab_config(buf.str());
}

}  // namespace labsim
