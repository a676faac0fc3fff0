#include "labsim/workflow.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "labsim/digest.hpp"

namespace labsim {

std::string arg_to_string(const ArgValue& v) {
    if (std::holds_alternative<std::int64_t>(v))
        return std::to_string(std::get<std::int64_t>(v));
    return std::get<std::string>(v);
}

const ArgValue* ActionStep::arg(std::string_view key) const {
    if (!args) return nullptr;
    for (const auto& [k, v] : *args)
        if (k == key) return &v;
    return nullptr;
}

std::string ActionStep::arg_text(std::string_view key) const {
    const ArgValue* v = arg(key);
    return v ? arg_to_string(*v) : std::string();
}

bool operator==(const ActionStep& a, const ActionStep& b) {
    return a.action == b.action && a.name == b.name && a.module == b.module &&
           a.args == b.args && a.files == b.files;
}

std::string render_args(const ActionStep& step) {
    std::string out = "{";
    bool first = true;
    if (step.args) {
        for (const auto& [key, value] : *step.args) {
            if (!first) out += ", ";
            first = false;
            out += "'" + key + "': ";
            if (std::holds_alternative<std::int64_t>(value))
                out += std::to_string(std::get<std::int64_t>(value));
            else
                out += "'" + std::get<std::string>(value) + "'";
        }
    }
    out += "}";
    return out;
}

bool ValidationReport::ok() const {
    return std::none_of(diagnostics.begin(), diagnostics.end(),
                        [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::vector<const Diagnostic*> ValidationReport::errors() const {
    std::vector<const Diagnostic*> out;
    for (const auto& d : diagnostics)
        if (d.severity == Severity::Error) out.push_back(&d);
    return out;
}

namespace {

bool looks_like_int(const std::string& s) {
    static const std::regex int_re(R"(^-?\d+$)");
    return std::regex_match(s, int_re);
}

ArgValue scalar_value(const YAML::Node& node) {
    auto text = node.as<std::string>();
    // Quoted scalars carry the "!" tag; keep them as text so '5' stays a
    // string while a plain 5 parses as an integer.
    if (node.Tag() != "!" && looks_like_int(text))
        return static_cast<std::int64_t>(std::stoll(text));
    return text;
}

std::string require_meta(const YAML::Node& root, const char* field) {
    if (!root[field] || root[field].IsNull())
        throw ParseError(std::string("missing required metadata field: ") + field);
    return root[field].as<std::string>();
}

}  // namespace

Workflow parse_workflow(const std::string& text, std::vector<Diagnostic>* warnings) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(std::string("workflow: ") + e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (!root.IsMap()) throw ParseError("workflow: document must be a mapping");

    Workflow wf;
    wf.name = require_meta(root, "name");
    wf.author = require_meta(root, "author");
    wf.info = require_meta(root, "info");
    wf.version = require_meta(root, "version");

    static const std::set<std::string> known_top = {"name", "author", "info", "version", "flowdef"};
    if (warnings) {
        for (const auto& kv : root) {
            auto key = kv.first.as<std::string>();
            if (!known_top.count(key))
                warnings->push_back({std::nullopt, Severity::Warning,
                                     "unknown top-level key '" + key + "' ignored"});
        }
    }

    const YAML::Node flowdef = root["flowdef"];
    if (flowdef && !flowdef.IsNull()) {
        if (!flowdef.IsSequence()) throw ParseError("workflow: flowdef must be a list");
        int index = 0;
        for (const auto& node : flowdef) {
            ++index;
            ActionStep step;
            auto field = [&](const char* name) -> std::string {
                if (!node[name])
                    throw ParseError("flowdef step " + std::to_string(index) +
                                     ": missing required field: " + name);
                return node[name].as<std::string>();
            };
            step.action = field("action");
            step.name = field("name");
            step.module = field("module");
            if (node["args"]) {
                step.args.emplace();
                for (const auto& kv : node["args"])
                    step.args->emplace_back(kv.first.as<std::string>(), scalar_value(kv.second));
            }
            if (node["files"]) {
                step.files.emplace();
                for (const auto& kv : node["files"])
                    step.files->emplace_back(kv.first.as<std::string>(),
                                             kv.second.as<std::string>());
            }
            if (warnings) {
                static const std::set<std::string> known_step = {"action", "name", "module",
                                                                 "args", "files"};
                for (const auto& kv : node) {
                    auto key = kv.first.as<std::string>();
                    if (!known_step.count(key))
                        warnings->push_back({index, Severity::Warning,
                                             "unknown step key '" + key + "' ignored"});
                }
            }
            wf.flowdef.push_back(std::move(step));
        }
    }

    if (wf.name.empty() || wf.author.empty() || wf.info.empty() || wf.version.empty()) {
        const char* field = wf.name.empty()     ? "name"
                            : wf.author.empty() ? "author"
                            : wf.info.empty()   ? "info"
                                                : "version";
        throw ParseError(std::string("metadata field must be non-empty: ") + field);
    }
    return wf;
}

namespace {

bool needs_quoting(const std::string& s) {
    if (s.empty()) return true;
    if (std::isspace(static_cast<unsigned char>(s.front())) ||
        std::isspace(static_cast<unsigned char>(s.back())))
        return true;
    static const std::string lead_specials = "!&*?|>%@`\"'#-[]{},";
    if (lead_specials.find(s.front()) != std::string::npos) return true;
    if (s.find(": ") != std::string::npos || s.find(" #") != std::string::npos) return true;
    if (s.find('\n') != std::string::npos) return true;
    if (looks_like_int(s)) return true;
    if (s == "true" || s == "false" || s == "null" || s == "~") return true;
    return false;
}

std::string quoted(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        out += c;
        if (c == '\'') out += '\'';  // YAML single-quote escaping
    }
    out += "'";
    return out;
}

std::string scalar_out(const std::string& s) {
    return needs_quoting(s) ? quoted(s) : s;
}

}  // namespace

std::string serialize_workflow(const Workflow& wf) {
    std::ostringstream out;
    out << "name: " << scalar_out(wf.name) << "\n";
    out << "author: " << scalar_out(wf.author) << "\n";
    out << "info: " << scalar_out(wf.info) << "\n";
    out << "version: " << quoted(wf.version) << "\n";
    out << "\n";
    out << "flowdef:";
    if (wf.flowdef.empty()) {
        out << " []\n";
        return out.str();
    }
    out << "\n";
    for (const auto& step : wf.flowdef) {
        out << "  - action: " << scalar_out(step.action) << "\n";
        out << "    name: " << scalar_out(step.name) << "\n";
        out << "    module: " << scalar_out(step.module) << "\n";
        if (step.args) {
            if (step.args->empty()) {
                out << "    args: {}\n";
            } else {
                out << "    args:\n";
                for (const auto& [key, value] : *step.args) {
                    out << "      " << key << ": ";
                    if (std::holds_alternative<std::int64_t>(value))
                        out << std::get<std::int64_t>(value);
                    else
                        out << scalar_out(std::get<std::string>(value));
                    out << "\n";
                }
            }
        }
        if (step.files) {
            if (step.files->empty()) {
                out << "    files: {}\n";
            } else {
                out << "    files:\n";
                for (const auto& [key, value] : *step.files)
                    out << "      " << key << ": " << scalar_out(value) << "\n";
            }
        }
        out << "\n";
    }
    std::string text = out.str();
    if (text.size() >= 2 && text[text.size() - 1] == '\n' && text[text.size() - 2] == '\n')
        text.pop_back();  // single trailing newline
    return text;
}

std::string workflow_digest(const Workflow& wf) {
    return digest_hex(serialize_workflow(wf));
}

namespace {

void check_transfer_args(const ActionStep& step, int index, const LabConfig& config,
                         ValidationReport& report) {
    static const std::vector<std::string> required = {
        "source", "source_approach", "source_plate_rotation",
        "target", "target_approach", "target_plate_rotation"};
    bool complete = true;
    for (const auto& key : required) {
        if (!step.arg(key)) {
            report.diagnostics.push_back(
                {index, Severity::Error, "transfer missing required arg '" + key + "'"});
            complete = false;
        }
    }
    if (!complete) return;

    const std::string source = step.arg_text("source");
    const std::string target = step.arg_text("target");
    for (const auto& [role, name] : {std::pair{"source", source}, std::pair{"target", target}}) {
        if (!config.find_location(name))
            report.diagnostics.push_back({index, Severity::Error,
                                          std::string("unknown ") + role + " location '" + name +
                                              "'"});
    }
    for (const char* key : {"source_approach", "target_approach"}) {
        const std::string approach = step.arg_text(key);
        if (!config.approach_known(approach))
            report.diagnostics.push_back(
                {index, Severity::Error, "unknown approach '" + approach + "'"});
    }

    Rotation src_rot{}, dst_rot{};
    bool rotations_ok = true;
    for (const auto& [key, rot] : {std::pair{"source_plate_rotation", &src_rot},
                                   std::pair{"target_plate_rotation", &dst_rot}}) {
        const std::string value = step.arg_text(key);
        try {
            *rot = rotation_from_string(value);
        } catch (const ParseError&) {
            report.diagnostics.push_back(
                {index, Severity::Error,
                 std::string(key) + " must be wide or narrow, got '" + value + "'"});
            rotations_ok = false;
        }
    }
    if (!rotations_ok) return;

    if (src_rot != dst_rot)
        report.diagnostics.push_back(
            {index, Severity::Error,
             "source and target plate rotations differ; route through the exchange deck instead"});

    // The exchange deck may be one endpoint of a transfer, never both.
    if (config.find_location(source) && config.find_location(target) &&
        config.is_exchange_alias(source) && config.is_exchange_alias(target) &&
        config.slot_of(source) == config.slot_of(target))
        report.diagnostics.push_back(
            {index, Severity::Error,
             "transfer uses the exchange deck as both source and target"});

    for (const auto& [loc_name, declared, key] :
         {std::tuple{source, src_rot, "source_plate_rotation"},
          std::tuple{target, dst_rot, "target_plate_rotation"}}) {
        const LocationSpec* loc = config.find_location(loc_name);
        if (loc && loc->rotation != declared)
            report.diagnostics.push_back(
                {index, Severity::Error,
                 std::string(key) + " is " + to_string(declared) + " but location " + loc_name +
                     " is " + to_string(loc->rotation)});
    }
}

}  // namespace

ValidationReport validate_workflow(const Workflow& wf, const LabConfig& config) {
    ValidationReport report;
    for (const auto& [field, value] :
         {std::pair{"name", wf.name}, {"author", wf.author}, {"info", wf.info},
          {"version", wf.version}}) {
        if (value.empty())
            report.diagnostics.push_back({std::nullopt, Severity::Error,
                                          std::string("metadata field '") + field + "' is empty"});
    }

    int index = 0;
    for (const auto& step : wf.flowdef) {
        ++index;
        if (step.action.empty() || step.module.empty() || step.name.empty()) {
            report.diagnostics.push_back(
                {index, Severity::Error, "step is missing action, name, or module"});
            continue;
        }
        const ModuleSpec* mod = config.find_module(step.module);
        if (!mod) {
            report.diagnostics.push_back(
                {index, Severity::Error, "unknown module '" + step.module + "'"});
            continue;
        }
        const ActionSpec* action = mod->find_action(step.action);
        if (!action) {
            report.diagnostics.push_back({index, Severity::Error,
                                          "action '" + step.action + "' not supported by module '" +
                                              step.module + "'"});
            continue;
        }
        for (const auto& arg : action->required_args) {
            if (!step.arg(arg))
                report.diagnostics.push_back(
                    {index, Severity::Error,
                     "action '" + step.action + "' missing required arg '" + arg + "'"});
        }
        if (step.args) {
            for (const auto& [key, value] : *step.args) {
                (void)value;
                bool known =
                    std::find(action->required_args.begin(), action->required_args.end(), key) !=
                        action->required_args.end() ||
                    std::find(action->optional_args.begin(), action->optional_args.end(), key) !=
                        action->optional_args.end();
                if (!known)
                    report.diagnostics.push_back(
                        {index, Severity::Warning,
                         "action '" + step.action + "' does not declare arg '" + key + "'"});
            }
        }
        for (const auto& file_key : action->requires_files) {
            bool present = false;
            if (step.files)
                for (const auto& [k, v] : *step.files) {
                    (void)v;
                    if (k == file_key) present = true;
                }
            if (!present)
                report.diagnostics.push_back(
                    {index, Severity::Error,
                     "action '" + step.action + "' missing required file '" + file_key + "'"});
        }
        if (step.action == "transfer" && step.module == config.transfer_module)
            check_transfer_args(step, index, config, report);
    }
    return report;
}

}  // namespace labsim
