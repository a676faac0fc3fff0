#include "labsim/generator.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <map>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "labsim/errors.hpp"
#include "labsim/sim.hpp"
#include "labsim/workflow.hpp"

namespace labsim {

const char* to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

void Conversation::add(Role role, std::string text) {
    messages.push_back({role, std::move(text)});
}

namespace {

bool ends_with(const std::string& s, const char* suffix) {
    std::size_t n = std::strlen(suffix);
    return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

}  // namespace

ExtractedArtifacts extract_artifacts(const std::string& response) {
    ExtractedArtifacts out;
    static const std::regex heading_re(R"(^\s*#*\s*File(?:\s+\d+)?\s*:\s*`?([^`]+?)`?\s*$)",
                                       std::regex::icase);
    static const std::regex fence_re(R"(^\s*```\s*([A-Za-z0-9_+-]*)\s*$)");

    std::istringstream in(response);
    std::string line;
    std::string pending_name;
    bool in_block = false;
    std::string lang;
    std::string block;
    int script_count = 0;

    auto flush = [&]() {
        bool is_yaml = lang == "yaml" || lang == "yml" || ends_with(pending_name, ".yaml") ||
                       ends_with(pending_name, ".yml");
        if (is_yaml) {
            std::string name = pending_name.empty() ? "workflow.yaml" : pending_name;
            out.workflows.emplace_back(name, block);
        } else {
            std::string name = pending_name.empty()
                                   ? "script_" + std::to_string(++script_count)
                                   : pending_name;
            out.scripts.emplace_back(name, block);
        }
        pending_name.clear();
        block.clear();
    };

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, fence_re)) {
            if (in_block) {
                flush();
                in_block = false;
            } else {
                in_block = true;
                lang = m[1];
                std::transform(lang.begin(), lang.end(), lang.begin(), ::tolower);
                block.clear();
            }
            continue;
        }
        if (in_block) {
            block += line;
            block += '\n';
        } else if (std::regex_match(line, m, heading_re)) {
            pending_name = m[1];
        }
    }
    if (in_block) flush();  // unterminated final fence, be lenient

    if (out.workflows.empty())
        throw ExtractionError("no YAML workflow block found in the response");
    return out;
}

ReplayBackend::ReplayBackend(std::vector<std::string> responses)
    : responses_(std::move(responses)) {}

ReplayBackend ReplayBackend::from_file(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw ParseError("replay file: " + e.msg);
    }
    if (!root["responses"] || !root["responses"].IsSequence())
        throw ParseError("replay file: expected a top-level 'responses' sequence");
    std::vector<std::string> responses;
    for (const auto& r : root["responses"]) responses.push_back(r.as<std::string>());
    return ReplayBackend(std::move(responses));
}

std::string ReplayBackend::generate(const Conversation& conversation) {
    (void)conversation;
    if (next_ >= responses_.size()) throw ReplayExhaustedError();
    return responses_[next_++];
}

ScriptedBackend::ScriptedBackend(std::string initial_response, FixScope scope, LabConfig config)
    : initial_response_(std::move(initial_response)), scope_(scope), config_(std::move(config)) {}

namespace {

std::string wrap_workflow_response(const Workflow& workflow) {
    return "Here is the corrected workflow.\n\nFile: workflow.yaml\n```yaml\n" +
           serialize_workflow(workflow) + "```\n";
}

// Static lid tracking: lids start closed, open/close steps toggle them, and
// any transfer touching a lidded nest needs that lid open.
struct LidScan {
    const LabConfig& config;

    // Returns indices (0-based, relative to the current flowdef) of steps
    // that would collide with a closed lid, with the offending module.
    std::vector<std::pair<std::size_t, std::string>> collisions(
        const std::vector<ActionStep>& flowdef) const {
        std::map<std::string, bool> open;  // module -> lid open
        std::vector<std::pair<std::size_t, std::string>> out;
        for (std::size_t i = 0; i < flowdef.size(); ++i) {
            const ActionStep& step = flowdef[i];
            if (step.action == "open") {
                open[step.module] = true;
                continue;
            }
            if (step.action == "close") {
                open[step.module] = false;
                continue;
            }
            if (step.action != "transfer") continue;
            for (const char* key : {"source", "target"}) {
                const ModuleSpec* mod = config.module_of_nest(step.arg_text(key));
                if (mod && mod->has_lid && mod->requires_open_for_access &&
                    !open[mod->name]) {
                    out.emplace_back(i, mod->name);
                    break;
                }
            }
        }
        return out;
    }
};

ActionStep make_open_step(const std::string& module) {
    ActionStep step;
    step.action = "open";
    step.name = "Open " + module;
    step.module = module;
    step.args = std::vector<std::pair<std::string, ArgValue>>{};
    return step;
}

}  // namespace

std::string ScriptedBackend::generate(const Conversation& conversation) {
    const Message* last_assistant = nullptr;
    const Message* last_user = nullptr;
    for (const auto& msg : conversation.messages) {
        if (msg.role == Role::Assistant) last_assistant = &msg;
        if (msg.role == Role::User) last_user = &msg;
    }
    if (!last_assistant) return initial_response_;
    if (!last_user) throw RuleNotApplicableError("no feedback message to act on");

    Workflow workflow;
    try {
        auto artifacts = extract_artifacts(last_assistant->text);
        workflow = parse_workflow(artifacts.workflows.back().second);
    } catch (const std::exception& e) {
        throw RuleNotApplicableError(std::string("previous response is unusable: ") + e.what());
    }

    static const std::regex error_re(
        R"(Error while executing step (\d+) .*: Collision between microplate and (\S+))");
    std::smatch m;

    if (scope_ == FixScope::Global) {
        LidScan scan{config_};
        auto collisions = scan.collisions(workflow.flowdef);
        if (collisions.empty())
            throw RuleNotApplicableError("no closed-lid collision found to fix");
        // Insert back to front so earlier indices stay valid.
        for (auto it = collisions.rbegin(); it != collisions.rend(); ++it)
            workflow.flowdef.insert(workflow.flowdef.begin() + it->first,
                                    make_open_step(it->second));
        return wrap_workflow_response(workflow);
    }

    // Localized scope fixes exactly the reported error instance.
    if (!std::regex_search(last_user->text, m, error_re))
        throw RuleNotApplicableError("feedback does not report a closed-lid collision");
    std::size_t step_index = std::stoul(m[1]);  // 1-based
    std::string module = m[2];
    if (!config_.find_module(module))
        throw RuleNotApplicableError("feedback names unknown module " + module);
    if (step_index < 1 || step_index > workflow.flowdef.size())
        throw RuleNotApplicableError("feedback step index out of range");
    workflow.flowdef.insert(workflow.flowdef.begin() + (step_index - 1),
                            make_open_step(module));
    return wrap_workflow_response(workflow);
}

RemoteConfig RemoteConfig::from_env() {
    RemoteConfig config;
    if (const char* v = std::getenv("GENERATOR_BASE_URL")) config.base_url = v;
    if (const char* v = std::getenv("GENERATOR_API_KEY")) config.api_key = v;
    if (const char* v = std::getenv("GENERATOR_MODEL")) config.model = v;
    return config;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
        throw ConfigError("remote backend needs a base URL (GENERATOR_BASE_URL)");
}

std::string RemoteBackend::generate(const Conversation& conversation) {
    // Split base_url into origin and path prefix.
    std::string origin = config_.base_url;
    std::string prefix;
    std::size_t scheme = origin.find("://");
    std::size_t slash = origin.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash != std::string::npos) {
        prefix = origin.substr(slash);
        origin = origin.substr(0, slash);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& msg : conversation.messages)
        body["messages"].push_back({{"role", to_string(msg.role)}, {"content", msg.text}});

    httplib::Client client(origin);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry_budget; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * (1 << (attempt - 1))));
        auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;  // retryable
        }
        if (res->status >= 500) {
            last_error = "server error: HTTP " + std::to_string(res->status);
            continue;  // retryable
        }
        if (res->status >= 400)
            throw BackendError("generator rejected the request: HTTP " +
                                   std::to_string(res->status) + " " + res->body,
                               false);
        try {
            auto json = nlohmann::json::parse(res->body);
            return json.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed generator response: ") + e.what(), false);
        }
    }
    throw BackendError("generator unreachable after retries: " + last_error, true);
}

}  // namespace labsim
