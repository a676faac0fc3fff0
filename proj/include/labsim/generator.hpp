#pragma once

#include <memory>
#include <string>
#include <vector>

#include "labsim/lab_model.hpp"

namespace labsim {

enum class Role { System, User, Assistant };
const char* to_string(Role r);

struct Message {
    Role role = Role::User;
    std::string text;
};

struct Conversation {
    std::vector<Message> messages;

    void add(Role role, std::string text);
};

class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& message, bool retryable = false)
        : std::runtime_error(message), retryable_(retryable) {}

    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

class ReplayExhaustedError : public BackendError {
public:
    ReplayExhaustedError() : BackendError("replay backend has no responses left") {}
};

class RuleNotApplicableError : public BackendError {
public:
    explicit RuleNotApplicableError(const std::string& why)
        : BackendError("scripted rule not applicable: " + why) {}
};

class ExtractionError : public std::runtime_error {
public:
    explicit ExtractionError(const std::string& message) : std::runtime_error(message) {}
};

struct ExtractedArtifacts {
    // filename -> document text, document order preserved.
    std::vector<std::pair<std::string, std::string>> workflows;
    std::vector<std::pair<std::string, std::string>> scripts;
};

/// Pair fenced code blocks with the nearest preceding "File:" heading.
/// Blocks fenced as yaml (or named *.yaml/*.yml) are workflows, the rest are
/// opaque scripts. Throws ExtractionError when no workflow is found.
ExtractedArtifacts extract_artifacts(const std::string& response);

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;

    /// One assistant message for the conversation so far.
    virtual std::string generate(const Conversation& conversation) = 0;
    virtual std::string kind() const = 0;
};

/// Deterministic backend: canned responses consumed strictly in order.
class ReplayBackend : public GeneratorBackend {
public:
    explicit ReplayBackend(std::vector<std::string> responses);
    static ReplayBackend from_file(const std::string& path);

    std::string generate(const Conversation& conversation) override;
    std::string kind() const override { return "replay"; }

    std::size_t remaining() const { return responses_.size() - next_; }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

/// Rule-based fixer reproducing the two correction styles seen in model
/// behavior: fix one error instance per iteration, or fix every instance of
/// the pattern at once.
class ScriptedBackend : public GeneratorBackend {
public:
    enum class FixScope { Localized, Global };

    ScriptedBackend(std::string initial_response, FixScope scope, LabConfig config);

    std::string generate(const Conversation& conversation) override;
    std::string kind() const override { return "scripted"; }

private:
    std::string initial_response_;
    FixScope scope_;
    LabConfig config_;
};

struct RemoteConfig {
    std::string base_url;  // e.g. http://localhost:8080/v1
    std::string api_key;
    std::string model;
    int timeout_seconds = 120;
    int retry_budget = 2;

    /// GENERATOR_BASE_URL / GENERATOR_API_KEY / GENERATOR_MODEL.
    static RemoteConfig from_env();
};

/// Chat-completions client. Blocking, single-shot, retry-with-backoff on
/// transport failures and 5xx; never retries 4xx.
class RemoteBackend : public GeneratorBackend {
public:
    explicit RemoteBackend(RemoteConfig config);

    std::string generate(const Conversation& conversation) override;
    std::string kind() const override { return "remote"; }

private:
    RemoteConfig config_;
};

}  // namespace labsim
