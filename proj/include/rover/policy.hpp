#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rover/types.hpp"

namespace rover {

enum class ToolGrammar { TaggedToolCall, NativeFunctionCall };

struct ToolParam {
    enum class Type { Str, Int };
    std::string name;
    Type type = Type::Str;
};

struct ToolSpec {
    std::string name;
    std::vector<ToolParam> params;
    std::string description;
};

struct GenerationLimits {
    int max_tokens = 2048;
    double temperature = 0.6;  // 0 for deterministic eval reruns
};

struct PolicyProfile {
    std::string name = "default";
    RenderMode render_mode;
    ToolGrammar tool_grammar = ToolGrammar::TaggedToolCall;
    std::string think_open = "<think>";
    std::string think_close = "</think>";
    GenerationLimits generation;
    std::vector<ToolSpec> tools;
    std::string system_prompt;

    const ToolSpec* find_tool(const std::string& name) const;
};

/// Single-turn packed profile (clean_memory available, prior CoT omitted).
PolicyProfile default_profile();
/// Multi-turn native profile (edit/delete memory tools, CoT kept).
PolicyProfile multi_turn_profile();

std::vector<ToolSpec> single_turn_tools();
std::vector<ToolSpec> multi_turn_tools();

inline constexpr const char* kToolCallOpen = "<tool_call>";
inline constexpr const char* kToolCallClose = "</tool_call>";

struct ParsedAction {
    AgentAction action;
    // Present iff the action is Malformed or was produced by a repair.
    std::optional<ParseDiagnosis> diagnosis;

    bool malformed() const { return std::holds_alternative<Malformed>(action); }
};

/// Thinking-segment split: removes complete <think>..</think> spans; an
/// unterminated opener swallows the rest of the text and sets the flag.
struct ThinkingSplit {
    std::string remainder;
    std::string thinking;
    bool unterminated = false;
};
ThinkingSplit split_thinking(const PolicyProfile& profile, const std::string& raw);

/// Total over arbitrary bytes: malformation is data, never an exception.
ParsedAction parse_action(const PolicyProfile& profile, const std::string& raw);

struct RepairOutcome {
    bool repaired = false;
    ParsedAction action;
};

/// Deterministic repair set: extract a complete call block out of surrounding
/// prose, rebalance/move call markers, coerce numeric strings for integer
/// params. Success requires the repaired text to re-parse cleanly; the tool
/// name and arguments always come from the raw text.
RepairOutcome attempt_repair(const PolicyProfile& profile, const std::string& raw,
                             const ParseDiagnosis& diagnosis);

// --- completion backends ---

enum class CompletionStatus { Ok, EndpointUnavailable, ContextLengthExceeded };

struct Completion {
    CompletionStatus status = CompletionStatus::Ok;
    std::string raw;
    std::optional<double> logprob;  // sequence log-prob when the endpoint reports one
};

class PolicyHandle {
public:
    virtual ~PolicyHandle() = default;
    virtual Completion complete(const PromptText& prompt) = 0;
};

/// Deterministic test double: emits its script entries in order, then final
/// answers "<script-exhausted>". Single-owner (has a cursor).
class ScriptedPolicy : public PolicyHandle {
public:
    explicit ScriptedPolicy(std::vector<std::string> script) : script_(std::move(script)) {}

    Completion complete(const PromptText& prompt) override;

    std::size_t cursor() const { return cursor_; }
    const PromptText& last_prompt() const { return last_prompt_; }

private:
    std::vector<std::string> script_;
    std::size_t cursor_ = 0;
    PromptText last_prompt_;
};

struct ChatEndpointConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key_env = "ROVER_LLM_API_KEY";
    int max_retries = 3;
    int backoff_ms = 1000;  // doubles per retry
    int timeout_seconds = 600;
};

ChatEndpointConfig endpoint_from_env();

/// Client for a chat-completion endpoint: {model, messages, max_tokens,
/// temperature} in, choices with message text (and optionally structured tool
/// calls) out. Structured tool calls are re-encoded as the native-grammar
/// JSON envelope so parse_action sees one uniform raw string.
class HttpPolicyClient : public PolicyHandle {
public:
    HttpPolicyClient(ChatEndpointConfig config, PolicyProfile profile);

    Completion complete(const PromptText& prompt) override;

private:
    ChatEndpointConfig config_;
    PolicyProfile profile_;
};

}  // namespace rover
