#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace rover {

using json = nlohmann::json;

// Tool names form the action vocabulary shared by the parser, the memory
// gate, and the episode loop.
inline constexpr const char* kSearchTool = "search_internet";
inline constexpr const char* kBrowseTool = "browse_page";
inline constexpr const char* kCodeTool = "code_interpreter";
inline constexpr const char* kCleanMemoryTool = "clean_memory";
inline constexpr const char* kEditMemoryTool = "edit_memory";
inline constexpr const char* kDeleteMemoryTool = "delete_memory";

enum class TaskKind { ShortFormQA, LongFormReport };

struct Question {
    std::string id;
    std::string text;
    TaskKind task_kind = TaskKind::ShortFormQA;
    // Gold answer (short form) or rubric reference (long form), when known.
    std::optional<std::string> gold;
};

enum class DiagnosisKind { MisplacedSpecialToken, UnknownTool, BadParams, NoAction };

struct ParseDiagnosis {
    DiagnosisKind kind = DiagnosisKind::NoAction;
    std::string detail;
};

struct ToolCall {
    std::string name;
    json args = json::object();

    bool operator==(const ToolCall& other) const {
        return name == other.name && args == other.args;
    }
};

struct CleanMemory {
    std::string content;
    bool operator==(const CleanMemory& other) const { return content == other.content; }
};

struct FinalAnswer {
    std::string text;
    bool operator==(const FinalAnswer& other) const { return text == other.text; }
};

struct Malformed {
    std::string raw;
    ParseDiagnosis diagnosis;
};

using AgentAction = std::variant<ToolCall, CleanMemory, FinalAnswer, Malformed>;

/// Agent-visible outcome of one tool invocation, rendered as observation text.
struct ToolResult {
    std::string text;
    bool is_error = false;

    bool operator==(const ToolResult& other) const {
        return text == other.text && is_error == other.is_error;
    }
};

struct Step {
    int index = 0;  // 1-based, strictly increasing within a trajectory
    std::string model_response;
    AgentAction action;
    std::optional<ToolResult> tool_result;
    std::size_t response_token_count = 0;
    // Present when the policy endpoint reports sequence log-probs (or for the
    // toy simulator, where they are analytic). Not part of the core record.
    std::optional<double> logprob;
};

enum class Termination {
    Answered,
    StepBudgetExceeded,
    ContextTruncated,
    FormatFailure,
    ToolFatal,
};

struct Trajectory {
    Question question;
    std::vector<Step> steps;
    std::optional<std::string> final_answer;
    std::optional<Termination> termination;
    std::optional<double> reward;
    std::map<std::string, int> tool_call_counts;

    std::size_t length() const { return steps.size(); }
    bool terminated() const { return termination.has_value(); }
};

enum class RenderVariant { SingleTurnPacked, MultiTurnNative };
enum class CotPolicy { OmitPriorCot, KeepAllCot };

struct RenderMode {
    RenderVariant variant = RenderVariant::SingleTurnPacked;
    CotPolicy cot_policy = CotPolicy::OmitPriorCot;
};

struct Message {
    std::string role;  // "system" | "user" | "assistant" | "tool"
    std::string text;
};

struct PromptText {
    std::vector<Message> messages;
    std::size_t token_count = 0;

    std::size_t count_role(std::string_view role) const {
        std::size_t n = 0;
        for (const auto& m : messages)
            if (m.role == role) ++n;
        return n;
    }
};

// --- serialization (external interface: field names are part of the contract) ---

std::string termination_name(Termination t);
std::optional<Termination> termination_from_name(const std::string& name);

json action_to_json(const AgentAction& action);
AgentAction action_from_json(const json& j);

json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j);

/// One JSON object per line.
std::string trajectory_to_jsonl(const Trajectory& t);

}  // namespace rover
