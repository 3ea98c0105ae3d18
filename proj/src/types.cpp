#include "rover/types.hpp"

#include <stdexcept>

namespace rover {

std::string termination_name(Termination t) {
    switch (t) {
        case Termination::Answered: return "answered";
        case Termination::StepBudgetExceeded: return "step_budget_exceeded";
        case Termination::ContextTruncated: return "context_truncated";
        case Termination::FormatFailure: return "format_failure";
        case Termination::ToolFatal: return "tool_fatal";
    }
    return "unknown";
}

std::optional<Termination> termination_from_name(const std::string& name) {
    if (name == "answered") return Termination::Answered;
    if (name == "step_budget_exceeded") return Termination::StepBudgetExceeded;
    if (name == "context_truncated") return Termination::ContextTruncated;
    if (name == "format_failure") return Termination::FormatFailure;
    if (name == "tool_fatal") return Termination::ToolFatal;
    return std::nullopt;
}

namespace {

const char* diagnosis_name(DiagnosisKind k) {
    switch (k) {
        case DiagnosisKind::MisplacedSpecialToken: return "misplaced_special_token";
        case DiagnosisKind::UnknownTool: return "unknown_tool";
        case DiagnosisKind::BadParams: return "bad_params";
        case DiagnosisKind::NoAction: return "no_action";
    }
    return "unknown";
}

DiagnosisKind diagnosis_from_name(const std::string& name) {
    if (name == "misplaced_special_token") return DiagnosisKind::MisplacedSpecialToken;
    if (name == "unknown_tool") return DiagnosisKind::UnknownTool;
    if (name == "bad_params") return DiagnosisKind::BadParams;
    return DiagnosisKind::NoAction;
}

}  // namespace

json action_to_json(const AgentAction& action) {
    json j;
    if (const auto* call = std::get_if<ToolCall>(&action)) {
        j["type"] = "tool_call";
        j["name"] = call->name;
        j["args"] = call->args;
    } else if (const auto* clean = std::get_if<CleanMemory>(&action)) {
        j["type"] = "clean_memory";
        j["content"] = clean->content;
    } else if (const auto* fin = std::get_if<FinalAnswer>(&action)) {
        j["type"] = "final_answer";
        j["text"] = fin->text;
    } else {
        const auto& bad = std::get<Malformed>(action);
        j["type"] = "malformed";
        j["raw"] = bad.raw;
        j["diagnosis"] = diagnosis_name(bad.diagnosis.kind);
        j["detail"] = bad.diagnosis.detail;
    }
    return j;
}

AgentAction action_from_json(const json& j) {
    const std::string type = j.value("type", "");
    if (type == "tool_call") return ToolCall{j.value("name", ""), j.value("args", json::object())};
    if (type == "clean_memory") return CleanMemory{j.value("content", "")};
    if (type == "final_answer") return FinalAnswer{j.value("text", "")};
    if (type == "malformed")
        return Malformed{j.value("raw", ""),
                         {diagnosis_from_name(j.value("diagnosis", "")), j.value("detail", "")}};
    throw std::runtime_error("unknown action type: " + type);
}

json trajectory_to_json(const Trajectory& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        json step;
        step["index"] = s.index;
        step["model_response"] = s.model_response;
        step["action"] = action_to_json(s.action);
        step["tool_result"] =
            s.tool_result ? json{{"text", s.tool_result->text}, {"is_error", s.tool_result->is_error}}
                          : json(nullptr);
        step["response_token_count"] = s.response_token_count;
        if (s.logprob) step["logprob"] = *s.logprob;
        steps.push_back(std::move(step));
    }
    json j;
    j["question_id"] = t.question.id;
    j["question"] = t.question.text;
    j["task_kind"] = t.question.task_kind == TaskKind::ShortFormQA ? "short_form_qa" : "long_form_report";
    j["steps"] = std::move(steps);
    j["final_answer"] = t.final_answer ? json(*t.final_answer) : json(nullptr);
    j["termination"] = t.termination ? json(termination_name(*t.termination)) : json(nullptr);
    j["reward"] = t.reward ? json(*t.reward) : json(nullptr);
    if (!t.tool_call_counts.empty()) j["tool_call_counts"] = t.tool_call_counts;
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.question.id = j.value("question_id", "");
    t.question.text = j.value("question", "");
    t.question.task_kind =
        j.value("task_kind", "short_form_qa") == "long_form_report" ? TaskKind::LongFormReport
                                                                    : TaskKind::ShortFormQA;
    for (const auto& step : j.value("steps", json::array())) {
        Step s;
        s.index = step.value("index", 0);
        s.model_response = step.value("model_response", "");
        s.action = action_from_json(step.at("action"));
        if (step.contains("tool_result") && !step["tool_result"].is_null())
            s.tool_result = ToolResult{step["tool_result"].value("text", ""),
                                       step["tool_result"].value("is_error", false)};
        s.response_token_count = step.value("response_token_count", std::size_t{0});
        if (step.contains("logprob") && step["logprob"].is_number())
            s.logprob = step["logprob"].get<double>();
        t.steps.push_back(std::move(s));
    }
    if (j.contains("final_answer") && !j["final_answer"].is_null())
        t.final_answer = j["final_answer"].get<std::string>();
    if (j.contains("termination") && !j["termination"].is_null())
        t.termination = termination_from_name(j["termination"].get<std::string>());
    if (j.contains("reward") && !j["reward"].is_null()) t.reward = j["reward"].get<double>();
    if (j.contains("tool_call_counts"))
        t.tool_call_counts = j["tool_call_counts"].get<std::map<std::string, int>>();
    return t;
}

std::string trajectory_to_jsonl(const Trajectory& t) {
    return trajectory_to_json(t).dump() + "\n";
}

}  // namespace rover
