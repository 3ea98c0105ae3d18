#include "rover/policy.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace rover {

const ToolSpec* PolicyProfile::find_tool(const std::string& tool_name) const {
    for (const auto& t : tools)
        if (t.name == tool_name) return &t;
    return nullptr;
}

std::vector<ToolSpec> single_turn_tools() {
    using T = ToolParam::Type;
    return {
        {kSearchTool, {{"query", T::Str}}, "web search; returns up to 10 organic results"},
        {kBrowseTool,
         {{"url", T::Str}, {"section_id", T::Int}},
         "fetch a page as plain text; long pages are split into sections, scroll with section_id"},
        {kCodeTool, {{"code", T::Str}}, "run a short stateless script; no files, no network"},
        {kCleanMemoryTool,
         {{"content", T::Str}},
         "replace the accumulated context with your own summary; required once memory overflows"},
    };
}

std::vector<ToolSpec> multi_turn_tools() {
    using T = ToolParam::Type;
    return {
        {kSearchTool, {{"query", T::Str}}, "web search; returns up to 10 organic results"},
        {kBrowseTool,
         {{"url", T::Str}, {"section_id", T::Int}},
         "fetch a page as plain text; long pages are split into sections, scroll with section_id"},
        {kCodeTool, {{"code", T::Str}}, "run a short stateless script; no files, no network"},
        {kEditMemoryTool,
         {{"entry_index", T::Int}, {"replacement", T::Str}},
         "replace one past tool result with shorter text"},
        {kDeleteMemoryTool, {{"entry_index", T::Int}}, "delete one past tool result"},
    };
}

namespace {

std::string render_tool_list(const std::vector<ToolSpec>& tools) {
    std::ostringstream out;
    for (const auto& t : tools) {
        out << "- " << t.name << "(";
        for (std::size_t i = 0; i < t.params.size(); ++i) {
            if (i) out << ", ";
            out << t.params[i].name << ": "
                << (t.params[i].type == ToolParam::Type::Str ? "str" : "int");
        }
        out << "): " << t.description << "\n";
    }
    return out.str();
}

std::string default_system_prompt(const std::vector<ToolSpec>& tools) {
    std::ostringstream out;
    out << "You are a research assistant that answers hard questions by calling tools.\n"
        << "Available tools:\n"
        << render_tool_list(tools)
        << "Call exactly one tool per turn by emitting:\n"
        << kToolCallOpen << R"({"name": "<tool>", "arguments": {...}})" << kToolCallClose << "\n"
        << "When you know the final answer, reply with the answer text alone and no tool call.";
    return out.str();
}

}  // namespace

PolicyProfile default_profile() {
    PolicyProfile p;
    p.name = "single-turn-packed";
    p.render_mode = {RenderVariant::SingleTurnPacked, CotPolicy::OmitPriorCot};
    p.tool_grammar = ToolGrammar::TaggedToolCall;
    p.tools = single_turn_tools();
    p.system_prompt = default_system_prompt(p.tools);
    return p;
}

PolicyProfile multi_turn_profile() {
    PolicyProfile p;
    p.name = "multi-turn-native";
    p.render_mode = {RenderVariant::MultiTurnNative, CotPolicy::KeepAllCot};
    p.tool_grammar = ToolGrammar::NativeFunctionCall;
    p.tools = multi_turn_tools();
    p.system_prompt = default_system_prompt(p.tools);
    return p;
}

ThinkingSplit split_thinking(const PolicyProfile& profile, const std::string& raw) {
    ThinkingSplit split;
    const std::string& open = profile.think_open;
    const std::string& close = profile.think_close;
    if (open.empty() || close.empty()) {
        split.remainder = raw;
        return split;
    }
    std::string rest = raw;
    while (true) {
        std::size_t o = rest.find(open);
        if (o == std::string::npos) break;
        std::size_t c = rest.find(close, o + open.size());
        if (c == std::string::npos) {
            // unterminated: the tail is thinking that never closed
            split.thinking += rest.substr(o + open.size());
            rest = rest.substr(0, o);
            split.unterminated = true;
            break;
        }
        split.thinking += rest.substr(o + open.size(), c - o - open.size());
        rest = rest.substr(0, o) + rest.substr(c + close.size());
    }
    split.remainder = std::move(rest);
    return split;
}

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

ParsedAction malformed(const std::string& raw, DiagnosisKind kind, std::string detail) {
    ParseDiagnosis diagnosis{kind, std::move(detail)};
    return {Malformed{raw, diagnosis}, diagnosis};
}

std::string signature_of(const ToolSpec& spec) {
    std::string sig = spec.name + "(";
    for (std::size_t i = 0; i < spec.params.size(); ++i) {
        if (i) sig += ", ";
        sig += spec.params[i].name + ":" +
               (spec.params[i].type == ToolParam::Type::Str ? "str" : "int");
    }
    return sig + ")";
}

/// Validate name/args against the profile registry and classify. `raw` only
/// feeds the Malformed payload.
ParsedAction classify_call(const PolicyProfile& profile, const std::string& raw,
                           const std::string& name, const json& args) {
    const ToolSpec* spec = profile.find_tool(name);
    if (!spec)
        return malformed(raw, DiagnosisKind::UnknownTool, "unknown tool '" + name + "'");
    if (!args.is_object())
        return malformed(raw, DiagnosisKind::BadParams,
                         "arguments must be an object; expected " + signature_of(*spec));
    for (const auto& param : spec->params) {
        if (!args.contains(param.name))
            return malformed(raw, DiagnosisKind::BadParams,
                             "missing argument '" + param.name + "'; expected " + signature_of(*spec));
        const json& v = args.at(param.name);
        if (param.type == ToolParam::Type::Str && !v.is_string())
            return malformed(raw, DiagnosisKind::BadParams,
                             "argument '" + param.name + "' must be a string; expected " +
                                 signature_of(*spec));
        if (param.type == ToolParam::Type::Int && !v.is_number_integer())
            return malformed(raw, DiagnosisKind::BadParams,
                             "argument '" + param.name + "' must be an integer; expected " +
                                 signature_of(*spec));
    }
    for (auto it = args.begin(); it != args.end(); ++it) {
        bool known = false;
        for (const auto& param : spec->params)
            if (param.name == it.key()) known = true;
        if (!known)
            return malformed(raw, DiagnosisKind::BadParams,
                             "unexpected argument '" + it.key() + "'; expected " +
                                 signature_of(*spec));
    }
    if (name == kCleanMemoryTool) {
        const std::string content = args.value("content", "");
        if (trim_copy(content).empty())
            return malformed(raw, DiagnosisKind::BadParams,
                             "clean_memory content must not be empty");
        return {CleanMemory{content}, std::nullopt};
    }
    return {ToolCall{name, args}, std::nullopt};
}

ParsedAction parse_call_payload(const PolicyProfile& profile, const std::string& raw,
                                const std::string& payload) {
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return malformed(raw, DiagnosisKind::MisplacedSpecialToken,
                         "tool call payload is not a JSON object");
    if (!j.contains("name") || !j["name"].is_string())
        return malformed(raw, DiagnosisKind::BadParams, "tool call payload has no name");
    json args = j.value("arguments", json::object());
    if (args.is_string()) {
        // endpoints often stringify the argument object
        json nested = json::parse(args.get<std::string>(), nullptr, false);
        if (nested.is_discarded())
            return malformed(raw, DiagnosisKind::BadParams, "arguments string is not valid JSON");
        args = nested;
    }
    return classify_call(profile, raw, j["name"].get<std::string>(), args);
}

ParsedAction parse_tagged(const PolicyProfile& profile, const std::string& raw) {
    ThinkingSplit split = split_thinking(profile, raw);
    if (split.unterminated)
        return malformed(raw, DiagnosisKind::MisplacedSpecialToken, "unterminated thinking segment");

    const std::string& rest = split.remainder;
    const std::string open = kToolCallOpen;
    const std::string close = kToolCallClose;

    std::size_t opens = 0, closes = 0;
    for (std::size_t pos = rest.find(open); pos != std::string::npos;
         pos = rest.find(open, pos + open.size()))
        ++opens;
    // "</tool_call>" contains no "<tool_call>" substring, counts are distinct
    for (std::size_t pos = rest.find(close); pos != std::string::npos;
         pos = rest.find(close, pos + close.size()))
        ++closes;

    if (opens == 0 && closes == 0) {
        const std::string text = trim_copy(rest);
        if (text.empty()) return malformed(raw, DiagnosisKind::NoAction, "empty response");
        return {FinalAnswer{text}, std::nullopt};
    }
    if (opens != 1 || closes != 1)
        return malformed(raw, DiagnosisKind::MisplacedSpecialToken, "unbalanced tool call markers");

    const std::size_t open_at = rest.find(open);
    const std::size_t close_at = rest.find(close);
    if (close_at < open_at)
        return malformed(raw, DiagnosisKind::MisplacedSpecialToken, "tool call markers out of order");
    if (!trim_copy(rest.substr(0, open_at)).empty() ||
        !trim_copy(rest.substr(close_at + close.size())).empty())
        return malformed(raw, DiagnosisKind::MisplacedSpecialToken,
                         "text outside the tool call block");

    const std::string payload =
        rest.substr(open_at + open.size(), close_at - open_at - open.size());
    return parse_call_payload(profile, raw, payload);
}

ParsedAction parse_native(const PolicyProfile& profile, const std::string& raw) {
    json envelope = json::parse(raw, nullptr, false);
    if (envelope.is_discarded() || !envelope.is_object()) {
        // Plain text from a native endpoint is a final answer.
        const std::string text = trim_copy(raw);
        if (text.empty()) return malformed(raw, DiagnosisKind::NoAction, "empty response");
        return {FinalAnswer{text}, std::nullopt};
    }
    const auto calls = envelope.value("tool_calls", json::array());
    if (calls.is_array() && !calls.empty()) {
        const json& first = calls.at(0);
        if (!first.is_object() || !first.contains("name") || !first["name"].is_string())
            return malformed(raw, DiagnosisKind::BadParams, "tool call entry has no name");
        json args = first.value("arguments", json::object());
        if (args.is_string()) {
            json nested = json::parse(args.get<std::string>(), nullptr, false);
            if (nested.is_discarded())
                return malformed(raw, DiagnosisKind::BadParams,
                                 "arguments string is not valid JSON");
            args = nested;
        }
        return classify_call(profile, raw, first["name"].get<std::string>(), args);
    }
    const std::string content = trim_copy(envelope.value("content", ""));
    if (content.empty()) return malformed(raw, DiagnosisKind::NoAction, "empty native response");
    return {FinalAnswer{content}, std::nullopt};
}

}  // namespace

ParsedAction parse_action(const PolicyProfile& profile, const std::string& raw) {
    if (profile.tool_grammar == ToolGrammar::NativeFunctionCall) return parse_native(profile, raw);
    return parse_tagged(profile, raw);
}

namespace {

// Coerce "3" -> 3 for integer params; the value must already be in the text.
bool coerce_int_strings(const PolicyProfile& profile, json& payload) {
    if (!payload.is_object() || !payload.contains("name") || !payload["name"].is_string())
        return false;
    const ToolSpec* spec = profile.find_tool(payload["name"].get<std::string>());
    if (!spec || !payload.contains("arguments") || !payload["arguments"].is_object()) return false;
    bool changed = false;
    for (const auto& param : spec->params) {
        if (param.type != ToolParam::Type::Int) continue;
        json& args = payload["arguments"];
        if (!args.contains(param.name)) continue;
        json& v = args[param.name];
        if (v.is_string()) {
            const std::string s = trim_copy(v.get<std::string>());
            if (s.empty()) continue;
            std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
            if (i >= s.size()) continue;
            bool digits = true;
            for (; i < s.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(s[i]))) digits = false;
            if (!digits) continue;
            v = std::stoll(s);
            changed = true;
        } else if (v.is_number_float()) {
            const double d = v.get<double>();
            if (d == static_cast<double>(static_cast<long long>(d))) {
                v = static_cast<long long>(d);
                changed = true;
            }
        }
    }
    return changed;
}

std::optional<ParsedAction> try_reparse(const PolicyProfile& profile, const std::string& candidate,
                                        const ParseDiagnosis& original) {
    ParsedAction parsed = parse_action(profile, candidate);
    if (parsed.malformed()) return std::nullopt;
    parsed.diagnosis = original;  // mark as repaired
    return parsed;
}

}  // namespace

RepairOutcome attempt_repair(const PolicyProfile& profile, const std::string& raw,
                             const ParseDiagnosis& diagnosis) {
    const std::string open = kToolCallOpen;
    const std::string close = kToolCallClose;

    if (diagnosis.kind == DiagnosisKind::UnknownTool) return {};

    if (diagnosis.kind == DiagnosisKind::BadParams) {
        // only the numeric-string coercion applies; structure was fine
        ThinkingSplit split = split_thinking(profile, raw);
        std::string body = split.remainder;
        std::size_t o = body.find(open), c = body.find(close);
        std::string payload;
        if (o != std::string::npos && c != std::string::npos && c > o)
            payload = body.substr(o + open.size(), c - o - open.size());
        else if (profile.tool_grammar == ToolGrammar::NativeFunctionCall)
            payload = raw;
        if (payload.empty()) return {};
        json j = json::parse(payload, nullptr, false);
        if (j.is_discarded()) return {};
        if (profile.tool_grammar == ToolGrammar::NativeFunctionCall) {
            if (!j.contains("tool_calls") || !j["tool_calls"].is_array() || j["tool_calls"].empty())
                return {};
            json& entry = j["tool_calls"][0];
            if (!coerce_int_strings(profile, entry)) return {};
            if (auto fixed = try_reparse(profile, j.dump(), diagnosis)) return {true, *fixed};
            return {};
        }
        if (!coerce_int_strings(profile, j)) return {};
        if (auto fixed = try_reparse(profile, open + j.dump() + close, diagnosis))
            return {true, *fixed};
        return {};
    }

    // MisplacedSpecialToken / NoAction: rebalance or relocate call markers.
    // 1. a complete block exists somewhere in the raw text: take it alone
    {
        std::size_t o = raw.find(open);
        if (o != std::string::npos) {
            std::size_t c = raw.find(close, o + open.size());
            if (c != std::string::npos) {
                std::string block = raw.substr(o, c + close.size() - o);
                if (auto fixed = try_reparse(profile, block, diagnosis)) return {true, *fixed};
            }
        }
    }
    // 2. opener without closer: append the closer
    {
        std::size_t o = raw.find(open);
        if (o != std::string::npos && raw.find(close, o + open.size()) == std::string::npos) {
            if (auto fixed = try_reparse(profile, raw.substr(o) + close, diagnosis))
                return {true, *fixed};
        }
    }
    // 3. closer landed inside the payload: move it to the end
    {
        std::size_t o = raw.find(open);
        std::size_t c = raw.find(close);
        if (o != std::string::npos && c != std::string::npos) {
            std::string moved = raw.substr(o);
            std::size_t rel = moved.find(close);
            if (rel != std::string::npos) {
                moved.erase(rel, close.size());
                moved = open + moved.substr(open.size()) + close;
                if (auto fixed = try_reparse(profile, moved, diagnosis)) return {true, *fixed};
            }
        }
    }
    // 4. bare JSON call with no markers at all: wrap it
    {
        std::size_t brace = raw.find('{');
        std::size_t last = raw.rfind('}');
        if (brace != std::string::npos && last != std::string::npos && last > brace) {
            json j = json::parse(raw.substr(brace, last - brace + 1), nullptr, false);
            if (j.is_object() && j.contains("name")) {
                if (auto fixed = try_reparse(profile, open + j.dump() + close, diagnosis))
                    return {true, *fixed};
            }
        }
    }
    return {};
}

// --- completion backends ---

Completion ScriptedPolicy::complete(const PromptText& prompt) {
    last_prompt_ = prompt;
    if (cursor_ >= script_.size()) return {CompletionStatus::Ok, "<script-exhausted>", std::nullopt};
    return {CompletionStatus::Ok, script_[cursor_++], std::nullopt};
}

ChatEndpointConfig endpoint_from_env() {
    ChatEndpointConfig config;
    if (const char* url = std::getenv("ROVER_LLM_BASE_URL")) config.base_url = url;
    if (const char* model = std::getenv("ROVER_LLM_MODEL")) config.model = model;
    return config;
}

HttpPolicyClient::HttpPolicyClient(ChatEndpointConfig config, PolicyProfile profile)
    : config_(std::move(config)), profile_(std::move(profile)) {}

Completion HttpPolicyClient::complete(const PromptText& prompt) {
    json body;
    body["model"] = config_.model;
    body["max_tokens"] = profile_.generation.max_tokens;
    body["temperature"] = profile_.generation.temperature;
    json messages = json::array();
    for (const auto& m : prompt.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
    body["messages"] = std::move(messages);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string response_body;
    bool got_response = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config_.backoff_ms * (1LL << (attempt - 1))));
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        auto res = client.Post(config_.path, headers, body.dump(), "application/json");
        if (!res) continue;
        if (res->status >= 500) continue;
        if (res->status == 400 &&
            res->body.find("context") != std::string::npos &&
            res->body.find("length") != std::string::npos)
            return {CompletionStatus::ContextLengthExceeded, "", std::nullopt};
        if (res->status != 200) continue;
        response_body = res->body;
        got_response = true;
        break;
    }
    if (!got_response) return {CompletionStatus::EndpointUnavailable, "", std::nullopt};

    json j = json::parse(response_body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty())
        return {CompletionStatus::EndpointUnavailable, "", std::nullopt};
    const json& message = j["choices"][0].value("message", json::object());

    Completion completion;
    completion.status = CompletionStatus::Ok;
    if (message.contains("tool_calls") && message["tool_calls"].is_array() &&
        !message["tool_calls"].empty()) {
        json envelope;
        envelope["content"] = message.value("content", "");
        json calls = json::array();
        for (const auto& call : message["tool_calls"]) {
            const json fn = call.value("function", call);
            calls.push_back({{"name", fn.value("name", "")},
                             {"arguments", fn.value("arguments", json::object())}});
        }
        envelope["tool_calls"] = std::move(calls);
        completion.raw = envelope.dump();
    } else {
        completion.raw = message.value("content", "");
    }
    // sequence log-prob when token logprobs are reported
    const json& lp = j["choices"][0].value("logprobs", json(nullptr));
    if (lp.is_object() && lp.contains("content") && lp["content"].is_array()) {
        double total = 0.0;
        for (const auto& tok : lp["content"]) total += tok.value("logprob", 0.0);
        completion.logprob = total;
    }
    return completion;
}

}  // namespace rover
