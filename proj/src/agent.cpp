#include "rover/agent.hpp"

#include <sstream>

namespace rover {

namespace {

std::string overflow_notice(const PolicyProfile& profile) {
    if (profile.find_tool(kCleanMemoryTool))
        return "[system notice] memory exceeds the buffer; call clean_memory(content) with a "
               "summary of the important findings so far. Every other action will fail until "
               "the memory is cleaned.";
    return "[system notice] memory exceeds the buffer; shrink it with " +
           std::string(kEditMemoryTool) + "/" + kDeleteMemoryTool +
           " before taking any other action.";
}

std::string format_call_record(const EpisodeConfig& config, const std::string& model_response) {
    if (config.profile.render_mode.cot_policy == CotPolicy::OmitPriorCot)
        return split_thinking(config.profile, model_response).remainder;
    return model_response;
}

std::string format_result_record(const ToolResult& result) {
    return "<tool_response>\n" + result.text + "\n</tool_response>";
}

std::size_t prompt_tokens(const PromptText& prompt, const TokenCounter& counter) {
    std::size_t total = 0;
    for (const auto& m : prompt.messages) total += counter(m.text);
    return total;
}

bool is_memory_tool(const std::string& name) {
    return name == kEditMemoryTool || name == kDeleteMemoryTool;
}

}  // namespace

MemoryBuffer make_episode_memory(const Question& q, const EpisodeConfig& config) {
    return MemoryBuffer(config.budget, config.counter, config.counter(q.text));
}

RenderedPrompt render_prompt(const Trajectory& prefix, const MemoryBuffer& memory,
                             const EpisodeConfig& config) {
    const PolicyProfile& profile = config.profile;
    RenderedPrompt rendered;
    PromptText& prompt = rendered.prompt;

    if (profile.render_mode.variant == RenderVariant::SingleTurnPacked) {
        std::ostringstream user;
        user << prefix.question.text;
        for (const auto& entry : memory.entries()) user << "\n\n" << entry.text;
        if (memory.overflow()) user << "\n\n" << overflow_notice(profile);
        if (!profile.system_prompt.empty()) prompt.messages.push_back({"system", profile.system_prompt});
        prompt.messages.push_back({"user", user.str()});
    } else {
        if (!profile.system_prompt.empty()) prompt.messages.push_back({"system", profile.system_prompt});
        prompt.messages.push_back({"user", prefix.question.text});
        std::size_t result_index = 0;
        for (const auto& entry : memory.entries()) {
            switch (entry.kind) {
                case EntryKind::ToolCallRecord:
                    prompt.messages.push_back({"assistant", entry.text});
                    break;
                case EntryKind::ToolResultRecord:
                    prompt.messages.push_back(
                        {"tool", "[entry " + std::to_string(result_index) + "]\n" + entry.text});
                    break;
                case EntryKind::CleanupSnapshot:
                    prompt.messages.push_back({"user", "[context snapshot]\n" + entry.text});
                    break;
                case EntryKind::SystemNotice:
                    prompt.messages.push_back({"user", entry.text});
                    break;
            }
            ++result_index;
        }
        if (memory.overflow()) prompt.messages.push_back({"user", overflow_notice(profile)});
    }

    prompt.token_count = prompt_tokens(prompt, config.counter);
    if (prompt.token_count > config.budget.context_limit) rendered.status = RenderStatus::BudgetExceeded;
    return rendered;
}

RenderedPrompt render_cleanup_prompt(const Trajectory& prefix, const MemoryBuffer& memory,
                                     const EpisodeConfig& config) {
    const PolicyProfile& profile = config.profile;
    RenderedPrompt rendered;
    PromptText& prompt = rendered.prompt;

    const std::string notice = overflow_notice(profile);
    std::size_t fixed = config.counter(profile.system_prompt) +
                        config.counter(prefix.question.text) + config.counter(notice) +
                        config.budget.reserve;
    const std::size_t limit = config.budget.context_limit;
    std::size_t room = limit > fixed ? limit - fixed : 0;

    // keep the newest entries that fit
    std::vector<const MemoryEntry*> tail;
    for (auto it = memory.entries().rbegin(); it != memory.entries().rend(); ++it) {
        if (it->token_count > room) break;
        room -= it->token_count;
        tail.push_back(&*it);
    }

    std::ostringstream user;
    user << prefix.question.text;
    user << "\n\n[context truncated: the packed memory no longer fits the window; "
            "only the most recent records follow]";
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) user << "\n\n" << (*it)->text;
    user << "\n\n" << notice;

    if (!profile.system_prompt.empty()) prompt.messages.push_back({"system", profile.system_prompt});
    prompt.messages.push_back({"user", user.str()});
    prompt.token_count = prompt_tokens(prompt, config.counter);
    if (prompt.token_count > config.budget.context_limit) rendered.status = RenderStatus::BudgetExceeded;
    return rendered;
}

NextDirective apply_action(Trajectory& state, MemoryBuffer& memory, const AgentAction& action,
                           const std::string& model_response, const EpisodeConfig& config,
                           std::optional<double> logprob) {
    (void)memory;  // mutation happens in apply_step_to_memory, once the observation is known
    Step step;
    step.index = static_cast<int>(state.steps.size()) + 1;
    step.model_response = model_response;
    step.action = action;
    step.response_token_count = config.counter(model_response);
    step.logprob = logprob;
    state.steps.push_back(std::move(step));

    NextDirective directive;
    if (const auto* call = std::get_if<ToolCall>(&action)) {
        directive.kind = DirectiveKind::ExecuteTool;
        directive.call = *call;
    } else if (std::holds_alternative<CleanMemory>(action)) {
        directive.kind = DirectiveKind::Continue;
    } else if (const auto* fin = std::get_if<FinalAnswer>(&action)) {
        state.final_answer = fin->text;
        state.termination = Termination::Answered;
        directive.kind = DirectiveKind::Finished;
    } else {
        const auto& bad = std::get<Malformed>(action);
        directive.kind = DirectiveKind::FaultProtocol;
        directive.raw = bad.raw;
        directive.diagnosis = bad.diagnosis;
    }
    return directive;
}

MemoryApplyInfo apply_step_to_memory(MemoryBuffer& memory, const Step& step,
                                     const EpisodeConfig& config) {
    MemoryApplyInfo info;
    if (memory.gate(step.action) == GateResult::MemoryOverflowError) {
        info.locked = true;
        return info;  // lockout: the buffer stays untouched
    }
    if (const auto* clean = std::get_if<CleanMemory>(&step.action)) {
        info.cleanup = memory.apply_cleanup(clean->content);
        if (*info.cleanup == CleanupStatus::CleanupTooLarge)
            memory.append(EntryKind::SystemNotice,
                          "[clean_memory rejected: snapshot too large; summarize more aggressively]");
        return info;
    }
    if (const auto* call = std::get_if<ToolCall>(&step.action)) {
        if (call->name == kEditMemoryTool || call->name == kDeleteMemoryTool) {
            const long long idx = call->args.value("entry_index", -1LL);
            if (idx < 0) {
                info.edit = EditStatus::NoSuchEntry;
            } else if (call->name == kEditMemoryTool) {
                info.edit = memory.edit_entry(static_cast<std::size_t>(idx),
                                              call->args.value("replacement", ""));
            } else {
                info.edit = memory.edit_entry(static_cast<std::size_t>(idx), std::nullopt);
            }
            if (*info.edit == EditStatus::NoSuchEntry)
                memory.append(EntryKind::SystemNotice,
                              "[" + call->name + " failed: no tool result at entry " +
                                  std::to_string(idx) + "]");
            return info;
        }
        memory.append(EntryKind::ToolCallRecord, format_call_record(config, step.model_response));
        if (step.tool_result)
            memory.append(EntryKind::ToolResultRecord, format_result_record(*step.tool_result));
        return info;
    }
    if (std::holds_alternative<Malformed>(step.action)) {
        // the injected error must be visible at the next step
        memory.append(EntryKind::ToolCallRecord, format_call_record(config, step.model_response));
        if (step.tool_result)
            memory.append(EntryKind::ToolResultRecord, format_result_record(*step.tool_result));
    }
    return info;  // FinalAnswer: terminal, nothing to record
}

Resolution fault_protocol(const std::string& raw, const ParseDiagnosis& diagnosis, int attempt,
                          const EpisodeConfig& config) {
    Resolution res;
    if (diagnosis.kind == DiagnosisKind::UnknownTool) {
        std::string tools;
        for (const auto& t : config.profile.tools) tools += (tools.empty() ? "" : ", ") + t.name;
        res.kind = Resolution::Kind::InjectError;
        res.message = "tool error: " + diagnosis.detail + "; available tools are: " + tools;
        return res;
    }
    if (diagnosis.kind == DiagnosisKind::BadParams) {
        RepairOutcome repair = attempt_repair(config.profile, raw, diagnosis);
        if (repair.repaired) return {Resolution::Kind::Repaired, repair.action, ""};
        res.kind = Resolution::Kind::InjectError;
        res.message = "tool error: invalid parameters: " + diagnosis.detail;
        return res;
    }
    // structural damage: repair, then bounded retries, then inform
    RepairOutcome repair = attempt_repair(config.profile, raw, diagnosis);
    if (repair.repaired) return {Resolution::Kind::Repaired, repair.action, ""};
    if (attempt < config.retry_cap) return {Resolution::Kind::RetrySameStep, {}, ""};
    res.kind = Resolution::Kind::InjectError;
    res.message =
        "syntax error: the response could not be parsed (" + diagnosis.detail +
        "). Emit exactly one " + kToolCallOpen + R"({"name": ..., "arguments": {...}})" +
        kToolCallClose + " block, or plain answer text with no call markers.";
    return res;
}

MemoryBuffer rebuild_memory(const Trajectory& prefix, const EpisodeConfig& config) {
    MemoryBuffer memory = make_episode_memory(prefix.question, config);
    for (const auto& step : prefix.steps) apply_step_to_memory(memory, step, config);
    return memory;
}

namespace {

void count_tool_call(Trajectory& traj, const std::string& name) {
    ++traj.tool_call_counts[name];
}

/// Shared driver for fresh and resumed episodes.
Trajectory run_loop(Trajectory traj, MemoryBuffer memory, PolicyHandle& policy, Toolbox& toolbox,
                    const EpisodeConfig& config) {
    int consecutive_malformed = 0;

    while (!traj.terminated() && traj.steps.size() < static_cast<std::size_t>(config.max_steps)) {
        RenderedPrompt rendered = render_prompt(traj, memory, config);
        if (rendered.status == RenderStatus::BudgetExceeded) {
            rendered = render_cleanup_prompt(traj, memory, config);
            if (rendered.status == RenderStatus::BudgetExceeded) {
                traj.termination = Termination::ContextTruncated;
                break;
            }
        }

        // sample, with the repair/retry/inform protocol on parse failures
        ParsedAction chosen;
        std::string raw;
        std::optional<double> logprob;
        bool have_action = false;
        bool injected = false;
        std::string injected_message;
        for (int attempt = 0;; ++attempt) {
            Completion completion = policy.complete(rendered.prompt);
            if (completion.status == CompletionStatus::EndpointUnavailable) {
                traj.termination = Termination::ToolFatal;
                break;
            }
            if (completion.status == CompletionStatus::ContextLengthExceeded) {
                traj.termination = Termination::ContextTruncated;
                break;
            }
            raw = completion.raw;
            logprob = completion.logprob;
            ParsedAction parsed = parse_action(config.profile, raw);
            if (!parsed.malformed()) {
                chosen = std::move(parsed);
                have_action = true;
                break;
            }
            const auto& bad = std::get<Malformed>(parsed.action);
            Resolution res = fault_protocol(raw, bad.diagnosis, attempt, config);
            if (res.kind == Resolution::Kind::Repaired) {
                chosen = std::move(res.repaired);
                have_action = true;
                break;
            }
            if (res.kind == Resolution::Kind::RetrySameStep) continue;
            injected = true;
            injected_message = std::move(res.message);
            chosen = std::move(parsed);
            break;
        }
        if (traj.terminated()) break;

        if (injected) {
            apply_action(traj, memory, chosen.action, raw, config, logprob);
            traj.steps.back().tool_result = ToolResult{injected_message, true};
            apply_step_to_memory(memory, traj.steps.back(), config);
            if (++consecutive_malformed >= config.hard_cap) {
                traj.termination = Termination::FormatFailure;
                break;
            }
            continue;
        }
        consecutive_malformed = 0;

        // overflow lockout: everything except memory maintenance bounces
        if (memory.gate(chosen.action) == GateResult::MemoryOverflowError) {
            apply_action(traj, memory, chosen.action, raw, config, logprob);
            traj.steps.back().tool_result = ToolResult{memory_overflow_message(), true};
            apply_step_to_memory(memory, traj.steps.back(), config);  // no-op while locked
            continue;
        }

        NextDirective directive = apply_action(traj, memory, chosen.action, raw, config, logprob);
        Step& step = traj.steps.back();

        if (directive.kind == DirectiveKind::Finished) break;

        if (directive.kind == DirectiveKind::Continue) {  // clean_memory
            MemoryApplyInfo info = apply_step_to_memory(memory, step, config);
            count_tool_call(traj, kCleanMemoryTool);
            if (info.cleanup == CleanupStatus::CleanupTooLarge) {
                step.tool_result = ToolResult{
                    "clean_memory failed: content too long; the snapshot must fit within half "
                    "the memory budget. Summarize more aggressively.",
                    true};
            } else {
                step.tool_result = ToolResult{"memory cleaned; context replaced by your snapshot", false};
            }
            continue;
        }

        // ExecuteTool
        const ToolCall& call = directive.call;
        if (is_memory_tool(call.name)) {
            MemoryApplyInfo info = apply_step_to_memory(memory, step, config);
            count_tool_call(traj, call.name);
            if (info.edit == EditStatus::NoSuchEntry)
                step.tool_result =
                    ToolResult{"no such memory entry: " + call.args.value("entry_index", json()).dump(),
                               true};
            else
                step.tool_result = ToolResult{call.name == kEditMemoryTool ? "memory entry edited"
                                                                           : "memory entry deleted",
                                              false};
            continue;
        }

        ToolResult observation = toolbox.execute(call);
        count_tool_call(traj, call.name);
        step.tool_result = std::move(observation);
        apply_step_to_memory(memory, step, config);
    }

    if (!traj.terminated()) traj.termination = Termination::StepBudgetExceeded;
    return traj;
}

}  // namespace

Trajectory run_episode(const Question& q, PolicyHandle& policy, Toolbox& toolbox,
                       const EpisodeConfig& config) {
    Trajectory traj;
    traj.question = q;
    return run_loop(std::move(traj), make_episode_memory(q, config), policy, toolbox, config);
}

Trajectory resume_episode(const Trajectory& prefix, PolicyHandle& policy, Toolbox& toolbox,
                          const EpisodeConfig& config) {
    Trajectory traj = prefix;
    traj.termination.reset();
    traj.final_answer.reset();
    return run_loop(std::move(traj), rebuild_memory(prefix, config), policy, toolbox, config);
}

Trajectory replay_trajectory(const Trajectory& recorded, const EpisodeConfig& config) {
    Trajectory replayed;
    replayed.question = recorded.question;
    MemoryBuffer memory = make_episode_memory(recorded.question, config);
    for (const auto& step : recorded.steps) {
        apply_action(replayed, memory, step.action, step.model_response, config, step.logprob);
        replayed.steps.back().tool_result = step.tool_result;
        MemoryApplyInfo info = apply_step_to_memory(memory, replayed.steps.back(), config);
        if (info.locked) continue;  // lockout bounces never executed a tool
        if (const auto* call = std::get_if<ToolCall>(&step.action)) count_tool_call(replayed, call->name);
        if (std::holds_alternative<CleanMemory>(step.action))
            count_tool_call(replayed, kCleanMemoryTool);
    }
    if (!replayed.terminated()) replayed.termination = recorded.termination;
    replayed.reward = recorded.reward;
    return replayed;
}

}  // namespace rover
