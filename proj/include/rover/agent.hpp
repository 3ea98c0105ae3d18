#pragma once

#include <string>

#include "rover/memory.hpp"
#include "rover/policy.hpp"
#include "rover/tokens.hpp"
#include "rover/toolbox.hpp"
#include "rover/types.hpp"

namespace rover {

struct EpisodeConfig {
    PolicyProfile profile;
    ContextBudget budget;
    int max_steps = 64;
    int retry_cap = 2;   // repairs/retries per step before the error is injected
    int hard_cap = 4;    // consecutive malformed steps before FormatFailure
    TokenCounter counter = default_token_counter();
};

enum class RenderStatus { Ok, BudgetExceeded };

struct RenderedPrompt {
    RenderStatus status = RenderStatus::Ok;
    PromptText prompt;
};

/// Render the next prompt. SingleTurnPacked packs the question and the whole
/// memory into one user turn; MultiTurnNative emits alternating turns. The
/// overflow notice is appended at render time and is never stored in the
/// buffer. BudgetExceeded means even the packed rendering does not fit in L
/// and the caller must force a cleanup.
RenderedPrompt render_prompt(const Trajectory& prefix, const MemoryBuffer& memory,
                             const EpisodeConfig& config);

/// Reduced rendering used when the packed prompt no longer fits in L: the
/// question, the notices, and as much of the tail of memory as fits. The
/// overflow lockout stays in force, so the only way forward is clean_memory.
RenderedPrompt render_cleanup_prompt(const Trajectory& prefix, const MemoryBuffer& memory,
                                     const EpisodeConfig& config);

enum class DirectiveKind { ExecuteTool, Continue, Finished, FaultProtocol };

struct NextDirective {
    DirectiveKind kind = DirectiveKind::Continue;
    ToolCall call;          // ExecuteTool
    std::string raw;        // FaultProtocol
    ParseDiagnosis diagnosis;
};

/// Append the step for `action` and route it. Failure modes are directives,
/// not exceptions. The memory mutation happens separately via
/// apply_step_to_memory once the step's observation is known.
NextDirective apply_action(Trajectory& state, MemoryBuffer& memory, const AgentAction& action,
                           const std::string& model_response, const EpisodeConfig& config,
                           std::optional<double> logprob = std::nullopt);

struct MemoryApplyInfo {
    bool locked = false;
    std::optional<CleanupStatus> cleanup;
    std::optional<EditStatus> edit;
};

/// The single mutation path for episode memory, shared by the live loop and
/// by replay, so a frozen prefix always reconstructs the same buffer.
MemoryApplyInfo apply_step_to_memory(MemoryBuffer& memory, const Step& step,
                                     const EpisodeConfig& config);

struct Resolution {
    enum class Kind { Repaired, RetrySameStep, InjectError };
    Kind kind = Kind::InjectError;
    ParsedAction repaired;
    std::string message;
};

/// Repair / retry / inform protocol for malformed model output. Unknown tools
/// and uncoercible parameters are always answered with a descriptive warning;
/// structural damage gets the deterministic repair set, then bounded retries,
/// then a syntax-error message.
Resolution fault_protocol(const std::string& raw, const ParseDiagnosis& diagnosis, int attempt,
                          const EpisodeConfig& config);

/// Fresh memory for a question (the question text is pinned into the total).
MemoryBuffer make_episode_memory(const Question& q, const EpisodeConfig& config);

/// Rebuild the memory a trajectory prefix would have produced, by replaying
/// every step through apply_step_to_memory.
MemoryBuffer rebuild_memory(const Trajectory& prefix, const EpisodeConfig& config);

/// Drive one episode: render -> complete -> parse -> route, until a final
/// answer or a budget termination. All tool results are recorded verbatim.
Trajectory run_episode(const Question& q, PolicyHandle& policy, Toolbox& toolbox,
                       const EpisodeConfig& config);

/// Continue an episode from a frozen prefix (partial rollouts).
Trajectory resume_episode(const Trajectory& prefix, PolicyHandle& policy, Toolbox& toolbox,
                          const EpisodeConfig& config);

/// Re-derive a trajectory from its recorded actions and tool results. With
/// fixed tool results the state machine is deterministic, so this must equal
/// the original.
Trajectory replay_trajectory(const Trajectory& recorded, const EpisodeConfig& config);

}  // namespace rover
