#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rover/tokens.hpp"
#include "rover/types.hpp"

namespace rover {

/// Context budgets, in units of the configured token counter.
/// `context_limit` is the full window L, `memory_limit` the buffer threshold
/// L_mem that triggers the cleanup lockout, `reserve` generation headroom.
struct ContextBudget {
    std::size_t context_limit = 4096;
    std::size_t memory_limit = 3072;
    std::size_t reserve = 512;

    bool valid() const {
        return memory_limit > 0 && memory_limit < context_limit &&
               memory_limit + reserve <= context_limit;
    }
};

enum class EntryKind { ToolCallRecord, ToolResultRecord, CleanupSnapshot, SystemNotice };

struct MemoryEntry {
    EntryKind kind;
    std::string text;
    std::size_t token_count = 0;
};

enum class GateResult { Allowed, MemoryOverflowError };
enum class CleanupStatus { Ok, CleanupTooLarge };
enum class EditStatus { Ok, NoSuchEntry };

/// Text of the lockout observation injected for any non-cleanup action while
/// the buffer is over L_mem.
std::string memory_overflow_message();

/// The agent-visible packed context for one episode. Entries hold exactly the
/// text that rendering will emit, so the incremental token total is the
/// number the budget checks run against. The question text is pinned: it
/// always counts toward the total but is never erased by cleanups.
class MemoryBuffer {
public:
    MemoryBuffer() = default;
    MemoryBuffer(ContextBudget budget, TokenCounter counter, std::size_t pinned_tokens = 0);

    void append(EntryKind kind, std::string text);

    /// Overflow lockout: while the total exceeds L_mem, only memory-editing
    /// actions (clean_memory, edit_memory, delete_memory) may proceed.
    GateResult gate(const AgentAction& action) const;

    /// clean_memory semantics: every tool call / tool result record is
    /// replaced by a single snapshot holding `content`; notices survive.
    /// Snapshots larger than memory_limit/2 are rejected so a cleanup always
    /// leaves headroom.
    CleanupStatus apply_cleanup(const std::string& content);

    /// Replace (edit) or tombstone (delete) one ToolResultRecord by buffer
    /// index. Used by the multi-turn profiles' memory tools.
    EditStatus edit_entry(std::size_t entry_index, const std::optional<std::string>& replacement);

    const std::vector<MemoryEntry>& entries() const { return entries_; }
    std::size_t total_tokens() const { return total_tokens_; }
    std::size_t pinned_tokens() const { return pinned_tokens_; }
    bool overflow() const { return overflow_; }
    int cleanup_count() const { return cleanup_count_; }
    const ContextBudget& budget() const { return budget_; }
    const TokenCounter& counter() const { return counter_; }

    /// Recompute the total from scratch (test oracle for the incremental sum).
    std::size_t recomputed_total() const;

private:
    void refresh_overflow();

    std::vector<MemoryEntry> entries_;
    ContextBudget budget_;
    TokenCounter counter_ = default_token_counter();
    std::size_t pinned_tokens_ = 0;
    std::size_t total_tokens_ = 0;
    int cleanup_count_ = 0;
    bool overflow_ = false;
};

}  // namespace rover
