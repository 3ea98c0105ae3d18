#include "rover/memory.hpp"

namespace rover {

std::string memory_overflow_message() {
    return "memory overflow: the context memory exceeds its buffer limit; call "
           "clean_memory(content) with a summary of the information worth keeping "
           "before taking any other action";
}

MemoryBuffer::MemoryBuffer(ContextBudget budget, TokenCounter counter, std::size_t pinned_tokens)
    : budget_(budget), counter_(std::move(counter)), pinned_tokens_(pinned_tokens) {
    total_tokens_ = pinned_tokens_;
    refresh_overflow();
}

void MemoryBuffer::refresh_overflow() {
    overflow_ = total_tokens_ > budget_.memory_limit;
}

void MemoryBuffer::append(EntryKind kind, std::string text) {
    MemoryEntry entry{kind, std::move(text), 0};
    entry.token_count = counter_(entry.text);
    total_tokens_ += entry.token_count;
    entries_.push_back(std::move(entry));
    refresh_overflow();
}

GateResult MemoryBuffer::gate(const AgentAction& action) const {
    if (!overflow_) return GateResult::Allowed;
    if (std::holds_alternative<CleanMemory>(action)) return GateResult::Allowed;
    if (const auto* call = std::get_if<ToolCall>(&action)) {
        if (call->name == kCleanMemoryTool || call->name == kEditMemoryTool ||
            call->name == kDeleteMemoryTool)
            return GateResult::Allowed;
    }
    return GateResult::MemoryOverflowError;
}

CleanupStatus MemoryBuffer::apply_cleanup(const std::string& content) {
    const std::size_t snapshot_tokens = counter_(content);
    if (snapshot_tokens > budget_.memory_limit / 2) return CleanupStatus::CleanupTooLarge;

    std::vector<MemoryEntry> kept;
    for (auto& entry : entries_) {
        if (entry.kind == EntryKind::SystemNotice) kept.push_back(std::move(entry));
        // Prior CleanupSnapshots are dropped too: the buffer holds only the
        // latest snapshot, so erased results stay erased unless re-stated.
    }
    kept.push_back(MemoryEntry{EntryKind::CleanupSnapshot, content, snapshot_tokens});
    ++cleanup_count_;
    std::string notice = "[memory cleaned " + std::to_string(cleanup_count_) +
                         " time(s); earlier tool activity was replaced by the snapshot below]";
    const std::size_t notice_tokens = counter_(notice);
    kept.push_back(MemoryEntry{EntryKind::SystemNotice, std::move(notice), notice_tokens});

    entries_ = std::move(kept);
    total_tokens_ = recomputed_total();
    refresh_overflow();
    return CleanupStatus::Ok;
}

EditStatus MemoryBuffer::edit_entry(std::size_t entry_index,
                                    const std::optional<std::string>& replacement) {
    if (entry_index >= entries_.size() || entries_[entry_index].kind != EntryKind::ToolResultRecord)
        return EditStatus::NoSuchEntry;

    MemoryEntry& entry = entries_[entry_index];
    total_tokens_ -= entry.token_count;
    if (replacement) {
        entry.text = *replacement;
    } else {
        entry.kind = EntryKind::SystemNotice;
        entry.text = "[tool result " + std::to_string(entry_index) + " deleted]";
    }
    entry.token_count = counter_(entry.text);
    total_tokens_ += entry.token_count;
    refresh_overflow();
    return EditStatus::Ok;
}

std::size_t MemoryBuffer::recomputed_total() const {
    std::size_t total = pinned_tokens_;
    for (const auto& entry : entries_) total += counter_(entry.text);
    return total;
}

}  // namespace rover
