#pragma once

#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "rover/types.hpp"

namespace rover {

/// What a cache miss produced. `store=false` keeps transient failures
/// (provider outages, network errors) out of the cache.
struct Computed {
    ToolResult result;
    bool store = true;
};

/// Keyed store (tool name, canonicalized args) -> ToolResult, persisted as a
/// JSONL journal so results survive across runs. get_or_compute is atomic per
/// key: concurrent identical calls execute the underlying work at most once.
/// Store faults never fail a call; they fall through to direct execution.
class ToolCache {
public:
    ToolCache() = default;  // memory-only
    explicit ToolCache(std::string store_path);

    static json canonicalize_args(const json& args);
    static std::string canonical_key(const std::string& tool, const json& args);

    std::optional<ToolResult> get(const std::string& tool, const json& args);
    void put(const std::string& tool, const json& args, const ToolResult& result);

    ToolResult get_or_compute(const std::string& tool, const json& args,
                              const std::function<Computed()>& compute);

    /// Drop everything, including the on-disk journal.
    void purge();

    std::size_t size() const;
    const std::string& store_path() const { return store_path_; }

private:
    void load();
    void append_journal(const std::string& tool, const json& args, const ToolResult& result);

    std::string store_path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, ToolResult> entries_;
    std::unordered_map<std::string, std::shared_future<ToolResult>> inflight_;
};

/// Collapse whitespace runs to single spaces and trim; used for query args.
std::string normalize_whitespace(const std::string& s);

/// Lowercase the scheme and host of a URL, leaving path/query intact.
std::string canonical_url(const std::string& url);

}  // namespace rover
