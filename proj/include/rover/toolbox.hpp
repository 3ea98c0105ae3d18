#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rover/blocklist.hpp"
#include "rover/cache.hpp"
#include "rover/html.hpp"
#include "rover/sandbox.hpp"
#include "rover/tokens.hpp"
#include "rover/types.hpp"

namespace rover {

struct SearchResult {
    std::string url;
    std::string title;
    std::optional<std::string> snippet;
    int rank = 0;  // 1..10
};

struct ProviderResponse {
    bool ok = false;
    std::string payload;  // serper-style JSON: {"organic": [{link,title,snippet}...]}
    std::string error;
};

class SearchProvider {
public:
    virtual ~SearchProvider() = default;
    virtual ProviderResponse search(const std::string& query) = 0;
};

struct FetchResponse {
    bool ok = false;
    int status = 0;
    std::string body;
    std::string error;
};

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    virtual FetchResponse fetch(const std::string& url) = 0;
};

// --- deterministic fixture implementations (hermetic runs and tests) ---

class StubSearchProvider : public SearchProvider {
public:
    StubSearchProvider() = default;
    /// fixtures: query (whitespace-normalized) -> provider payload JSON
    explicit StubSearchProvider(std::map<std::string, std::string> fixtures)
        : fixtures_(std::move(fixtures)) {}
    static std::shared_ptr<StubSearchProvider> from_file(const std::string& path);

    ProviderResponse search(const std::string& query) override;

    void set_fixture(const std::string& query, std::string payload);
    void fail_next(int times) { fail_next_ = times; }
    int calls() const { return calls_.load(); }

private:
    std::map<std::string, std::string> fixtures_;
    std::atomic<int> calls_{0};
    std::atomic<int> fail_next_{0};
    std::mutex mutex_;
};

class StubPageFetcher : public PageFetcher {
public:
    StubPageFetcher() = default;
    explicit StubPageFetcher(std::map<std::string, std::string> pages) : pages_(std::move(pages)) {}
    static std::shared_ptr<StubPageFetcher> from_file(const std::string& path);

    FetchResponse fetch(const std::string& url) override;

    void set_page(const std::string& url, std::string html);
    int calls() const { return calls_.load(); }

private:
    std::map<std::string, std::string> pages_;
    std::atomic<int> calls_{0};
    std::mutex mutex_;
};

// --- live implementations ---

struct HttpSearchConfig {
    std::string base_url = "https://google.serper.dev";
    std::string path = "/search";
    std::string api_key_env = "ROVER_SEARCH_API_KEY";
    int timeout_seconds = 20;
};

class HttpSearchProvider : public SearchProvider {
public:
    explicit HttpSearchProvider(HttpSearchConfig config = {});
    ProviderResponse search(const std::string& query) override;

private:
    HttpSearchConfig config_;
};

class HttpPageFetcher : public PageFetcher {
public:
    explicit HttpPageFetcher(int timeout_seconds = 30) : timeout_seconds_(timeout_seconds) {}
    FetchResponse fetch(const std::string& url) override;

private:
    int timeout_seconds_;
};

// --- the tool environment ---

struct ToolboxConfig {
    std::size_t section_limit = 2000;
    SandboxConfig sandbox;
    std::string cache_path;  // empty: in-memory cache only
};

struct SearchOutcome {
    std::vector<SearchResult> results;
    ToolResult observation;
};

struct PageSection {
    std::string url;
    int section_id = 0;
    int total_sections = 0;
    std::string text;
};

struct BrowseOutcome {
    std::optional<PageSection> section;
    ToolResult observation;
};

/// The three-tool environment. Safe for concurrent use by many episode
/// workers; results are cached so identical calls execute the underlying
/// fetch/run at most once per run (and survive across runs via the journal).
class Toolbox {
public:
    Toolbox(ToolboxConfig config, std::shared_ptr<SearchProvider> search,
            std::shared_ptr<PageFetcher> fetcher, Blocklist blocklist,
            TokenCounter counter = default_token_counter());

    SearchOutcome search_internet(const std::string& query);
    BrowseOutcome browse_page(const std::string& url, int section_id);
    ExecutionResult run_code(const std::string& code);

    /// Dispatch for the episode loop; returns an agent-visible observation.
    ToolResult execute(const ToolCall& call);

    const Blocklist& blocklist() const { return blocklist_; }
    ToolCache& cache() { return cache_; }
    const ToolboxConfig& config() const { return config_; }

private:
    std::string fetch_markdown(const std::string& url, bool* failed);

    ToolboxConfig config_;
    std::shared_ptr<SearchProvider> search_;
    std::shared_ptr<PageFetcher> fetcher_;
    Blocklist blocklist_;
    TokenCounter counter_;
    CodeSandbox sandbox_;
    ToolCache cache_;
};

}  // namespace rover
