#include "rover/toolbox.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace rover {

// --- stubs ---

std::shared_ptr<StubSearchProvider> StubSearchProvider::from_file(const std::string& path) {
    std::ifstream in(path);
    std::map<std::string, std::string> fixtures;
    if (in) {
        json j = json::parse(in, nullptr, false);
        if (j.is_object()) {
            for (auto it = j.begin(); it != j.end(); ++it)
                fixtures[normalize_whitespace(it.key())] =
                    it->is_string() ? it->get<std::string>() : it->dump();
        }
    }
    return std::make_shared<StubSearchProvider>(std::move(fixtures));
}

ProviderResponse StubSearchProvider::search(const std::string& query) {
    calls_.fetch_add(1);
    if (fail_next_.load() > 0) {
        fail_next_.fetch_sub(1);
        return {false, "", "injected provider failure"};
    }
    std::lock_guard lock(mutex_);
    auto it = fixtures_.find(normalize_whitespace(query));
    if (it == fixtures_.end()) return {true, R"({"organic":[]})", ""};
    return {true, it->second, ""};
}

void StubSearchProvider::set_fixture(const std::string& query, std::string payload) {
    std::lock_guard lock(mutex_);
    fixtures_[normalize_whitespace(query)] = std::move(payload);
}

std::shared_ptr<StubPageFetcher> StubPageFetcher::from_file(const std::string& path) {
    std::ifstream in(path);
    std::map<std::string, std::string> pages;
    if (in) {
        json j = json::parse(in, nullptr, false);
        if (j.is_object()) {
            for (auto it = j.begin(); it != j.end(); ++it)
                if (it->is_string()) pages[canonical_url(it.key())] = it->get<std::string>();
        }
    }
    return std::make_shared<StubPageFetcher>(std::move(pages));
}

FetchResponse StubPageFetcher::fetch(const std::string& url) {
    calls_.fetch_add(1);
    std::lock_guard lock(mutex_);
    auto it = pages_.find(canonical_url(url));
    if (it == pages_.end()) return {false, 404, "", "not found"};
    return {true, 200, it->second, ""};
}

void StubPageFetcher::set_page(const std::string& url, std::string html) {
    std::lock_guard lock(mutex_);
    pages_[canonical_url(url)] = std::move(html);
}

// --- live providers ---

HttpSearchProvider::HttpSearchProvider(HttpSearchConfig config) : config_(std::move(config)) {}

ProviderResponse HttpSearchProvider::search(const std::string& query) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key)
        return {false, "", "search API key not configured (" + config_.api_key_env + ")"};
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    json body{{"q", query}};
    httplib::Headers headers{{"X-API-KEY", key}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) return {false, "", "search provider unreachable"};
    if (res->status != 200)
        return {false, "", "search provider returned status " + std::to_string(res->status)};
    return {true, res->body, ""};
}

FetchResponse HttpPageFetcher::fetch(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    const std::string scheme = scheme_end == std::string::npos ? "http" : url.substr(0, scheme_end);
    std::size_t host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    std::size_t path_begin = url.find('/', host_begin);
    const std::string origin =
        scheme + "://" + url.substr(host_begin, path_begin == std::string::npos
                                                    ? std::string::npos
                                                    : path_begin - host_begin);
    const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    client.set_follow_location(true);
    auto res = client.Get(path);
    if (!res) return {false, 0, "", "fetch failed: host unreachable"};
    if (res->status >= 400)
        return {false, res->status, "", "fetch failed: HTTP " + std::to_string(res->status)};
    return {true, res->status, res->body, ""};
}

// --- toolbox ---

namespace {

std::vector<SearchResult> parse_organic(const std::string& payload, const Blocklist& blocklist) {
    std::vector<SearchResult> results;
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return results;
    const auto organic = j.value("organic", json::array());
    if (!organic.is_array()) return results;
    int taken = 0;
    for (const auto& entry : organic) {
        if (taken >= 10) break;  // top-10 only
        if (!entry.is_object()) continue;
        ++taken;
        SearchResult r;
        r.url = entry.value("link", "");
        r.title = entry.value("title", "");
        if (entry.contains("snippet") && entry["snippet"].is_string())
            r.snippet = entry["snippet"].get<std::string>();
        if (!r.url.empty() && blocklist.blocked_url(r.url)) continue;  // removed post-hoc
        r.rank = static_cast<int>(results.size()) + 1;
        results.push_back(std::move(r));
    }
    return results;
}

std::string render_search_observation(const std::string& query,
                                      const std::vector<SearchResult>& results) {
    std::ostringstream out;
    out << "search results for \"" << query << "\":";
    if (results.empty()) {
        out << "\n(no results)";
        return out.str();
    }
    for (const auto& r : results) {
        out << "\n" << r.rank << ". " << (r.title.empty() ? "(untitled)" : r.title);
        if (!r.url.empty()) out << "\n   " << r.url;
        if (r.snippet) out << "\n   " << *r.snippet;
    }
    return out.str();
}

}  // namespace

Toolbox::Toolbox(ToolboxConfig config, std::shared_ptr<SearchProvider> search,
                 std::shared_ptr<PageFetcher> fetcher, Blocklist blocklist, TokenCounter counter)
    : config_(std::move(config)),
      search_(std::move(search)),
      fetcher_(std::move(fetcher)),
      blocklist_(std::move(blocklist)),
      counter_(std::move(counter)),
      sandbox_(config_.sandbox),
      cache_(config_.cache_path) {}

SearchOutcome Toolbox::search_internet(const std::string& query) {
    SearchOutcome outcome;
    if (normalize_whitespace(query).empty()) {
        outcome.observation = {"search error: query must not be empty", true};
        return outcome;
    }
    ToolResult payload = cache_.get_or_compute(kSearchTool, json{{"query", query}}, [&]() {
        ProviderResponse res = search_->search(query);
        if (!res.ok) return Computed{{"search temporarily unavailable: " + res.error, true}, false};
        return Computed{{res.payload, false}, true};
    });
    if (payload.is_error) {
        outcome.observation = payload;
        return outcome;
    }
    outcome.results = parse_organic(payload.text, blocklist_);
    outcome.observation = {render_search_observation(normalize_whitespace(query), outcome.results),
                           false};
    return outcome;
}

std::string Toolbox::fetch_markdown(const std::string& url, bool* failed) {
    ToolResult page = cache_.get_or_compute("fetch_page", json{{"url", url}}, [&]() {
        FetchResponse res = fetcher_->fetch(url);
        if (!res.ok) return Computed{{res.error, true}, false};
        return Computed{{html_to_markdown(res.body), false}, true};
    });
    *failed = page.is_error;
    return page.text;
}

BrowseOutcome Toolbox::browse_page(const std::string& url, int section_id) {
    BrowseOutcome outcome;
    if (blocklist_.blocked_url(url)) {
        outcome.observation = {"Unavailable", true};
        return outcome;
    }
    bool failed = false;
    const std::string markdown = fetch_markdown(url, &failed);
    if (failed) {
        outcome.observation = {"page fetch failed for " + url + ": " + markdown, true};
        return outcome;
    }
    const auto sections = paginate(markdown, config_.section_limit, counter_);
    const int total = static_cast<int>(sections.size());
    if (section_id < 0 || section_id >= total) {
        outcome.observation = {"section " + std::to_string(section_id) + " out of range; valid sections 0.." +
                                   std::to_string(total - 1),
                               true};
        return outcome;
    }
    PageSection section{url, section_id, total, sections[static_cast<std::size_t>(section_id)].text};
    std::ostringstream obs;
    obs << "[" << url << " | section " << section_id << " of 0.." << total - 1 << "]\n"
        << section.text;
    if (section_id + 1 < total)
        obs << "\n[page continues; pass section_id=" << section_id + 1 << " to scroll]";
    outcome.observation = {obs.str(), false};
    outcome.section = std::move(section);
    return outcome;
}

ExecutionResult Toolbox::run_code(const std::string& code) {
    return sandbox_.run(code);
}

ToolResult Toolbox::execute(const ToolCall& call) {
    if (call.name == kSearchTool)
        return search_internet(call.args.value("query", "")).observation;
    if (call.name == kBrowseTool)
        return browse_page(call.args.value("url", ""), call.args.value("section_id", 0)).observation;
    if (call.name == kCodeTool) {
        const std::string code = call.args.value("code", "");
        ToolResult cached = cache_.get_or_compute(kCodeTool, json{{"code", code}}, [&]() {
            ExecutionResult exec = run_code(code);
            ToolResult obs;
            switch (exec.outcome) {
                case ExecOutcome::Ok:
                    obs.text = exec.stdout_text.empty() ? "(no output)" : exec.stdout_text;
                    obs.is_error = false;
                    break;
                case ExecOutcome::Error:
                    obs.text = "execution error:\n" + exec.stderr_text;
                    obs.is_error = true;
                    break;
                case ExecOutcome::Timeout:
                    obs.text = "execution timed out after " +
                               std::to_string(config_.sandbox.timeout_seconds) + " seconds";
                    obs.is_error = true;
                    break;
                case ExecOutcome::BlockedImport:
                    obs.text = "blocked import: " + exec.blocked_module +
                               " (this module is not allowed in the code sandbox)";
                    obs.is_error = true;
                    break;
            }
            return Computed{obs, true};
        });
        return cached;
    }
    return {"unknown tool '" + call.name + "'", true};
}

}  // namespace rover
