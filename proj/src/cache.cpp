#include "rover/cache.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace rover {

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string normalize_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

std::string canonical_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    std::size_t host_begin = (scheme_end == std::string::npos) ? 0 : scheme_end + 3;
    std::size_t host_end = url.find_first_of("/?#", host_begin);
    if (host_end == std::string::npos) host_end = url.size();
    std::string out = url;
    for (std::size_t i = 0; i < host_end; ++i)
        out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
    return out;
}

json ToolCache::canonicalize_args(const json& args) {
    if (!args.is_object()) return args;
    json out = json::object();  // nlohmann objects iterate key-sorted
    for (auto it = args.begin(); it != args.end(); ++it) {
        if (it.key() == "query" && it->is_string())
            out[it.key()] = normalize_whitespace(it->get<std::string>());
        else if (it.key() == "url" && it->is_string())
            out[it.key()] = canonical_url(it->get<std::string>());
        else
            out[it.key()] = *it;
    }
    return out;
}

std::string ToolCache::canonical_key(const std::string& tool, const json& args) {
    return tool + "\x1f" + canonicalize_args(args).dump();
}

ToolCache::ToolCache(std::string store_path) : store_path_(std::move(store_path)) {
    load();
}

void ToolCache::load() {
    if (store_path_.empty()) return;
    std::ifstream in(store_path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        const std::string tool = j.value("tool", "");
        if (tool.empty() || !j.contains("args") || !j.contains("result")) continue;
        ToolResult result{j["result"].value("text", ""), j["result"].value("is_error", false)};
        entries_[canonical_key(tool, j["args"])] = std::move(result);
    }
}

void ToolCache::append_journal(const std::string& tool, const json& args,
                               const ToolResult& result) {
    if (store_path_.empty()) return;
    json j;
    j["tool"] = tool;
    j["args"] = canonicalize_args(args);
    j["result"] = {{"text", result.text}, {"is_error", result.is_error}};
    j["stored_at"] = now_iso8601();
    std::ofstream out(store_path_, std::ios::app);
    if (!out) return;  // store fault: keep going, the in-memory entry stands
    out << j.dump() << "\n";
}

std::optional<ToolResult> ToolCache::get(const std::string& tool, const json& args) {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(canonical_key(tool, args));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ToolCache::put(const std::string& tool, const json& args, const ToolResult& result) {
    std::lock_guard lock(mutex_);
    entries_[canonical_key(tool, args)] = result;
    append_journal(tool, args, result);
}

ToolResult ToolCache::get_or_compute(const std::string& tool, const json& args,
                                     const std::function<Computed()>& compute) {
    const std::string key = canonical_key(tool, args);
    std::shared_future<ToolResult> waiter;
    std::shared_ptr<std::promise<ToolResult>> owner;
    {
        std::lock_guard lock(mutex_);
        auto hit = entries_.find(key);
        if (hit != entries_.end()) return hit->second;
        auto running = inflight_.find(key);
        if (running != inflight_.end()) {
            waiter = running->second;
        } else {
            owner = std::make_shared<std::promise<ToolResult>>();
            inflight_[key] = owner->get_future().share();
        }
    }
    if (!owner) return waiter.get();

    Computed computed;
    try {
        computed = compute();
    } catch (const std::exception& e) {
        computed = {{std::string("tool execution failed: ") + e.what(), true}, false};
    } catch (...) {
        computed = {{"tool execution failed", true}, false};
    }
    owner->set_value(computed.result);
    {
        std::lock_guard lock(mutex_);
        inflight_.erase(key);
        if (computed.store) {
            entries_[key] = computed.result;
            append_journal(tool, args, computed.result);
        }
    }
    return computed.result;
}

void ToolCache::purge() {
    std::lock_guard lock(mutex_);
    entries_.clear();
    if (!store_path_.empty()) {
        std::error_code ec;
        std::filesystem::remove(store_path_, ec);
    }
}

std::size_t ToolCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace rover
