#pragma once

#include <string>
#include <vector>

namespace rover {

/// Lowercased registrable host of a URL: scheme, userinfo, port and path are
/// stripped. "example.com/page" (no scheme) is handled too.
std::string url_host(const std::string& url);

/// Contamination blocklist: suffix match on the registrable domain, inclusive
/// of subdomains, case-insensitive. File format: one domain per line, '#'
/// comments, blank lines ignored.
class Blocklist {
public:
    Blocklist() = default;
    static Blocklist from_file(const std::string& path);
    static Blocklist from_lines(const std::vector<std::string>& lines);

    void add(std::string domain);
    bool blocked_host(const std::string& host) const;
    bool blocked_url(const std::string& url) const;
    std::size_t size() const { return patterns_.size(); }
    bool empty() const { return patterns_.empty(); }

private:
    std::vector<std::string> patterns_;  // lowercased
};

}  // namespace rover
