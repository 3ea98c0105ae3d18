#include "rover/blocklist.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace rover {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string url_host(const std::string& url) {
    std::string rest = url;
    std::size_t scheme = rest.find("://");
    if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
    std::size_t end = rest.find_first_of("/?#");
    if (end != std::string::npos) rest = rest.substr(0, end);
    std::size_t at = rest.rfind('@');
    if (at != std::string::npos) rest = rest.substr(at + 1);
    std::size_t port = rest.find(':');
    if (port != std::string::npos) rest = rest.substr(0, port);
    return lower(rest);
}

Blocklist Blocklist::from_file(const std::string& path) {
    Blocklist list;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) list.add(line);
    }
    return list;
}

Blocklist Blocklist::from_lines(const std::vector<std::string>& lines) {
    Blocklist list;
    for (const auto& line : lines) {
        std::string t = trim(line);
        if (!t.empty() && t[0] != '#') list.add(t);
    }
    return list;
}

void Blocklist::add(std::string domain) {
    patterns_.push_back(lower(std::move(domain)));
}

bool Blocklist::blocked_host(const std::string& host) const {
    const std::string h = lower(host);
    for (const auto& p : patterns_) {
        if (h == p) return true;
        if (h.size() > p.size() && h.compare(h.size() - p.size(), p.size(), p) == 0 &&
            h[h.size() - p.size() - 1] == '.')
            return true;
    }
    return false;
}

bool Blocklist::blocked_url(const std::string& url) const {
    return blocked_host(url_host(url));
}

}  // namespace rover
