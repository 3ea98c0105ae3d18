#include "rover/html.hpp"

#include <algorithm>
#include <cctype>
#include <string_view>

namespace rover {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_block_tag(const std::string& tag) {
    static const char* kBlocks[] = {"p",   "div",   "section", "article", "header", "footer",
                                    "main", "aside", "table",   "tr",      "ul",     "ol",
                                    "blockquote", "pre", "figure", "nav", "form"};
    for (const char* b : kBlocks)
        if (tag == b) return true;
    return false;
}

// Minimal entity decoding; unknown entities pass through verbatim.
std::string decode_entities(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '&') {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t semi = text.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back(text[i++]);
            continue;
        }
        std::string_view name = text.substr(i + 1, semi - i - 1);
        if (name == "amp") out.push_back('&');
        else if (name == "lt") out.push_back('<');
        else if (name == "gt") out.push_back('>');
        else if (name == "quot") out.push_back('"');
        else if (name == "apos" || name == "#39") out.push_back('\'');
        else if (name == "nbsp" || name == "#160") out.push_back(' ');
        else if (!name.empty() && name[0] == '#') {
            long code = 0;
            bool ok = false;
            if (name.size() > 1 && (name[1] == 'x' || name[1] == 'X')) {
                for (std::size_t k = 2; k < name.size(); ++k) {
                    if (!std::isxdigit(static_cast<unsigned char>(name[k]))) { ok = false; break; }
                    code = code * 16 + (std::isdigit(static_cast<unsigned char>(name[k]))
                                            ? name[k] - '0'
                                            : std::tolower(static_cast<unsigned char>(name[k])) - 'a' + 10);
                    ok = true;
                }
            } else {
                for (std::size_t k = 1; k < name.size(); ++k) {
                    if (!std::isdigit(static_cast<unsigned char>(name[k]))) { ok = false; break; }
                    code = code * 10 + (name[k] - '0');
                    ok = true;
                }
            }
            if (ok && code > 0 && code < 128) out.push_back(static_cast<char>(code));
            else if (ok) out.push_back('?');  // non-ASCII code points flattened
            else { out.push_back(text[i++]); continue; }
        } else {
            out.push_back(text[i++]);
            continue;
        }
        i = semi + 1;
    }
    return out;
}

void append_text(std::string& out, std::string_view raw) {
    // HTML collapses whitespace runs; do the same so layout markup does not
    // leave walls of blank space.
    std::string decoded = decode_entities(raw);
    bool pending_space = false;
    for (char c : decoded) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty() && out.back() != '\n' && out.back() != ' ')
            out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    if (pending_space && !out.empty() && out.back() != '\n' && out.back() != ' ')
        out.push_back(' ');
}

void break_paragraph(std::string& out) {
    while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
    if (out.empty()) return;
    if (out.size() >= 2 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') return;
    if (out.back() == '\n') { out.push_back('\n'); return; }
    out += "\n\n";
}

void break_line(std::string& out) {
    while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
    if (out.empty() || out.back() == '\n') return;
    out.push_back('\n');
}

}  // namespace

std::string html_to_markdown(const std::string& html) {
    std::string out;
    out.reserve(html.size());
    std::size_t i = 0;
    const std::size_t n = html.size();

    while (i < n) {
        if (html[i] != '<') {
            std::size_t next = html.find('<', i);
            if (next == std::string::npos) next = n;
            append_text(out, std::string_view(html).substr(i, next - i));
            i = next;
            continue;
        }

        // comments
        if (html.compare(i, 4, "<!--") == 0) {
            std::size_t end = html.find("-->", i + 4);
            i = (end == std::string::npos) ? n : end + 3;
            continue;
        }

        std::size_t close = html.find('>', i);
        if (close == std::string::npos) {
            // dangling '<': keep the remainder as text
            append_text(out, std::string_view(html).substr(i));
            break;
        }

        std::string_view inner(html.data() + i + 1, close - i - 1);
        bool closing = !inner.empty() && inner[0] == '/';
        if (closing) inner.remove_prefix(1);
        std::size_t name_end = 0;
        while (name_end < inner.size() && (std::isalnum(static_cast<unsigned char>(inner[name_end])) ||
                                           inner[name_end] == '-'))
            ++name_end;
        std::string tag = to_lower(inner.substr(0, name_end));
        i = close + 1;

        if (tag.empty()) continue;  // <!doctype ...>, <?xml ...>, garbage

        if (!closing && (tag == "script" || tag == "style" || tag == "noscript")) {
            std::string end_tag = "</" + tag;
            std::string lowered = to_lower(html);
            std::size_t end = lowered.find(end_tag, i);
            if (end == std::string::npos) break;  // unterminated: drop the rest
            std::size_t end_close = html.find('>', end);
            i = (end_close == std::string::npos) ? n : end_close + 1;
            continue;
        }

        if (tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6') {
            if (!closing) {
                break_paragraph(out);
                out.append(static_cast<std::size_t>(tag[1] - '0'), '#');
                out.push_back(' ');
            } else {
                break_paragraph(out);
            }
            continue;
        }
        if (tag == "br") { break_line(out); continue; }
        if (tag == "li") {
            if (!closing) { break_line(out); out += "- "; }
            else break_line(out);
            continue;
        }
        if (tag == "td" || tag == "th") {
            if (closing && !out.empty() && out.back() != '\n' && out.back() != ' ') out += " ";
            continue;
        }
        if (tag == "img") continue;  // images dropped, src never surfaces
        if (is_block_tag(tag)) { break_paragraph(out); continue; }
        // Everything else (a, span, b, em, ...): drop the markup, keep content.
        // Anchors lose their href here, which is the point.
    }

    // trim
    std::size_t begin = out.find_first_not_of(" \t\n");
    if (begin == std::string::npos) return "";
    std::size_t last = out.find_last_not_of(" \t\n");
    return out.substr(begin, last - begin + 1);
}

std::vector<Section> paginate(const std::string& markdown, std::size_t section_limit,
                              const TokenCounter& counter) {
    std::vector<Section> sections;
    if (section_limit == 0) section_limit = 1;

    std::string current;
    std::size_t current_tokens = 0;
    auto flush = [&]() {
        Section s;
        s.id = static_cast<int>(sections.size());
        s.token_count = counter(current);
        s.text = std::move(current);
        sections.push_back(std::move(s));
        current.clear();
        current_tokens = 0;
    };

    std::size_t i = 0;
    while (i < markdown.size()) {
        std::size_t eol = markdown.find('\n', i);
        std::size_t line_end = (eol == std::string::npos) ? markdown.size() : eol + 1;
        std::string_view line(markdown.data() + i, line_end - i);
        const std::size_t line_tokens = counter(line);
        if (!current.empty() && current_tokens + line_tokens > section_limit) flush();
        current.append(line);
        current_tokens += line_tokens;
        i = line_end;
    }
    flush();  // also yields a single empty section for an empty page
    return sections;
}

}  // namespace rover
