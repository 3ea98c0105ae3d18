#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rover/tokens.hpp"

namespace rover {

/// Best-effort HTML -> markdown-ish plain text. Anchors are reduced to their
/// inner text (no href survives), images and script/style/noscript content
/// are dropped entirely, block elements become paragraph breaks. Tolerates
/// arbitrary bytes and never throws.
std::string html_to_markdown(const std::string& html);

struct Section {
    int id = 0;  // 0-based
    std::string text;
    std::size_t token_count = 0;
};

/// Split markdown into sections of at most `section_limit` tokens, breaking at
/// line boundaries. A single line longer than the limit stays in one oversized
/// section. Concatenating all section texts reproduces the input byte-exactly.
std::vector<Section> paginate(const std::string& markdown, std::size_t section_limit,
                              const TokenCounter& counter);

}  // namespace rover
