#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace rover {

/// Pluggable token counter. Budgets throughout the runtime are expressed in
/// whatever unit the configured counter produces; the default is a
/// deterministic character proxy so tests run without a real tokenizer.
using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Default proxy: ceil(chars / 4).
inline std::size_t approx_tokens(std::string_view text) {
    return (text.size() + 3) / 4;
}

inline TokenCounter default_token_counter() {
    return [](std::string_view s) { return approx_tokens(s); };
}

}  // namespace rover
