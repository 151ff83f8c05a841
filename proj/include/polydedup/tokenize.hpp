#pragma once

// Word-level tokenizer: whitespace split, then leading and trailing
// punctuation peeled off as one token per character.

#include <string>
#include <string_view>
#include <vector>

#include "polydedup/error.hpp"
#include "polydedup/text.hpp"

namespace polydedup {

inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    struct Unit {
        std::string_view raw;
        bool punct;
    };
    std::vector<Unit> word;
    auto flush = [&] {
        if (word.empty()) return;
        std::size_t lo = 0, hi = word.size();
        while (lo < hi && word[lo].punct) tokens.emplace_back(word[lo++].raw);
        std::size_t tail = hi;
        while (tail > lo && word[tail - 1].punct) --tail;
        if (lo < tail) {
            std::string core;
            for (std::size_t i = lo; i < tail; ++i) core.append(word[i].raw);
            tokens.push_back(std::move(core));
        }
        for (std::size_t i = tail; i < hi; ++i) tokens.emplace_back(word[i].raw);
        word.clear();
    };
    text::for_each_code_point(s, [&](text::CodePoint cp, std::string_view raw) {
        if (text::is_space(cp)) {
            flush();
        } else {
            word.push_back({raw, text::is_punct(cp)});
        }
    });
    flush();
    return tokens;
}

struct Truncation {
    std::vector<std::string> kept;
    std::size_t n_lost = 0;
};

inline constexpr std::size_t kDefaultMaxTokens = 384;

inline Truncation truncate_tokens(std::vector<std::string> tokens,
                                  std::size_t max_tokens = kDefaultMaxTokens) {
    if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
    Truncation t;
    if (tokens.size() > max_tokens) {
        t.n_lost = tokens.size() - max_tokens;
        tokens.resize(max_tokens);
    }
    t.kept = std::move(tokens);
    return t;
}

}  // namespace polydedup
