#pragma once

// UTF-8 helpers backed by ICU character properties.

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>
#include <string>
#include <string_view>

namespace polydedup::text {

using CodePoint = std::int32_t;
inline constexpr CodePoint kInvalid = -1;

// Calls fn(code_point, raw_bytes) for each code point; malformed sequences
// are reported as kInvalid with the offending bytes.
template <typename Fn>
void for_each_code_point(std::string_view s, Fn&& fn) {
    const auto* data = reinterpret_cast<const std::uint8_t*>(s.data());
    const auto length = static_cast<std::int32_t>(s.size());
    std::int32_t i = 0;
    while (i < length) {
        std::int32_t start = i;
        UChar32 cp;
        U8_NEXT(data, i, length, cp);
        fn(cp < 0 ? kInvalid : static_cast<CodePoint>(cp),
           s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
    }
}

inline void append_utf8(std::string& out, CodePoint cp) {
    if (cp < 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return;
    std::uint8_t buf[4];
    std::int32_t n = 0;
    UBool error = false;
    U8_APPEND(buf, n, 4, cp, error);
    if (!error) out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline bool is_ascii(CodePoint cp) { return cp >= 0 && cp < 0x80; }
inline bool is_ascii_alnum(CodePoint cp) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}
inline bool is_ascii_space(CodePoint cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
}
inline bool is_space(CodePoint cp) {
    return is_ascii_space(cp) || (cp > 0x7F && u_isUWhiteSpace(cp));
}
inline bool is_letter(CodePoint cp) { return cp >= 0 && u_isalpha(cp); }
inline bool is_digit(CodePoint cp) { return cp >= 0 && u_isdigit(cp); }
inline bool is_lower(CodePoint cp) { return cp >= 0 && u_islower(cp); }
inline bool is_upper(CodePoint cp) { return cp >= 0 && u_isupper(cp); }
inline bool is_control(CodePoint cp) { return cp < 0 || u_iscntrl(cp); }
inline bool is_punct(CodePoint cp) {
    if (cp < 0) return false;
    if (cp < 0x80) return cp > 0x20 && cp < 0x7F && !is_ascii_alnum(cp);
    return u_ispunct(cp);
}

// Simple (one-to-one) lowercase mapping; malformed bytes are copied through.
inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for_each_code_point(s, [&](CodePoint cp, std::string_view raw) {
        if (cp == kInvalid) {
            out.append(raw);
        } else if (cp < 0x80) {
            out.push_back(static_cast<char>(cp >= 'A' && cp <= 'Z' ? cp + 32 : cp));
        } else {
            append_utf8(out, u_tolower(cp));
        }
    });
    return out;
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    return out;
}

}  // namespace polydedup::text
