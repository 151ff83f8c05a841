#pragma once

// Text cleaning for scraped postings, case-insensitive fingerprinting and
// exact-duplicate grouping.

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polydedup/corpus.hpp"
#include "polydedup/error.hpp"
#include "polydedup/hash.hpp"
#include "polydedup/parallel.hpp"
#include "polydedup/text.hpp"

namespace polydedup {

using text::CodePoint;

inline const std::set<CodePoint>& default_keep_punct() {
    static const std::set<CodePoint> keep{'.', ',', ';', ':', '!', '?', '(', ')',
                                          '/', '-', '&', '\'', '+', '%', '"'};
    return keep;
}

struct NormalizeConfig {
    bool ascii_only = false;
    std::set<CodePoint> keep_punct = default_keep_punct();
};

struct CanonicalText {
    std::string text;
    Fingerprint fingerprint;
    std::string source_id;

    friend bool operator==(const CanonicalText&, const CanonicalText&) = default;
};

struct ExactGroup {
    std::string representative_id;
    std::vector<std::string> member_ids;  // sorted ascending

    friend bool operator==(const ExactGroup&, const ExactGroup&) = default;
};

// Replaces every tag `<` [A-Za-z/!?] ... `>` (no nested `<`) with one space.
// A `<` that does not open such a tag is copied verbatim.
inline std::string strip_html(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        char c = in[i];
        if (c == '<' && i + 1 < in.size()) {
            char n = in[i + 1];
            bool opener = (n >= 'a' && n <= 'z') || (n >= 'A' && n <= 'Z') || n == '/' || n == '!' ||
                          n == '?';
            if (opener) {
                auto close = in.find_first_of("<>", i + 1);
                if (close != std::string_view::npos && in[close] == '>') {
                    out.push_back(' ');
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

namespace detail {

inline const std::unordered_map<std::string_view, CodePoint>& named_entities() {
    static const std::unordered_map<std::string_view, CodePoint> table{
        {"quot", 34},     {"amp", 38},      {"apos", 39},     {"lt", 60},       {"gt", 62},
        {"nbsp", 160},    {"iexcl", 161},   {"cent", 162},    {"pound", 163},   {"curren", 164},
        {"yen", 165},     {"brvbar", 166},  {"sect", 167},    {"uml", 168},     {"copy", 169},
        {"ordf", 170},    {"laquo", 171},   {"not", 172},     {"shy", 173},     {"reg", 174},
        {"macr", 175},    {"deg", 176},     {"plusmn", 177},  {"sup2", 178},    {"sup3", 179},
        {"acute", 180},   {"micro", 181},   {"para", 182},    {"middot", 183},  {"cedil", 184},
        {"sup1", 185},    {"ordm", 186},    {"raquo", 187},   {"frac14", 188},  {"frac12", 189},
        {"frac34", 190},  {"iquest", 191},  {"Agrave", 192},  {"Aacute", 193},  {"Acirc", 194},
        {"Atilde", 195},  {"Auml", 196},    {"Aring", 197},   {"AElig", 198},   {"Ccedil", 199},
        {"Egrave", 200},  {"Eacute", 201},  {"Ecirc", 202},   {"Euml", 203},    {"Igrave", 204},
        {"Iacute", 205},  {"Icirc", 206},   {"Iuml", 207},    {"ETH", 208},     {"Ntilde", 209},
        {"Ograve", 210},  {"Oacute", 211},  {"Ocirc", 212},   {"Otilde", 213},  {"Ouml", 214},
        {"times", 215},   {"Oslash", 216},  {"Ugrave", 217},  {"Uacute", 218},  {"Ucirc", 219},
        {"Uuml", 220},    {"Yacute", 221},  {"THORN", 222},   {"szlig", 223},   {"agrave", 224},
        {"aacute", 225},  {"acirc", 226},   {"atilde", 227},  {"auml", 228},    {"aring", 229},
        {"aelig", 230},   {"ccedil", 231},  {"egrave", 232},  {"eacute", 233},  {"ecirc", 234},
        {"euml", 235},    {"igrave", 236},  {"iacute", 237},  {"icirc", 238},   {"iuml", 239},
        {"eth", 240},     {"ntilde", 241},  {"ograve", 242},  {"oacute", 243},  {"ocirc", 244},
        {"otilde", 245},  {"ouml", 246},    {"divide", 247},  {"oslash", 248},  {"ugrave", 249},
        {"uacute", 250},  {"ucirc", 251},   {"uuml", 252},    {"yacute", 253},  {"thorn", 254},
        {"yuml", 255},    {"OElig", 338},   {"oelig", 339},   {"Scaron", 352},  {"scaron", 353},
        {"Yuml", 376},    {"fnof", 402},    {"circ", 710},    {"tilde", 732},   {"ensp", 8194},
        {"emsp", 8195},   {"thinsp", 8201}, {"zwnj", 8204},   {"zwj", 8205},    {"lrm", 8206},
        {"rlm", 8207},    {"ndash", 8211},  {"mdash", 8212},  {"lsquo", 8216},  {"rsquo", 8217},
        {"sbquo", 8218},  {"ldquo", 8220},  {"rdquo", 8221},  {"bdquo", 8222},  {"dagger", 8224},
        {"Dagger", 8225}, {"bull", 8226},   {"hellip", 8230}, {"permil", 8240}, {"prime", 8242},
        {"Prime", 8243},  {"lsaquo", 8249}, {"rsaquo", 8250}, {"euro", 8364},   {"trade", 8482},
        {"larr", 8592},   {"rarr", 8594},   {"minus", 8722},
    };
    return table;
}

inline bool valid_scalar(long long cp) {
    return cp > 0 && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
}

}  // namespace detail

// Decodes `&name;`, `&#DDD;` and `&#xHHH;`. Unknown names and out-of-range
// numbers are left verbatim.
inline std::string decode_entities(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        if (in[i] != '&') {
            out.push_back(in[i++]);
            continue;
        }
        auto semi = in.find(';', i + 1);
        // longest known entity name is short; bound the lookahead
        if (semi == std::string_view::npos || semi - i > 32) {
            out.push_back(in[i++]);
            continue;
        }
        auto body = in.substr(i + 1, semi - i - 1);
        std::optional<CodePoint> cp;
        if (body.size() >= 2 && body[0] == '#') {
            bool hex = body[1] == 'x' || body[1] == 'X';
            auto digits = body.substr(hex ? 2 : 1);
            long long value = 0;
            if (!digits.empty() && digits.size() <= 8) {
                auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value,
                                               hex ? 16 : 10);
                if (ec == std::errc{} && p == digits.data() + digits.size() &&
                    detail::valid_scalar(value))
                    cp = static_cast<CodePoint>(value);
            }
        } else if (!body.empty()) {
            auto it = detail::named_entities().find(body);
            if (it != detail::named_entities().end()) cp = it->second;
        }
        if (!cp) {
            out.push_back(in[i++]);
            continue;
        }
        text::append_utf8(out, *cp);
        i = semi + 1;
    }
    return out;
}

inline std::string split_camel_case(std::string_view in) {
    std::string out;
    out.reserve(in.size() + in.size() / 8);
    bool prev_lower = false;
    text::for_each_code_point(in, [&](CodePoint cp, std::string_view raw) {
        if (prev_lower && text::is_upper(cp)) out.push_back(' ');
        out.append(raw);
        prev_lower = text::is_lower(cp);
    });
    return out;
}

inline std::string filter_charset(std::string_view in, bool ascii_only,
                                  const std::set<CodePoint>& keep_punct) {
    if (keep_punct.empty()) throw ConfigError("keep_punct must not be empty");
    std::string out;
    out.reserve(in.size());
    text::for_each_code_point(in, [&](CodePoint cp, std::string_view raw) {
        bool keep;
        if (ascii_only) {
            keep = text::is_ascii_alnum(cp) || text::is_ascii_space(cp) || keep_punct.count(cp);
        } else {
            keep = text::is_space(cp) || keep_punct.count(cp) ||
                   (!text::is_control(cp) && (text::is_letter(cp) || text::is_digit(cp)));
        }
        if (keep) out.append(raw);
    });
    return out;
}

inline std::string collapse_punct_and_ws(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    CodePoint prev = text::kInvalid;
    bool pending_space = false;
    text::for_each_code_point(in, [&](CodePoint cp, std::string_view raw) {
        if (text::is_space(cp)) {
            pending_space = true;
            return;
        }
        if (pending_space) {
            if (!out.empty()) out.push_back(' ');
            pending_space = false;
            prev = ' ';
        }
        if (cp != text::kInvalid && cp == prev && text::is_punct(cp)) return;
        out.append(raw);
        prev = cp;
    });
    return out;
}

// Single application of the cleaning steps in their fixed order.
inline std::string clean_once(std::string_view in, const NormalizeConfig& config) {
    auto s = strip_html(in);
    // escaped markup decodes to tags, which are stripped in the same pass
    for (int depth = 0; depth < 8; ++depth) {
        auto decoded = decode_entities(s);
        if (decoded == s) break;
        s = std::move(decoded);
    }
    s = strip_html(s);
    s = split_camel_case(s);
    s = filter_charset(s, config.ascii_only, config.keep_punct);
    return collapse_punct_and_ws(s);
}

// Cleaning iterated to a fixed point. Characters removed by the charset filter
// can expose new tags, references or case boundaries; re-running until stable makes clean(clean(x)) == clean(x).
inline std::string clean_text(std::string_view in, const NormalizeConfig& config = {}) {
    std::string current = clean_once(in, config);
    for (int round = 0; round < 64; ++round) {
        std::string next = clean_once(current, config);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

inline Fingerprint fingerprint_of(std::string_view canonical_text) {
    return fnv1a_128(text::to_lower(canonical_text));
}

inline CanonicalText canonicalize(const Posting& posting, const NormalizeConfig& config = {}) {
    CanonicalText c;
    c.text = clean_text(posting.title + " " + posting.description, config);
    c.fingerprint = fingerprint_of(c.text);
    c.source_id = posting.id;
    return c;
}

inline std::vector<CanonicalText> canonicalize_all(const std::vector<Posting>& postings,
                                                   const NormalizeConfig& config, std::size_t threads = 0) {
    std::vector<CanonicalText> out(postings.size());
    parallel_for(postings.size(), threads, [&](std::size_t i) { out[i] = canonicalize(postings[i], config); });
    return out;
}

// Groups by fingerprint. Every input id lands in exactly one group; groups are
// ordered by representative (minimum member id).
inline std::vector<ExactGroup> group_exact(const std::vector<CanonicalText>& canonicals) {
    std::unordered_map<Fingerprint, std::vector<const CanonicalText*>, FingerprintHash> buckets;
    for (const auto& c : canonicals) buckets[c.fingerprint].push_back(&c);
    std::vector<ExactGroup> groups;
    groups.reserve(buckets.size());
    for (auto& [fp, members] : buckets) {
        std::string lowered = text::to_lower(members.front()->text);
        ExactGroup g;
        for (const auto* m : members) {
            if (m != members.front() && text::to_lower(m->text) != lowered)
                throw FingerprintCollision(members.front()->source_id, m->source_id);
            g.member_ids.push_back(m->source_id);
        }
        std::sort(g.member_ids.begin(), g.member_ids.end());
        g.representative_id = g.member_ids.front();
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(), [](const ExactGroup& a, const ExactGroup& b) {
        return a.representative_id < b.representative_id;
    });
    return groups;
}

}  // namespace polydedup
