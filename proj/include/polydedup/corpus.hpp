#pragma once

// Posting records: loading, validation, serialization, corpus statistics and
// pair-count arithmetic.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "polydedup/csv.hpp"
#include "polydedup/error.hpp"
#include "polydedup/hash.hpp"

namespace polydedup {

using Date = std::chrono::year_month_day;

// Parses YYYY-MM-DD. A trailing time component introduced by 'T' or ' ' is
// dropped; comparisons are date-granular.
inline std::optional<Date> parse_date(std::string_view s) {
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return std::nullopt;
    auto number = [&](std::size_t pos, std::size_t len, int& out) {
        auto sub = s.substr(pos, len);
        if (!std::all_of(sub.begin(), sub.end(), [](char c) { return c >= '0' && c <= '9'; }))
            return false;
        auto [p, ec] = std::from_chars(sub.data(), sub.data() + sub.size(), out);
        return ec == std::errc{} && p == sub.data() + sub.size();
    };
    int y, m, d;
    if (!number(0, 4, y) || !number(5, 2, m) || !number(8, 2, d)) return std::nullopt;
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

inline std::string format_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

// ISO-639 style tag: 2-3 lowercase ASCII letters, optionally followed by
// "-" subtags of ASCII alphanumerics (e.g. "en", "deu", "pt-BR").
inline bool is_valid_language_code(std::string_view code) {
    auto dash = code.find('-');
    auto primary = code.substr(0, dash);
    if (primary.size() < 2 || primary.size() > 3) return false;
    if (!std::all_of(primary.begin(), primary.end(), [](char c) { return c >= 'a' && c <= 'z'; }))
        return false;
    while (dash != std::string_view::npos) {
        code = code.substr(dash + 1);
        dash = code.find('-');
        auto sub = code.substr(0, dash);
        if (sub.empty() || !std::all_of(sub.begin(), sub.end(), [](char c) {
                return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
            }))
            return false;
    }
    return true;
}

inline bool is_valid_country_code(std::string_view code) {
    return code.size() == 2 && std::all_of(code.begin(), code.end(), [](char c) {
               return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
           });
}

struct Posting {
    std::string id;
    std::string title;
    std::string description;
    std::optional<std::string> company;
    std::optional<std::string> location;
    std::optional<std::string> country;
    std::optional<std::string> language;
    Date retrieval_date{};
    std::string source;

    friend bool operator==(const Posting&, const Posting&) = default;
};

inline constexpr std::string_view kUndeterminedLanguage = "und";

inline const std::vector<std::string>& posting_field_names() {
    static const std::vector<std::string> names{"id",      "title",    "description",
                                                "company", "location", "country",
                                                "language", "retrieval_date", "source"};
    return names;
}

enum class CorpusFormat { Jsonl, Csv };

inline std::optional<CorpusFormat> parse_corpus_format(std::string_view s) {
    if (s == "jsonl" || s == "json") return CorpusFormat::Jsonl;
    if (s == "csv") return CorpusFormat::Csv;
    return std::nullopt;
}

namespace detail {

// Builds a Posting from already-split raw fields. `get(name)` returns the
// field's value if present and non-null.
template <typename Getter>
Posting make_posting(Getter&& get, std::size_t line) {
    Posting p;
    auto id = get("id");
    if (!id || id->empty()) throw MissingRequiredField("id", line);
    p.id = std::move(*id);
    p.title = get("title").value_or("");
    p.description = get("description").value_or("");
    if (p.title.empty() && p.description.empty())
        throw MissingRequiredField("title|description", line);
    auto optional_field = [&](const char* name) -> std::optional<std::string> {
        auto v = get(name);
        if (!v || v->empty()) return std::nullopt;
        return v;
    };
    p.company = optional_field("company");
    p.location = optional_field("location");
    p.country = optional_field("country");
    if (p.country && !is_valid_country_code(*p.country))
        throw MalformedRecord(line, "invalid country code '" + *p.country + "'");
    p.language = optional_field("language");
    if (p.language && !is_valid_language_code(*p.language))
        throw MalformedRecord(line, "invalid language code '" + *p.language + "'");
    auto date = get("retrieval_date");
    if (!date || date->empty()) throw MissingRequiredField("retrieval_date", line);
    auto parsed = parse_date(*date);
    if (!parsed) throw MalformedRecord(line, "invalid retrieval_date '" + *date + "'");
    p.retrieval_date = *parsed;
    p.source = get("source").value_or("");
    return p;
}

inline void check_unique(std::vector<Posting>& postings) {
    std::unordered_set<std::string> seen;
    seen.reserve(postings.size());
    for (const auto& p : postings)
        if (!seen.insert(p.id).second) throw DuplicateId(p.id);
}

}  // namespace detail

inline std::vector<Posting> parse_postings_jsonl(std::istream& in) {
    std::vector<Posting> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw MalformedRecord(line_no, e.what());
        }
        if (!obj.is_object()) throw MalformedRecord(line_no, "expected a JSON object");
        auto get = [&](const char* key) -> std::optional<std::string> {
            auto it = obj.find(key);
            if (it == obj.end() || it->is_null()) return std::nullopt;
            if (!it->is_string())
                throw MalformedRecord(line_no, std::string("field '") + key + "' is not a string");
            return it->get<std::string>();
        };
        out.push_back(detail::make_posting(get, line_no));
    }
    detail::check_unique(out);
    return out;
}

inline std::vector<Posting> parse_postings_csv(std::istream& in) {
    std::vector<Posting> out;
    csv::Reader reader(in);
    std::optional<csv::Row> header;
    try {
        header = reader.next();
    } catch (const std::runtime_error& e) {
        throw MalformedRecord(1, e.what());
    }
    if (!header) return out;
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header->fields.size(); ++i) {
        const auto& name = header->fields[i];
        const auto& known = posting_field_names();
        if (std::find(known.begin(), known.end(), name) == known.end())
            throw MalformedRecord(header->line, "unknown column '" + name + "'");
        if (!column.emplace(name, i).second)
            throw MalformedRecord(header->line, "repeated column '" + name + "'");
    }
    for (const auto& name : posting_field_names())
        if (!column.count(name)) throw MalformedRecord(header->line, "header lacks column '" + name + "'");
    for (;;) {
        std::optional<csv::Row> row;
        try {
            row = reader.next();
        } catch (const std::runtime_error& e) {
            throw MalformedRecord(reader.line(), e.what());
        }
        if (!row) break;
        if (row->fields.size() != header->fields.size())
            throw MalformedRecord(row->line, "expected " + std::to_string(header->fields.size()) +
                                                 " fields, got " + std::to_string(row->fields.size()));
        auto get = [&](const char* key) -> std::optional<std::string> {
            const auto& v = row->fields[column.at(key)];
            if (v.empty()) return std::nullopt;
            return v;
        };
        out.push_back(detail::make_posting(get, row->line));
    }
    detail::check_unique(out);
    return out;
}

inline std::vector<Posting> load_postings(const std::string& path, CorpusFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return format == CorpusFormat::Jsonl ? parse_postings_jsonl(in) : parse_postings_csv(in);
}

inline nlohmann::ordered_json posting_to_json(const Posting& p) {
    auto opt = [](const std::optional<std::string>& v) -> nlohmann::ordered_json {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["title"] = p.title;
    j["description"] = p.description;
    j["company"] = opt(p.company);
    j["location"] = opt(p.location);
    j["country"] = opt(p.country);
    j["language"] = opt(p.language);
    j["retrieval_date"] = format_date(p.retrieval_date);
    j["source"] = p.source;
    return j;
}

inline void write_postings(std::ostream& out, const std::vector<Posting>& postings,
                           CorpusFormat format) {
    if (format == CorpusFormat::Jsonl) {
        for (const auto& p : postings) out << posting_to_json(p).dump() << '\n';
        return;
    }
    out << csv::join(posting_field_names()) << '\n';
    for (const auto& p : postings) {
        out << csv::join({p.id, p.title, p.description, p.company.value_or(""),
                          p.location.value_or(""), p.country.value_or(""), p.language.value_or(""),
                          format_date(p.retrieval_date), p.source})
            << '\n';
    }
}

inline void save_postings(const std::string& path, const std::vector<Posting>& postings,
                          CorpusFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_postings(out, postings, format);
}

// n(n-1)/2 without overflow for any 64-bit n.
inline u128 pair_count(std::uint64_t n) {
    if (n < 2) return 0;
    u128 a = n, b = n - 1;
    return (n % 2 == 0) ? (a / 2) * b : a * (b / 2);
}

inline std::string to_string(u128 v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    return {s.rbegin(), s.rend()};
}

struct CorpusStats {
    std::map<std::string, std::size_t> language_histogram;
    // bucket lower bound -> count; bucket i covers [i, i + token_bucket_width)
    std::map<std::size_t, std::size_t> token_count_histogram;
    std::size_t token_bucket_width = 64;
    std::size_t n_postings = 0;
    double missing_company_fraction = 0.0;
    double missing_location_fraction = 0.0;
};

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

inline CorpusStats corpus_stats(const std::vector<Posting>& postings, const Tokenizer& tokenizer,
                                std::size_t bucket_width = 64) {
    CorpusStats stats;
    stats.token_bucket_width = std::max<std::size_t>(1, bucket_width);
    stats.n_postings = postings.size();
    std::size_t missing_company = 0, missing_location = 0;
    for (const auto& p : postings) {
        ++stats.language_histogram[p.language.value_or(std::string(kUndeterminedLanguage))];
        auto n_tokens = tokenizer(p.title + " " + p.description).size();
        ++stats.token_count_histogram[n_tokens / stats.token_bucket_width * stats.token_bucket_width];
        missing_company += !p.company;
        missing_location += !p.location;
    }
    if (!postings.empty()) {
        stats.missing_company_fraction = double(missing_company) / double(postings.size());
        stats.missing_location_fraction = double(missing_location) / double(postings.size());
    }
    return stats;
}

inline nlohmann::ordered_json to_json(const CorpusStats& s) {
    nlohmann::ordered_json j;
    j["n_postings"] = s.n_postings;
    j["missing_company_fraction"] = s.missing_company_fraction;
    j["missing_location_fraction"] = s.missing_location_fraction;
    j["language_histogram"] = s.language_histogram;
    j["token_bucket_width"] = s.token_bucket_width;
    nlohmann::ordered_json buckets = nlohmann::ordered_json::object();
    for (auto [lo, count] : s.token_count_histogram) buckets[std::to_string(lo)] = count;
    j["token_count_histogram"] = buckets;
    return j;
}

}  // namespace polydedup
