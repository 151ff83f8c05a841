#pragma once

// Translation stage: pluggable translators, a persistent translation cache and
// a bounded-concurrency batch driver.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "polydedup/corpus.hpp"
#include "polydedup/error.hpp"
#include "polydedup/hash.hpp"
#include "polydedup/http.hpp"
#include "polydedup/parallel.hpp"
#include "polydedup/retry.hpp"
#include "polydedup/text.hpp"

namespace polydedup {

inline constexpr const char* kTranslateApiKeyEnv = "DEDUP_TRANSLATE_API_KEY";

struct TranslationRequest {
    Fingerprint fingerprint;
    std::string text;
    std::optional<std::string> source_language;
    std::string target_language = "en";
};

class Translator {
public:
    virtual ~Translator() = default;
    virtual std::string name() const = 0;
    // Returns one translation per input text, in order.
    virtual std::vector<std::string> translate(const std::vector<std::string>& texts,
                                               const std::optional<std::string>& source,
                                               const std::string& target) = 0;
};

class IdentityTranslator final : public Translator {
public:
    std::string name() const override { return "identity"; }
    std::vector<std::string> translate(const std::vector<std::string>& texts,
                                       const std::optional<std::string>&, const std::string&) override {
        return texts;
    }
};

// Word-map translator. Text is split on whitespace; at each position the
// longest dictionary key (possibly several words) wins. Matching ignores
// leading/trailing punctuation on the text tokens (re-attached on output) and
// falls back to a lowercase comparison. Unknown tokens pass through.
class DictionaryTranslator final : public Translator {
public:
    explicit DictionaryTranslator(const std::map<std::string, std::string>& entries) {
        for (const auto& [key, target] : entries) {
            auto words = split_ws(key);
            if (words.empty()) continue;
            exact_[words.front()].push_back({words, target});
            std::vector<std::string> lowered;
            for (const auto& w : words) lowered.push_back(text::to_lower(w));
            folded_[lowered.front()].push_back({lowered, target});
        }
        for (auto* index : {&exact_, &folded_})
            for (auto& [first, list] : *index)
                std::stable_sort(list.begin(), list.end(), [](const Entry& a, const Entry& b) {
                    return a.words.size() > b.words.size();
                });
    }

    static DictionaryTranslator from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read dictionary file " + path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("dictionary " + path + ": " + e.what());
        }
        if (!j.is_object()) throw ConfigError("dictionary " + path + " must be a JSON object");
        std::map<std::string, std::string> entries;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!it.value().is_string()) throw ConfigError("dictionary value for '" + it.key() + "' is not a string");
            entries.emplace(it.key(), it.value().get<std::string>());
        }
        return DictionaryTranslator(entries);
    }

    std::string name() const override { return "dictionary"; }

    std::vector<std::string> translate(const std::vector<std::string>& texts,
                                       const std::optional<std::string>&, const std::string&) override {
        std::vector<std::string> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(translate_one(t));
        return out;
    }

    std::string translate_one(const std::string& input) const {
        auto words = split_ws(input);
        std::vector<Token> tokens;
        tokens.reserve(words.size());
        for (auto& w : words) tokens.push_back(Token::peel(std::move(w)));
        std::string out;
        std::size_t i = 0;
        while (i < tokens.size()) {
            if (!out.empty()) out.push_back(' ');
            auto match = find(tokens, i, exact_, false);
            if (!match) match = find(tokens, i, folded_, true);
            if (match && match->includes_punct) {
                out += match->target;
                ++i;
            } else if (match) {
                out += tokens[i].prefix + match->target + tokens[i + match->consumed - 1].suffix;
                i += match->consumed;
            } else {
                out += tokens[i].whole;
                ++i;
            }
        }
        return out;
    }

private:
    struct Entry {
        std::vector<std::string> words;
        std::string target;
    };
    struct Token {
        std::string whole, prefix, core, suffix, core_lower;
        static Token peel(std::string w) {
            Token t;
            auto is_p = [](char c) { return c > 0x20 && c < 0x7F && !std::isalnum(static_cast<unsigned char>(c)); };
            std::size_t lo = 0, hi = w.size();
            while (lo < hi && is_p(w[lo])) ++lo;
            while (hi > lo && is_p(w[hi - 1])) --hi;
            t.prefix = w.substr(0, lo);
            t.core = w.substr(lo, hi - lo);
            t.suffix = w.substr(hi);
            t.core_lower = text::to_lower(t.core);
            t.whole = std::move(w);
            return t;
        }
    };
    using Index = std::unordered_map<std::string, std::vector<Entry>>;

    static std::vector<std::string> split_ws(const std::string& s) {
        std::vector<std::string> words;
        std::string cur;
        for (char c : s) {
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                if (!cur.empty()) words.push_back(std::move(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) words.push_back(std::move(cur));
        return words;
    }

    struct Match {
        std::size_t consumed;
        std::string target;
        bool includes_punct;  // key matched the token with its punctuation
    };

    // Longest key starting at token i. A single-word key may match the raw
    // token (punctuation included) before its peeled core.
    static std::optional<Match> find(const std::vector<Token>& tokens, std::size_t i, const Index& index,
                                     bool folded) {
        auto key_of = [&](const Token& t) -> std::string { return folded ? t.core_lower : t.core; };
        const Token& head = tokens[i];
        std::optional<Match> best;
        if (auto it = index.find(key_of(head)); it != index.end()) {
            for (const auto& e : it->second) {
                if (i + e.words.size() > tokens.size()) continue;
                bool ok = true;
                for (std::size_t k = 1; k < e.words.size() && ok; ++k) ok = key_of(tokens[i + k]) == e.words[k];
                if (ok) {
                    best = Match{e.words.size(), e.target, false};
                    break;
                }
            }
        }
        if (best && best->consumed > 1) return best;
        auto raw = folded ? text::to_lower(head.whole) : head.whole;
        if (raw != key_of(head))
            if (auto it = index.find(raw); it != index.end())
                for (const auto& e : it->second)
                    if (e.words.size() == 1) return Match{1, e.target, true};
        return best;
    }

    Index exact_;
    Index folded_;
};

// POST {"texts": [...], "target": "en", "source": "de"?} -> {"translations": [...]}
class RemoteTranslator final : public Translator {
public:
    RemoteTranslator(const std::string& endpoint, std::optional<std::string> bearer_token,
                     std::chrono::milliseconds connect_timeout = std::chrono::milliseconds(2000))
        : endpoint_(http::parse_endpoint(endpoint)) {
        options_.bearer_token = std::move(bearer_token);
        options_.connect_timeout = connect_timeout;
    }

    std::string name() const override { return "remote"; }

    std::vector<std::string> translate(const std::vector<std::string>& texts,
                                       const std::optional<std::string>& source,
                                       const std::string& target) override {
        nlohmann::json body;
        body["texts"] = texts;
        body["target"] = target;
        if (source) body["source"] = *source;
        auto reply = http::post_json(endpoint_, body, options_);
        if (!reply.contains("translations") || !reply["translations"].is_array())
            throw BackendUnavailable("translate reply lacks translations");
        auto out = reply["translations"].get<std::vector<std::string>>();
        if (out.size() != texts.size())
            throw BackendUnavailable("translate reply has wrong number of translations");
        return out;
    }

private:
    http::Endpoint endpoint_;
    http::PostOptions options_;
};

struct TranslatorSpec {
    enum class Kind { Identity, Dictionary, Remote } kind = Kind::Identity;
    std::string dictionary_path;
    std::string endpoint;
};

inline std::unique_ptr<Translator> make_backend(const TranslatorSpec& spec) {
    switch (spec.kind) {
        case TranslatorSpec::Kind::Identity:
            return std::make_unique<IdentityTranslator>();
        case TranslatorSpec::Kind::Dictionary:
            return std::make_unique<DictionaryTranslator>(DictionaryTranslator::from_file(spec.dictionary_path));
        case TranslatorSpec::Kind::Remote: {
            std::optional<std::string> key;
            if (const char* env = std::getenv(kTranslateApiKeyEnv)) key = env;
            return std::make_unique<RemoteTranslator>(spec.endpoint, key);
        }
    }
    throw ConfigError("unknown translator kind");
}

struct TranslationCacheEntry {
    Fingerprint fingerprint;
    std::string target_language;
    std::string backend_name;
    std::string translated_text;
    std::int64_t timestamp = 0;  // unix seconds
};

// Keyed by (fingerprint, target, backend). Concurrent readers, serialized
// writers. When attached to a file, entries are appended as JSONL on insert
// and reloaded on construction; the first entry for a key wins.
class TranslationCache {
public:
    TranslationCache() = default;

    explicit TranslationCache(std::string path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t line_no = 0;
        while (in && std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                auto fp = Fingerprint::from_hex(j.at("fingerprint").get<std::string>());
                if (!fp) throw MalformedRecord(line_no, "bad fingerprint");
                TranslationCacheEntry e{*fp, j.at("target").get<std::string>(), j.at("backend").get<std::string>(),
                                        j.at("translated_text").get<std::string>(),
                                        j.value("timestamp", std::int64_t{0})};
                entries_.emplace(key(e.fingerprint, e.target_language, e.backend_name), std::move(e));
            } catch (const nlohmann::json::exception& ex) {
                throw MalformedRecord(line_no, std::string("translation cache: ") + ex.what());
            }
        }
    }

    std::optional<std::string> lookup(const Fingerprint& fp, const std::string& target,
                                      const std::string& backend) const {
        std::shared_lock lock(mu_);
        auto it = entries_.find(key(fp, target, backend));
        if (it == entries_.end()) return std::nullopt;
        return it->second.translated_text;
    }

    void insert(TranslationCacheEntry entry) {
        std::unique_lock lock(mu_);
        auto k = key(entry.fingerprint, entry.target_language, entry.backend_name);
        if (entries_.count(k)) return;
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app);
            if (!out) throw IoError("cannot append to translation cache " + path_);
            nlohmann::ordered_json j;
            j["fingerprint"] = entry.fingerprint.hex();
            j["target"] = entry.target_language;
            j["backend"] = entry.backend_name;
            j["translated_text"] = entry.translated_text;
            j["timestamp"] = entry.timestamp;
            out << j.dump() << '\n';
        }
        entries_.emplace(std::move(k), std::move(entry));
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

private:
    static std::string key(const Fingerprint& fp, const std::string& target, const std::string& backend) {
        return fp.hex() + '\x1f' + target + '\x1f' + backend;
    }

    std::string path_;
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, TranslationCacheEntry> entries_;
};

struct TranslateOptions {
    std::size_t max_in_flight = 4;
    std::size_t batch_size = 32;
    RetryPolicy retry{};
};

struct TranslateStats {
    std::size_t requests = 0;
    std::size_t cache_hits = 0;
    std::size_t backend_batches = 0;
    std::size_t texts_sent = 0;
};

// Translates requests in order. Cached and repeated fingerprints never reach
// the backend; misses are grouped by language pair into batches and sent with
// at most options.max_in_flight batches outstanding.
inline std::vector<std::string> translate_batch(const std::vector<TranslationRequest>& requests,
                                                Translator& backend, TranslationCache& cache,
                                                const TranslateOptions& options = {},
                                                TranslateStats* stats = nullptr) {
    if (options.max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
    for (const auto& r : requests) {
        if (!is_valid_language_code(r.target_language)) throw InvalidLanguage(r.target_language);
        if (r.source_language && !is_valid_language_code(*r.source_language))
            throw InvalidLanguage(*r.source_language);
    }
    const std::string backend_name = backend.name();
    std::vector<std::string> out(requests.size());
    TranslateStats local;
    local.requests = requests.size();

    // first request index per distinct cache key among the misses
    std::map<std::pair<Fingerprint, std::string>, std::size_t> first_miss;
    std::vector<std::size_t> followers_of(requests.size(), requests.size());
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const auto& r = requests[i];
        if (r.text.empty()) continue;
        if (auto hit = cache.lookup(r.fingerprint, r.target_language, backend_name)) {
            out[i] = std::move(*hit);
            ++local.cache_hits;
            continue;
        }
        auto [it, inserted] = first_miss.emplace(std::make_pair(r.fingerprint, r.target_language), i);
        if (inserted) misses.push_back(i);
        else {
            followers_of[i] = it->second;
            ++local.cache_hits;
        }
    }

    // stable grouping by (source, target) so each batch shares one language pair
    std::stable_sort(misses.begin(), misses.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = requests[a];
        const auto& rb = requests[b];
        return std::tie(ra.source_language, ra.target_language) < std::tie(rb.source_language, rb.target_language);
    });
    std::vector<std::pair<std::size_t, std::size_t>> batches;  // [lo, hi) into misses
    const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
    for (std::size_t lo = 0; lo < misses.size();) {
        std::size_t hi = lo + 1;
        const auto& head = requests[misses[lo]];
        while (hi < misses.size() && hi - lo < batch_size &&
               requests[misses[hi]].source_language == head.source_language &&
               requests[misses[hi]].target_language == head.target_language)
            ++hi;
        batches.emplace_back(lo, hi);
        lo = hi;
    }
    local.backend_batches = batches.size();
    local.texts_sent = misses.size();

    run_bounded(batches.size(), options.max_in_flight, [&](std::size_t b) {
        auto [lo, hi] = batches[b];
        const auto& head = requests[misses[lo]];
        std::vector<std::string> texts;
        for (std::size_t j = lo; j < hi; ++j) texts.push_back(requests[misses[j]].text);
        auto translated = with_retry(options.retry, b, [&] {
            auto r = backend.translate(texts, head.source_language, head.target_language);
            if (r.size() != texts.size()) throw BackendUnavailable("translator returned wrong number of texts");
            return r;
        });
        auto now = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
        for (std::size_t j = lo; j < hi; ++j) {
            const auto& req = requests[misses[j]];
            cache.insert({req.fingerprint, req.target_language, backend_name, translated[j - lo], now});
            out[misses[j]] = std::move(translated[j - lo]);
        }
    });
    for (std::size_t i = 0; i < requests.size(); ++i)
        if (followers_of[i] < requests.size()) out[i] = out[followers_of[i]];
    if (stats) *stats = local;
    return out;
}

}  // namespace polydedup
