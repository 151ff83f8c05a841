#pragma once

// Candidate-pair generation, L2 thresholding, the expert-rule engine,
// duplicate classification and the neighbour-saturation diagnostic.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polydedup/corpus.hpp"
#include "polydedup/error.hpp"
#include "polydedup/hash.hpp"
#include "polydedup/index.hpp"

namespace polydedup {

inline constexpr std::size_t kDefaultK = 100;
inline constexpr double kDefaultTheta = 0.25;

// Unordered pair in canonical form: id_a < id_b.
struct CandidatePair {
    std::string id_a;
    std::string id_b;
    double distance = 0.0;

    friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

inline CandidatePair make_pair_canonical(std::string a, std::string b, double distance) {
    if (b < a) std::swap(a, b);
    return {std::move(a), std::move(b), distance};
}

inline bool pair_key_less(const CandidatePair& x, const CandidatePair& y) {
    return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
}

struct CandidateResult {
    std::vector<CandidatePair> pairs;               // sorted by (id_a, id_b)
    std::vector<std::vector<SearchHit>> neighbours;  // per query, self excluded
};

// For each vector, its k nearest other vectors; every hit becomes an unordered
// pair and the union is deduplicated. `vectors` must be the indexed rows.
inline CandidateResult candidate_pairs_with_hits(const VectorIndex& index,
                                                 const std::vector<std::pair<std::string, std::vector<float>>>& vectors,
                                                 std::size_t k = kDefaultK, std::size_t threads = 0) {
    if (k == 0) throw ConfigError("k must be >= 1");
    CandidateResult result;
    result.neighbours.resize(vectors.size());
    parallel_for(vectors.size(), threads, [&](std::size_t i) {
        auto hits = index.search(vectors[i].second, k + 1);
        std::vector<SearchHit> kept;
        kept.reserve(k);
        for (auto& h : hits) {
            if (h.id == vectors[i].first) continue;
            if (kept.size() == k) break;
            kept.push_back(std::move(h));
        }
        result.neighbours[i] = std::move(kept);
    });
    for (std::size_t i = 0; i < vectors.size(); ++i)
        for (const auto& h : result.neighbours[i])
            result.pairs.push_back(make_pair_canonical(vectors[i].first, h.id, h.distance));
    std::sort(result.pairs.begin(), result.pairs.end(), pair_key_less);
    result.pairs.erase(std::unique(result.pairs.begin(), result.pairs.end(),
                                   [](const CandidatePair& x, const CandidatePair& y) {
                                       return x.id_a == y.id_a && x.id_b == y.id_b;
                                   }),
                       result.pairs.end());
    return result;
}

inline std::vector<CandidatePair> candidate_pairs(const VectorIndex& index,
                                                  const std::vector<std::pair<std::string, std::vector<float>>>& vectors,
                                                  std::size_t k = kDefaultK, std::size_t threads = 0) {
    return candidate_pairs_with_hits(index, vectors, k, threads).pairs;
}

// Keeps pairs with distance strictly below theta.
inline std::vector<CandidatePair> threshold_filter(const std::vector<CandidatePair>& pairs, double theta) {
    if (theta < 0) throw ConfigError("theta must be >= 0");
    std::vector<CandidatePair> out;
    for (const auto& p : pairs)
        if (p.distance < theta) out.push_back(p);
    return out;
}

struct SweepRow {
    double theta = 0.0;
    std::size_t kept_count = 0;
    double kept_fraction = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

inline std::vector<double> default_sweep_thetas() {
    return {0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
}

inline std::vector<SweepRow> threshold_sweep(const std::vector<CandidatePair>& pairs,
                                             const std::vector<double>& thetas) {
    if (!std::is_sorted(thetas.begin(), thetas.end())) throw ConfigError("sweep thresholds must be ascending");
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& p : pairs) d.push_back(p.distance);
    std::sort(d.begin(), d.end());
    std::vector<SweepRow> rows;
    for (double t : thetas) {
        auto kept = static_cast<std::size_t>(std::lower_bound(d.begin(), d.end(), t) - d.begin());
        rows.push_back({t, kept, d.empty() ? 0.0 : double(kept) / double(d.size())});
    }
    return rows;
}

// ---- expert rules -----------------------------------------------------------

enum class AttrMatch : std::uint8_t { Any, Same, Different, AnyMissing };

inline std::optional<AttrMatch> parse_attr_match(std::string_view s) {
    if (s == "any") return AttrMatch::Any;
    if (s == "same") return AttrMatch::Same;
    if (s == "different") return AttrMatch::Different;
    if (s == "any_missing") return AttrMatch::AnyMissing;
    return std::nullopt;
}

inline std::string_view to_string(AttrMatch m) {
    switch (m) {
        case AttrMatch::Any: return "any";
        case AttrMatch::Same: return "same";
        case AttrMatch::Different: return "different";
        case AttrMatch::AnyMissing: return "any_missing";
    }
    return "any";
}

// `same` and `different` only match when both sides carry the attribute.
inline bool attr_matches(AttrMatch m, const std::optional<std::string>& a, const std::optional<std::string>& b) {
    switch (m) {
        case AttrMatch::Any: return true;
        case AttrMatch::AnyMissing: return !a || !b;
        case AttrMatch::Same: return a && b && *a == *b;
        case AttrMatch::Different: return a && b && *a != *b;
    }
    return false;
}

struct ExpertRule {
    AttrMatch company = AttrMatch::Any;
    AttrMatch language = AttrMatch::Any;
    AttrMatch location = AttrMatch::Any;
    bool reject = false;
    double threshold = kDefaultTheta;  // used when !reject; in (0, 2]

    bool is_catch_all() const {
        return company == AttrMatch::Any && language == AttrMatch::Any && location == AttrMatch::Any;
    }
    bool matches(const Posting& a, const Posting& b) const {
        return attr_matches(company, a.company, b.company) && attr_matches(language, a.language, b.language) &&
               attr_matches(location, a.location, b.location);
    }

    friend bool operator==(const ExpertRule&, const ExpertRule&) = default;
};

inline ExpertRule default_rule(double base_theta) { return ExpertRule{.threshold = base_theta}; }

inline void validate_rules(const std::vector<ExpertRule>& rules) {
    for (const auto& r : rules) {
        if (r.language == AttrMatch::AnyMissing) throw ConfigError("language rule accepts same|different|any");
        if (!r.reject && !(r.threshold > 0.0 && r.threshold <= 2.0))
            throw ConfigError("rule threshold must lie in (0, 2]");
    }
    if (rules.empty() || !rules.back().is_catch_all())
        throw ConfigError("ruleset must end with a catch-all default rule");
}

// Example ruleset shipped as the engine default: looser thresholds when the
// postings agree on employer metadata, base threshold otherwise.
inline std::vector<ExpertRule> example_ruleset(double base_theta = kDefaultTheta) {
    return {
        ExpertRule{.company = AttrMatch::Same, .location = AttrMatch::Same, .threshold = 0.30},
        ExpertRule{.company = AttrMatch::Same, .language = AttrMatch::Different, .threshold = 0.28},
        ExpertRule{.company = AttrMatch::AnyMissing, .location = AttrMatch::AnyMissing, .threshold = base_theta},
        default_rule(base_theta),
    };
}

using PostingLookup = std::unordered_map<std::string, const Posting*>;

inline PostingLookup index_postings(const std::vector<Posting>& postings) {
    PostingLookup lookup;
    lookup.reserve(postings.size());
    for (const auto& p : postings) lookup.emplace(p.id, &p);
    return lookup;
}

inline const Posting& resolve(const PostingLookup& postings, const std::string& id) {
    auto it = postings.find(id);
    if (it == postings.end()) throw UnknownId(id);
    return *it->second;
}

struct RuledPair {
    CandidatePair pair;
    std::size_t rule_index = 0;
};

// First matching rule decides: keep iff distance < its threshold, drop on reject.
inline std::vector<RuledPair> apply_rules_detailed(const std::vector<CandidatePair>& pairs,
                                                   const PostingLookup& postings,
                                                   const std::vector<ExpertRule>& rules) {
    std::vector<RuledPair> kept;
    for (const auto& p : pairs) {
        const auto& a = resolve(postings, p.id_a);
        const auto& b = resolve(postings, p.id_b);
        auto it = std::find_if(rules.begin(), rules.end(), [&](const ExpertRule& r) { return r.matches(a, b); });
        if (it == rules.end()) throw NoMatchingRule(p.id_a, p.id_b);
        if (!it->reject && p.distance < it->threshold)
            kept.push_back({p, static_cast<std::size_t>(it - rules.begin())});
    }
    return kept;
}

inline std::vector<CandidatePair> apply_rules(const std::vector<CandidatePair>& pairs, const PostingLookup& postings,
                                              const std::vector<ExpertRule>& rules) {
    std::vector<CandidatePair> out;
    for (auto& r : apply_rules_detailed(pairs, postings, rules)) out.push_back(std::move(r.pair));
    return out;
}

// ---- classification ---------------------------------------------------------

enum class DuplicateLabel : std::uint8_t { Full, Semantic, Temporal, None };

inline std::string_view to_string(DuplicateLabel l) {
    switch (l) {
        case DuplicateLabel::Full: return "FULL";
        case DuplicateLabel::Semantic: return "SEMANTIC";
        case DuplicateLabel::Temporal: return "TEMPORAL";
        case DuplicateLabel::None: return "NONE";
    }
    return "NONE";
}

inline std::optional<DuplicateLabel> parse_label(std::string_view s) {
    if (s == "FULL") return DuplicateLabel::Full;
    if (s == "SEMANTIC") return DuplicateLabel::Semantic;
    if (s == "TEMPORAL") return DuplicateLabel::Temporal;
    if (s == "NONE") return DuplicateLabel::None;
    return std::nullopt;
}

using FingerprintLookup = std::unordered_map<std::string, Fingerprint>;

// Equal fingerprints -> FULL, else semantic_pass -> SEMANTIC, else NONE; a
// duplicate whose retrieval dates differ is TEMPORAL instead.
inline DuplicateLabel classify(const std::string& id_a, const std::string& id_b, const PostingLookup& postings,
                               const FingerprintLookup& fingerprints, bool semantic_pass) {
    const auto& a = resolve(postings, id_a);
    const auto& b = resolve(postings, id_b);
    auto fa = fingerprints.find(id_a);
    auto fb = fingerprints.find(id_b);
    if (fa == fingerprints.end()) throw UnknownId(id_a);
    if (fb == fingerprints.end()) throw UnknownId(id_b);
    const bool same_date = a.retrieval_date == b.retrieval_date;
    if (fa->second == fb->second) return same_date ? DuplicateLabel::Full : DuplicateLabel::Temporal;
    if (semantic_pass) return same_date ? DuplicateLabel::Semantic : DuplicateLabel::Temporal;
    return DuplicateLabel::None;
}

enum class ReasonKind : std::uint8_t { ExactFingerprint, SemanticThreshold, Rule };

struct Reason {
    ReasonKind kind = ReasonKind::ExactFingerprint;
    std::size_t rule_index = 0;

    friend bool operator==(const Reason&, const Reason&) = default;
};

inline std::string to_string(const Reason& r) {
    switch (r.kind) {
        case ReasonKind::ExactFingerprint: return "exact_fingerprint";
        case ReasonKind::SemanticThreshold: return "semantic_threshold";
        case ReasonKind::Rule: return "rule(" + std::to_string(r.rule_index) + ")";
    }
    return "";
}

inline std::optional<Reason> parse_reason(std::string_view s) {
    if (s == "exact_fingerprint") return Reason{ReasonKind::ExactFingerprint, 0};
    if (s == "semantic_threshold") return Reason{ReasonKind::SemanticThreshold, 0};
    if (s.size() > 6 && s.substr(0, 5) == "rule(" && s.back() == ')') {
        std::size_t idx = 0;
        auto digits = s.substr(5, s.size() - 6);
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec == std::errc{} && p == digits.data() + digits.size()) return Reason{ReasonKind::Rule, idx};
    }
    return std::nullopt;
}

struct LabeledPair {
    std::string id_a;
    std::string id_b;
    DuplicateLabel label = DuplicateLabel::None;
    std::optional<double> distance;
    Reason reason;

    friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

// ---- saturation -------------------------------------------------------------

struct SaturationReport {
    std::vector<std::string> saturated_ids;  // sorted
    std::size_t count = 0;

    friend bool operator==(const SaturationReport&, const SaturationReport&) = default;
};

// A query is saturated when it has exactly k neighbours and even the k-th lies
// below theta: the k cap may have cut off further matches.
inline SaturationReport saturation_report(const std::vector<std::string>& query_ids,
                                          const std::vector<std::vector<SearchHit>>& hits, double theta,
                                          std::size_t k) {
    SaturationReport r;
    for (std::size_t i = 0; i < query_ids.size() && i < hits.size(); ++i)
        if (k > 0 && hits[i].size() == k && hits[i].back().distance < theta) r.saturated_ids.push_back(query_ids[i]);
    std::sort(r.saturated_ids.begin(), r.saturated_ids.end());
    r.count = r.saturated_ids.size();
    return r;
}

}  // namespace polydedup
