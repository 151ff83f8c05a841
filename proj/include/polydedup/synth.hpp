#pragma once

// Synthetic job-posting corpus with planted duplicates and a complete gold set.
//
// FULL duplicates are case / whitespace / markup perturbations of a base
// posting (equal after cleaning). SEMANTIC duplicates swap a few words for
// synonyms, reorder words and may be rendered in a pseudo-language: a
// word-for-word bijection of the English vocabulary, so the dictionary
// translator recovers the English text exactly. TEMPORAL duplicates are
// either kind with a shifted retrieval date.
//
// Semantic variants are calibrated against the hashed embedder: ordinary ones
// sit well inside `separation_margin`, and with `metadata_signal` a set of
// hard positives (same employer and location) and hard negatives (different
// employer) is planted just outside it, where only metadata-aware rules can
// tell them apart.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "polydedup/corpus.hpp"
#include "polydedup/embed.hpp"
#include "polydedup/error.hpp"
#include "polydedup/eval.hpp"
#include "polydedup/normalize.hpp"
#include "polydedup/tokenize.hpp"

namespace polydedup {

struct SynthPlan {
    std::size_t n_base = 2000;
    double full_rate = 0.15;
    double semantic_rate = 0.15;
    double temporal_rate = 0.10;
    std::vector<std::string> languages{"qaa", "qab", "qac"};  // pseudo-language codes
    double foreign_base_fraction = 0.2;
    double foreign_variant_fraction = 0.6;
    double missing_company_rate = 0.25;
    double missing_location_rate = 0.5;
    std::size_t description_words = 180;

    bool metadata_signal = false;
    double hard_positive_rate = 0.03;
    double hard_negative_rate = 0.06;

    // calibration of semantic variants against the hashed embedder
    std::size_t embed_dim = kDefaultEmbeddingDim;
    std::size_t max_tokens = kDefaultMaxTokens;
    double separation_margin = 0.25;
    double easy_max_distance = 0.22;
    double hard_min_distance = 0.258;
    double hard_max_distance = 0.292;

    std::uint64_t seed = 7;
};

struct SynthCorpus {
    std::vector<Posting> postings;
    GoldSet gold;
    std::map<std::string, std::string> dictionary;  // pseudo word -> English word
    double separation_margin = 0.25;
    std::size_t hard_positives = 0;
    std::size_t hard_negatives = 0;
};

namespace synth_detail {

inline const std::vector<std::string_view>& seniorities() {
    static const std::vector<std::string_view> v{"Junior", "Senior", "Lead",    "Principal", "Assistant",
                                                 "Chief",  "Head",   "Associate", "Trainee", "Staff"};
    return v;
}
inline const std::vector<std::string_view>& domains() {
    static const std::vector<std::string_view> v{"Data",     "Software", "Sales",   "Marketing", "Finance",
                                                 "Production", "Quality", "Logistics", "Network", "Service",
                                                 "Warehouse", "Research", "Security", "Health",  "Retail"};
    return v;
}
inline const std::vector<std::string_view>& roles() {
    static const std::vector<std::string_view> v{"Engineer",   "Manager",   "Analyst",     "Developer", "Consultant",
                                                 "Technician", "Nurse",     "Accountant",  "Designer",  "Administrator",
                                                 "Operator",   "Coordinator", "Specialist", "Planner",  "Advisor"};
    return v;
}

// word -> synonym; synonyms are never themselves keys
inline const std::vector<std::pair<std::string_view, std::string_view>>& synonyms() {
    static const std::vector<std::pair<std::string_view, std::string_view>> v{
        {"experience", "background"},  {"skills", "abilities"},      {"team", "crew"},
        {"company", "firm"},           {"customer", "patron"},       {"develop", "build"},
        {"support", "assist"},         {"knowledge", "expertise"},   {"strong", "solid"},
        {"excellent", "outstanding"},  {"opportunity", "opening"},   {"responsible", "accountable"},
        {"ensure", "guarantee"},       {"manage", "oversee"},        {"create", "produce"},
        {"improve", "enhance"},        {"large", "big"},             {"help", "aid"},
        {"required", "mandatory"},     {"benefits", "perks"},        {"salary", "pay"},
        {"position", "post"},          {"candidate", "applicant"},   {"growth", "expansion"},
        {"environment", "setting"},    {"goals", "targets"},         {"projects", "initiatives"},
        {"tasks", "duties"},           {"ability", "capacity"},      {"dynamic", "energetic"},
        {"flexible", "adaptable"},     {"international", "global"},  {"modern", "contemporary"},
        {"leading", "foremost"},       {"innovative", "inventive"},  {"qualified", "competent"},
        {"motivated", "driven"},       {"reliable", "dependable"},   {"analyze", "examine"},
        {"coordinate", "organize"},    {"maintain", "preserve"},     {"deliver", "supply"},
        {"quickly", "rapidly"},        {"colleagues", "coworkers"},  {"attractive", "appealing"},
        {"independent", "autonomous"}, {"solutions", "answers"},     {"daily", "everyday"},
        {"requirements", "prerequisites"}, {"training", "coaching"},
    };
    return v;
}

inline const std::vector<std::string_view>& general_words() {
    static const std::vector<std::string_view> v{
        "we",         "are",        "looking",    "for",         "a",          "an",          "the",
        "to",         "join",       "our",        "in",          "with",       "and",         "of",
        "you",        "will",       "be",         "work",        "on",         "as",          "your",
        "role",       "include",    "plan",       "report",      "weekly",     "office",      "remote",
        "hybrid",     "contract",   "permanent",  "full",        "time",       "part",        "shift",
        "schedule",   "degree",     "bachelor",   "master",      "diploma",    "english",     "german",
        "french",     "fluent",     "written",    "spoken",      "communication", "budget",   "clients",
        "market",     "product",    "service",    "quality",     "safety",     "standards",   "processes",
        "systems",    "tools",      "software",   "hardware",    "database",   "cloud",       "network",
        "security",   "reporting",  "analysis",   "planning",    "operations", "logistics",   "supply",
        "chain",      "warehouse",  "inventory",  "stock",       "orders",     "delivery",    "transport",
        "vehicle",    "driving",    "licence",    "patients",    "care",       "hospital",    "clinic",
        "medical",    "finance",    "accounting", "tax",         "audit",      "invoices",    "payroll",
        "sales",      "targets",    "revenue",    "marketing",   "campaigns",  "digital",     "media",
        "content",    "design",     "creative",   "research",    "laboratory", "testing",     "production",
        "machines",   "maintenance", "repair",    "installation", "technical", "engineering", "construction",
        "site",       "project",    "documentation", "customers", "partners",  "suppliers",   "stakeholders",
        "management", "leadership", "mentoring",  "hands",       "detail",     "accuracy",    "deadlines",
        "pressure",   "initiative", "creativity", "passion",     "commitment", "years",       "minimum",
        "at",         "least",      "three",      "five",        "two",        "plus",        "bonus",
        "pension",    "holiday",    "days",       "paid",        "leave",      "health",      "insurance",
        "car",        "laptop",     "phone",      "discount",    "canteen",    "gym",         "parking",
        "start",      "date",       "immediately", "apply",      "now",        "send",        "cv",
        "letter",     "online",     "form",       "contact",     "recruiter",  "interview",   "process",
        "diverse",    "inclusive",  "equal",      "opportunities", "employer", "welcome",     "applications",
        "from",       "all",        "backgrounds", "based",      "near",       "city",        "centre",
        "travel",     "occasional", "europe",     "region",      "local",      "national",    "languages",
    };
    return v;
}

inline const std::vector<std::string_view>& company_stems() {
    static const std::vector<std::string_view> v{"Acme",   "Nordwind", "Bluepeak", "Helios", "Kestrel", "Vantor",
                                                 "Orbis",  "Lumen",    "Castor",   "Ferro",  "Quanta",  "Silva",
                                                 "Argent", "Brava",    "Corvid",   "Dalmar", "Elara",   "Fintra",
                                                 "Galen",  "Hadron",   "Ixora",    "Jovian", "Kairo",   "Lindqvist"};
    return v;
}
inline const std::vector<std::string_view>& company_suffixes() {
    static const std::vector<std::string_view> v{"GmbH", "AG", "SA", "BV", "Ltd", "Group", "Solutions",
                                                 "Logistics", "Systems", "Partners", "Industries", "Services"};
    return v;
}
inline const std::vector<std::pair<std::string_view, std::string_view>>& cities() {
    static const std::vector<std::pair<std::string_view, std::string_view>> v{
        {"Berlin", "DE"},  {"Munich", "DE"},   {"Hamburg", "DE"},   {"Frankfurt", "DE"}, {"Paris", "FR"},
        {"Lyon", "FR"},    {"Madrid", "ES"},   {"Barcelona", "ES"}, {"Milan", "IT"},     {"Rome", "IT"},
        {"Amsterdam", "NL"}, {"Rotterdam", "NL"}, {"Brussels", "BE"}, {"Vienna", "AT"},   {"Warsaw", "PL"},
        {"Vilnius", "LT"}, {"Lisbon", "PT"},   {"Dublin", "IE"},    {"Prague", "CZ"},    {"Stockholm", "SE"}};
    return v;
}
inline const std::vector<std::string_view>& sources() {
    static const std::vector<std::string_view> v{"linkedin", "xing", "indeed", "stepstone", "monster"};
    return v;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }
    double unit() { return double(engine_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }
    template <typename T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

// Pseudo word for vocabulary entry `index` in language `lang`: consonant-vowel
// syllables spelling the index, then a language suffix.
inline std::string pseudo_word(std::size_t lang, std::size_t index) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    static const std::vector<std::string_view> suffixes{"ek", "ori", "usk", "anta", "iel", "omb", "ux", "eva"};
    std::string w;
    std::size_t n = index + 14 * 5;  // at least two syllables
    while (n > 0) {
        std::size_t syl = n % 70;
        w.push_back(consonants[syl / 5]);
        w.push_back(vowels[syl % 5]);
        n /= 70;
    }
    w += suffixes[lang % suffixes.size()];
    if (lang >= suffixes.size()) w += std::to_string(lang / suffixes.size());
    return w;
}

struct Peeled {
    std::string prefix, core, suffix;
};

inline Peeled peel(std::string_view w) {
    auto is_p = [](char c) { return c > 0x20 && c < 0x7F && !std::isalnum(static_cast<unsigned char>(c)); };
    std::size_t lo = 0, hi = w.size();
    while (lo < hi && is_p(w[lo])) ++lo;
    while (hi > lo && is_p(w[hi - 1])) --hi;
    return {std::string(w.substr(0, lo)), std::string(w.substr(lo, hi - lo)), std::string(w.substr(hi))};
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

class Generator {
public:
    explicit Generator(const SynthPlan& plan) : plan_(plan), rng_(plan.seed), embedder_(plan.embed_dim, plan.max_tokens) {
        build_vocabulary();
    }

    SynthCorpus run();

private:
    enum class Kind { Base, Full, Semantic, HardNegative };

    struct Draft {
        std::size_t cluster = 0;
        Kind kind = Kind::Base;
        std::string en_title;
        std::string en_description;  // words separated by single spaces
        std::string title;           // as published
        std::string description;
        std::string language = "en";
        std::optional<std::string> company, location, country;
        Date date{};
        std::string source;
    };

    void build_vocabulary() {
        std::vector<std::string> words;
        auto add = [&](std::string_view w) {
            std::string lw = text::ascii_lower(w);
            if (vocab_index_.emplace(lw, words.size()).second) words.push_back(lw);
        };
        for (auto w : seniorities()) add(w);
        for (auto w : domains()) add(w);
        for (auto w : roles()) add(w);
        for (auto w : general_words()) add(w);
        for (auto [k, s] : synonyms()) {
            add(k);
            add(s);
            synonym_of_.emplace(std::string(k), std::string(s));
        }
        for (std::size_t l = 0; l < plan_.languages.size(); ++l) {
            std::unordered_map<std::string, std::string> forward;
            for (std::size_t i = 0; i < words.size(); ++i) {
                auto pw = pseudo_word(l, i);
                if (vocab_index_.count(pw) || dictionary_.count(pw))
                    throw ConfigError("pseudo-language vocabulary collision on '" + pw + "'");
                dictionary_.emplace(pw, words[i]);
                forward.emplace(words[i], pw);
            }
            forward_.emplace(plan_.languages[l], std::move(forward));
        }
        for (auto w : general_words()) general_.emplace_back(w);
        for (auto [k, s] : synonyms()) synonym_keys_.emplace_back(k);
    }

    std::string render(std::string_view english, const std::string& language) const {
        if (language == "en") return std::string(english);
        const auto& fwd = forward_.at(language);
        std::vector<std::string> out;
        for (const auto& w : split_words(english)) {
            auto p = peel(w);
            auto it = fwd.find(text::ascii_lower(p.core));
            out.push_back(p.prefix + (it == fwd.end() ? p.core : it->second) + p.suffix);
        }
        return join_words(out);
    }

    std::string make_description() {
        std::vector<std::string> words;
        std::size_t target = plan_.description_words;
        while (words.size() < target) {
            std::size_t len = 8 + rng_.below(9);
            for (std::size_t i = 0; i < len; ++i) {
                // roughly a third of the words can take a synonym
                std::string w = rng_.chance(0.33) ? rng_.pick(synonym_keys_) : rng_.pick(general_);
                if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
                if (i + 1 == len) w += '.';
                else if (i > 2 && rng_.chance(0.08)) w += ',';
                words.push_back(std::move(w));
            }
        }
        return join_words(words);
    }

    std::string make_company() {
        return std::string(rng_.pick(company_stems_)) + " " + std::string(rng_.pick(company_suffixes_)) + " " +
               std::to_string(1 + rng_.below(400));
    }

    Draft make_base(std::size_t cluster) {
        Draft d;
        d.cluster = cluster;
        d.kind = Kind::Base;
        d.en_title = std::string(rng_.pick(seniorities_)) + " " + std::string(rng_.pick(domains_)) + " " +
                     std::string(rng_.pick(roles_));
        d.en_description = make_description();
        if (!plan_.languages.empty() && rng_.chance(plan_.foreign_base_fraction))
            d.language = rng_.pick(plan_.languages);
        d.title = render(d.en_title, d.language);
        d.description = render(d.en_description, d.language);
        if (!rng_.chance(plan_.missing_company_rate)) d.company = make_company();
        const auto& city = cities()[rng_.below(cities().size())];
        d.country = std::string(city.second);
        if (!rng_.chance(plan_.missing_location_rate)) d.location = std::string(city.first);
        d.date = std::chrono::sys_days{std::chrono::year{2024} / 1 / 1} + std::chrono::days{rng_.below(120)};
        d.source = std::string(rng_.pick(sources_));
        return d;
    }

    // Canonicalization-invariant perturbations of the published text.
    std::string perturb(const std::string& s) {
        auto words = split_words(s);
        switch (rng_.below(3)) {
            case 0:
                for (auto& w : words) w = text::ascii_lower(w);
                break;
            case 1:
                for (auto& w : words)
                    for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                break;
            default:
                for (auto& w : words) {
                    w = text::ascii_lower(w);
                    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
                }
        }
        std::string out = rng_.chance(0.5) ? "<p>" : "  ";
        for (std::size_t i = 0; i < words.size(); ++i) {
            std::string w = words[i];
            if (!w.empty() && (w.back() == '.' || w.back() == ',') && rng_.chance(0.3)) {
                char p = w.back();
                w.pop_back();
                w += rng_.chance(0.5) ? std::string(3, p) : (p == ',' ? "&#44;" : "&#46;");
            }
            out += w;
            if (i + 1 < words.size()) {
                auto r = rng_.below(10);
                out += r == 0 ? "<br>" : r == 1 ? " <br/> " : r == 2 ? "  " : r == 3 ? "\n" : " ";
            }
        }
        out += rng_.chance(0.5) ? "</p>" : " ";
        return out;
    }

    Draft make_full_variant(const Draft& base) {
        Draft d = base;
        d.kind = Kind::Full;
        d.title = perturb(base.title);
        d.description = perturb(base.description);
        copy_scraped_metadata(base, d);
        return d;
    }

    void copy_scraped_metadata(const Draft& base, Draft& d) {
        d.company = rng_.chance(0.85) ? base.company : std::nullopt;
        d.location = rng_.chance(0.7) ? base.location : std::nullopt;
        d.source = std::string(rng_.pick(sources_));
    }

    std::vector<float> measure(const std::string& en_title, const std::string& en_description) const {
        auto t = clean_text(en_title + " " + en_description);
        return hashed_bow_embed(tokenize(t), plan_.embed_dim, plan_.max_tokens).values;
    }

    // Replaces synonym-able words one at a time until the embedding distance to
    // the base lands in [lo, hi]; nullopt if no ordering reaches the band.
    std::optional<std::string> substitute_into_band(const Draft& base, double lo, double hi, std::size_t min_subs,
                                                    std::size_t max_subs) {
        auto reference = measure(base.en_title, base.en_description);
        auto words = split_words(base.en_description);
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < words.size(); ++i)
            if (synonym_of_.count(text::ascii_lower(peel(words[i]).core))) candidates.push_back(i);
        for (int attempt = 0; attempt < 40; ++attempt) {
            rng_.shuffle(candidates);
            auto trial = words;
            for (std::size_t s = 0; s < std::min(max_subs, candidates.size()); ++s) {
                auto& w = trial[candidates[s]];
                auto p = peel(w);
                w = p.prefix + synonym_of_.at(text::ascii_lower(p.core)) + p.suffix;
                auto desc = join_words(trial);
                double d = l2_distance(reference, measure(base.en_title, desc));
                if (d > hi) break;
                if (d >= lo && s + 1 >= min_subs) return desc;
            }
        }
        return std::nullopt;
    }

    // Swaps a few adjacent words; the bag of tokens is unchanged.
    std::string shuffle_words(const std::string& s) {
        auto words = split_words(s);
        for (int i = 0; i < 4 && words.size() > 2; ++i) {
            std::size_t at = 1 + rng_.below(words.size() - 2);
            std::swap(words[at], words[at + 1]);
        }
        return join_words(words);
    }

    std::string pick_other_language(const std::string& current) {
        std::vector<std::string> options{"en"};
        for (const auto& l : plan_.languages) options.push_back(l);
        options.erase(std::remove(options.begin(), options.end(), current), options.end());
        return options.empty() ? current : rng_.pick(options);
    }

    std::optional<Draft> make_semantic_variant(const Draft& base, double lo, double hi, std::size_t min_subs,
                                               std::size_t max_subs) {
        auto desc = substitute_into_band(base, lo, hi, min_subs, max_subs);
        if (!desc) return std::nullopt;
        Draft d = base;
        d.kind = Kind::Semantic;
        d.en_description = shuffle_words(*desc);
        d.language = rng_.chance(plan_.foreign_variant_fraction) ? pick_other_language(base.language) : base.language;
        if (d.language == base.language && d.language == "en" && plan_.languages.empty()) d.language = "en";
        d.title = render(d.en_title, d.language);
        d.description = render(d.en_description, d.language);
        copy_scraped_metadata(base, d);
        return d;
    }

    Date shifted(Date date) {
        auto shift = static_cast<int>(1 + rng_.below(45));
        return std::chrono::sys_days{date} + std::chrono::days{rng_.chance(0.5) ? shift : -shift};
    }

    std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& pool, std::size_t n) {
        auto v = pool;
        rng_.shuffle(v);
        v.resize(std::min(n, v.size()));
        return v;
    }

    const SynthPlan& plan_;
    Rng rng_;
    HashedEmbedder embedder_;
    std::unordered_map<std::string, std::size_t> vocab_index_;
    std::map<std::string, std::string> dictionary_;
    std::unordered_map<std::string, std::unordered_map<std::string, std::string>> forward_;
    std::unordered_map<std::string, std::string> synonym_of_;
    std::vector<std::string> general_, synonym_keys_;
    std::vector<std::string_view> seniorities_{seniorities()}, domains_{domains()}, roles_{roles()},
        company_stems_{company_stems()}, company_suffixes_{company_suffixes()}, sources_{sources()};
};

inline std::size_t planned(double rate, std::size_t n) { return static_cast<std::size_t>(std::llround(rate * double(n))); }

inline SynthCorpus Generator::run() {
    const std::size_t n = plan_.n_base;
    std::vector<Draft> drafts;
    drafts.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) drafts.push_back(make_base(i));

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<bool> has_dup(n, false);
    std::vector<std::vector<std::size_t>> semantic_members(n);  // per cluster: semantic drafts

    auto add_semantic = [&](std::size_t b, bool temporal) {
        // keep every pair of semantic variants inside the margin
        for (int attempt = 0; attempt < 20; ++attempt) {
            std::size_t subs = attempt < 10 ? 1 + rng_.below(6) : 1;
            auto v = make_semantic_variant(drafts[b], 0.0, plan_.easy_max_distance, subs, subs);
            if (!v) continue;
            auto mv = measure(v->en_title, v->en_description);
            bool ok = true;
            for (auto other : semantic_members[b])
                ok = ok && l2_distance(mv, measure(drafts[other].en_title, drafts[other].en_description)) <
                               plan_.separation_margin;
            if (!ok) continue;
            if (temporal) v->date = shifted(v->date);
            semantic_members[b].push_back(drafts.size());
            drafts.push_back(std::move(*v));
            has_dup[b] = true;
            return;
        }
        throw ConfigError("could not place a semantic variant inside the separation margin");
    };

    for (auto b : sample_without_replacement(all, planned(plan_.full_rate, n))) {
        drafts.push_back(make_full_variant(drafts[b]));
        has_dup[b] = true;
    }
    for (auto b : sample_without_replacement(all, planned(plan_.semantic_rate, n))) add_semantic(b, false);
    for (auto b : sample_without_replacement(all, planned(plan_.temporal_rate, n))) {
        if (rng_.chance(0.5)) {
            auto v = make_full_variant(drafts[b]);
            v.date = shifted(v.date);
            drafts.push_back(std::move(v));
            has_dup[b] = true;
        } else {
            add_semantic(b, true);
        }
    }

    SynthCorpus corpus;
    corpus.separation_margin = plan_.separation_margin;
    if (plan_.metadata_signal) {
        std::vector<std::size_t> free;
        for (std::size_t b = 0; b < n; ++b)
            if (!has_dup[b]) free.push_back(b);
        rng_.shuffle(free);
        auto n_pos = planned(plan_.hard_positive_rate, n);
        auto n_neg = planned(plan_.hard_negative_rate, n);
        if (n_pos + n_neg > free.size()) throw ConfigError("not enough undisturbed bases for hard cases");
        std::size_t next_cluster = n;
        for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
            auto b = free[i];
            auto& base = drafts[b];
            bool positive = i < n_pos;
            if (positive) {
                if (!base.company) base.company = make_company();
                if (!base.location) base.location = std::string(cities()[rng_.below(cities().size())].first);
            }
            std::optional<Draft> v;
            for (int attempt = 0; attempt < 10 && !v; ++attempt)
                v = make_semantic_variant(base, plan_.hard_min_distance, plan_.hard_max_distance, 1, 64);
            if (!v) throw ConfigError("could not place a hard case in the calibration band");
            v->company = base.company;
            v->location = base.location;
            if (positive) {
                has_dup[b] = true;
                ++corpus.hard_positives;
            } else {
                std::string other;
                do other = make_company();
                while (base.company && other == *base.company);
                v->company = other;
                v->kind = Kind::HardNegative;
                v->cluster = next_cluster++;
                ++corpus.hard_negatives;
            }
            drafts.push_back(std::move(*v));
        }
    }

    // publish in shuffled order with sequential ids
    std::vector<std::size_t> order(drafts.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    std::vector<std::string> id_of(drafts.size());
    const auto width = std::to_string(drafts.size()).size() + 1;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        std::string num = std::to_string(pos + 1);
        id_of[order[pos]] = "p" + std::string(width - num.size(), '0') + num;
    }
    for (auto i : order) {
        const auto& d = drafts[i];
        Posting p;
        p.id = id_of[i];
        p.title = d.title;
        p.description = d.description;
        p.company = d.company;
        p.location = d.location;
        p.country = d.country;
        p.language = d.language;
        p.retrieval_date = d.date;
        p.source = d.source;
        corpus.postings.push_back(std::move(p));
    }

    // gold: every pair inside a duplicate cluster
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < drafts.size(); ++i) clusters[drafts[i].cluster].push_back(i);
    std::vector<Fingerprint> fps(drafts.size());
    for (std::size_t i = 0; i < drafts.size(); ++i)
        fps[i] = fingerprint_of(clean_text(drafts[i].title + " " + drafts[i].description));
    for (const auto& [c, members] : clusters) {
        for (std::size_t x = 0; x < members.size(); ++x)
            for (std::size_t y = x + 1; y < members.size(); ++y) {
                const auto& a = drafts[members[x]];
                const auto& b = drafts[members[y]];
                bool exact = a.kind != Kind::Semantic && b.kind != Kind::Semantic;
                if (exact != (fps[members[x]] == fps[members[y]]))
                    throw ConfigError("generator invariant violated: full-duplicate perturbation changed the text");
                bool same_date = a.date == b.date;
                auto label = !same_date ? DuplicateLabel::Temporal
                                        : exact ? DuplicateLabel::Full : DuplicateLabel::Semantic;
                corpus.gold.add(id_of[members[x]], id_of[members[y]], label);
            }
    }
    corpus.dictionary = dictionary_;
    return corpus;
}

}  // namespace synth_detail

inline SynthCorpus synth_corpus(const SynthPlan& plan) {
    for (double r : {plan.full_rate, plan.semantic_rate, plan.temporal_rate})
        if (!(r >= 0.0)) throw ConfigError("duplicate rates must be >= 0");
    if (plan.full_rate + plan.semantic_rate + plan.temporal_rate > 1.0 + 1e-12)
        throw ConfigError("duplicate rates must sum to at most 1");
    for (const auto& l : plan.languages)
        if (!is_valid_language_code(l) || l == "en") throw ConfigError("invalid pseudo-language code '" + l + "'");
    if (plan.description_words < 20) throw ConfigError("description_words must be >= 20");
    synth_detail::Generator gen(plan);
    return gen.run();
}

inline void write_dictionary_json(std::ostream& out, const std::map<std::string, std::string>& dictionary) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : dictionary) j[k] = v;
    out << j.dump(1) << '\n';
}

}  // namespace polydedup
