#pragma once

// Pipeline configuration: defaults, JSON loading (comments allowed) and the
// paper-strict preset.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polydedup/corpus.hpp"
#include "polydedup/dedup.hpp"
#include "polydedup/embed.hpp"
#include "polydedup/index.hpp"
#include "polydedup/normalize.hpp"
#include "polydedup/translate.hpp"

namespace polydedup {

enum class PipelineMode { TwoStep, Multilingual };

inline std::string_view to_string(PipelineMode m) { return m == PipelineMode::TwoStep ? "two_step" : "multilingual"; }

inline PipelineMode parse_mode(std::string_view s) {
    if (s == "two_step") return PipelineMode::TwoStep;
    if (s == "multilingual") return PipelineMode::Multilingual;
    throw ConfigError("mode must be two_step or multilingual, got '" + std::string(s) + "'");
}

struct TranslateConfig {
    TranslatorSpec backend{TranslatorSpec::Kind::Dictionary, "", ""};
    std::size_t max_in_flight = 4;
    std::size_t batch_size = 32;
    std::string cache_path;  // empty: in-memory only
    std::string target_language = "en";
    RetryPolicy retry{};
};

struct EmbedConfig {
    std::string backend = "hashed";  // hashed | remote
    std::string endpoint;
    std::size_t dim = kDefaultEmbeddingDim;
    std::size_t max_tokens = kDefaultMaxTokens;
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 1;
};

struct DedupConfig {
    std::size_t k = kDefaultK;
    double base_theta = kDefaultTheta;
    std::vector<ExpertRule> ruleset;  // empty: threshold only
    std::vector<double> sweep_thetas = default_sweep_thetas();

    std::vector<ExpertRule> effective_rules() const {
        return ruleset.empty() ? std::vector<ExpertRule>{default_rule(base_theta)} : ruleset;
    }
};

struct IoConfig {
    std::string input;
    CorpusFormat format = CorpusFormat::Jsonl;
    std::string output_dir = "out";
};

struct PipelineConfig {
    PipelineMode mode = PipelineMode::TwoStep;
    NormalizeConfig normalize;
    TranslateConfig translate;
    EmbedConfig embed;
    IndexConfig index;
    DedupConfig dedup;
    IoConfig io;
    std::size_t threads = 0;
    std::uint64_t seed = 42;
};

// ascii-only cleaning, k = 100, theta = 0.25, 384-token limit
inline void apply_paper_strict(PipelineConfig& c) {
    c.normalize.ascii_only = true;
    c.dedup.k = 100;
    c.dedup.base_theta = 0.25;
    c.embed.max_tokens = 384;
}

inline std::string dictionary_path(const PipelineConfig& c) {
    if (!c.translate.backend.dictionary_path.empty()) return c.translate.backend.dictionary_path;
    return c.io.output_dir + "/dictionary.json";
}

inline void validate(const PipelineConfig& c) {
    if (c.mode == PipelineMode::TwoStep && c.translate.backend.kind == TranslatorSpec::Kind::Identity)
        throw ConfigError("two_step mode requires a dictionary or remote translator");
    if (c.dedup.k == 0) throw ConfigError("k must be >= 1");
    if (c.dedup.base_theta < 0) throw ConfigError("theta must be >= 0");
    if (c.embed.dim < 2) throw ConfigError("embedding dimension must be >= 2");
    if (c.embed.max_tokens == 0) throw ConfigError("max_tokens must be >= 1");
    if (c.translate.max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
    if (c.normalize.keep_punct.empty()) throw ConfigError("keep_punct must not be empty");
    if (c.embed.backend != "hashed" && c.embed.backend != "remote")
        throw ConfigError("embed backend must be hashed or remote");
    if (c.index.kind == IndexKind::IVF && (c.index.nprobe == 0 || c.index.nprobe > c.index.nlist))
        throw ConfigError("nprobe must be in [1, nlist]");
    if (!c.dedup.ruleset.empty()) validate_rules(c.dedup.ruleset);
    if (!is_valid_language_code(c.translate.target_language)) throw InvalidLanguage(c.translate.target_language);
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

inline ExpertRule parse_rule(const json& j, double base_theta) {
    if (!j.is_object()) throw ConfigError("ruleset entries must be objects");
    reject_unknown(j, {"company", "language", "location", "action", "threshold"}, "rule");
    ExpertRule r;
    auto attr = [&](const char* key, AttrMatch& out) {
        if (!j.contains(key)) return;
        auto m = parse_attr_match(j.at(key).get<std::string>());
        if (!m) throw ConfigError(std::string("bad match value for '") + key + "'");
        out = *m;
    };
    attr("company", r.company);
    attr("language", r.language);
    attr("location", r.location);
    std::string action = j.value("action", std::string("threshold"));
    if (action == "reject") {
        r.reject = true;
    } else if (action == "threshold") {
        r.threshold = j.contains("threshold") ? j.at("threshold").get<double>() : base_theta;
    } else {
        throw ConfigError("rule action must be threshold or reject");
    }
    return r;
}

}  // namespace detail

namespace detail {

inline void merge_config_unchecked(PipelineConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    detail::reject_unknown(j, {"mode", "normalize", "translate", "embed", "index", "dedup", "io", "threads", "seed",
                               "paper_strict"},
                           "config");
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    read(j, "threads", c.threads);
    read(j, "seed", c.seed);
    if (j.value("paper_strict", false)) apply_paper_strict(c);
    if (j.contains("normalize")) {
        const auto& n = j.at("normalize");
        detail::reject_unknown(n, {"ascii_only", "keep_punct"}, "normalize");
        read(n, "ascii_only", c.normalize.ascii_only);
        if (n.contains("keep_punct")) {
            c.normalize.keep_punct.clear();
            text::for_each_code_point(n.at("keep_punct").get<std::string>(),
                                      [&](text::CodePoint cp, std::string_view) { c.normalize.keep_punct.insert(cp); });
        }
    }
    if (j.contains("translate")) {
        const auto& t = j.at("translate");
        detail::reject_unknown(t, {"backend", "dictionary", "endpoint", "max_in_flight", "batch_size", "cache_path",
                                   "target", "retry_attempts", "retry_base_ms"},
                               "translate");
        if (t.contains("backend")) {
            auto kind = t.at("backend").get<std::string>();
            if (kind == "identity") c.translate.backend.kind = TranslatorSpec::Kind::Identity;
            else if (kind == "dictionary") c.translate.backend.kind = TranslatorSpec::Kind::Dictionary;
            else if (kind == "remote") c.translate.backend.kind = TranslatorSpec::Kind::Remote;
            else throw ConfigError("translate backend must be identity, dictionary or remote");
        }
        read(t, "dictionary", c.translate.backend.dictionary_path);
        read(t, "endpoint", c.translate.backend.endpoint);
        read(t, "max_in_flight", c.translate.max_in_flight);
        read(t, "batch_size", c.translate.batch_size);
        read(t, "cache_path", c.translate.cache_path);
        read(t, "target", c.translate.target_language);
        read(t, "retry_attempts", c.translate.retry.max_attempts);
        if (t.contains("retry_base_ms"))
            c.translate.retry.base_delay = std::chrono::milliseconds(t.at("retry_base_ms").get<long>());
    }
    if (j.contains("embed")) {
        const auto& e = j.at("embed");
        detail::reject_unknown(e, {"backend", "endpoint", "dim", "max_tokens", "batch_size", "max_in_flight"}, "embed");
        read(e, "backend", c.embed.backend);
        read(e, "endpoint", c.embed.endpoint);
        read(e, "dim", c.embed.dim);
        read(e, "max_tokens", c.embed.max_tokens);
        read(e, "batch_size", c.embed.batch_size);
        read(e, "max_in_flight", c.embed.max_in_flight);
    }
    if (j.contains("index")) {
        const auto& x = j.at("index");
        detail::reject_unknown(x, {"kind", "nlist", "nprobe", "kmeans_iters", "seed"}, "index");
        if (x.contains("kind")) {
            auto kind = x.at("kind").get<std::string>();
            if (kind == "flat" || kind == "Flat") c.index.kind = IndexKind::Flat;
            else if (kind == "ivf" || kind == "IVF") c.index.kind = IndexKind::IVF;
            else throw ConfigError("index kind must be flat or ivf");
        }
        read(x, "nlist", c.index.nlist);
        read(x, "nprobe", c.index.nprobe);
        read(x, "kmeans_iters", c.index.kmeans_iters);
        read(x, "seed", c.index.seed);
    }
    if (j.contains("dedup")) {
        const auto& d = j.at("dedup");
        detail::reject_unknown(d, {"k", "theta", "ruleset", "sweep"}, "dedup");
        read(d, "k", c.dedup.k);
        read(d, "theta", c.dedup.base_theta);
        read(d, "sweep", c.dedup.sweep_thetas);
        if (d.contains("ruleset")) {
            const auto& rs = d.at("ruleset");
            c.dedup.ruleset.clear();
            if (rs.is_string()) {
                auto name = rs.get<std::string>();
                if (name == "example") c.dedup.ruleset = example_ruleset(c.dedup.base_theta);
                else if (name != "none") throw ConfigError("ruleset must be a list, \"example\" or \"none\"");
            } else if (rs.is_array()) {
                for (const auto& r : rs) c.dedup.ruleset.push_back(detail::parse_rule(r, c.dedup.base_theta));
            } else {
                throw ConfigError("ruleset must be a list, \"example\" or \"none\"");
            }
        }
    }
    if (j.contains("io")) {
        const auto& io = j.at("io");
        detail::reject_unknown(io, {"input", "format", "output_dir"}, "io");
        read(io, "input", c.io.input);
        read(io, "output_dir", c.io.output_dir);
        if (io.contains("format")) {
            auto f = parse_corpus_format(io.at("format").get<std::string>());
            if (!f) throw ConfigError("io.format must be jsonl or csv");
            c.io.format = *f;
        }
    }
}

}  // namespace detail

// Overlays the keys present in `j` onto `c`. Unknown keys and wrongly typed
// values are ConfigError.
inline void merge_config(PipelineConfig& c, const nlohmann::json& j) {
    try {
        detail::merge_config_unchecked(c, j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad configuration value: ") + e.what());
    }
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    PipelineConfig c;
    merge_config(c, j);
    return c;
}

}  // namespace polydedup
