#pragma once

// End-to-end duplicate detection:
//   canonicalize -> exact groups -> representatives -> [translate] -> embed
//   -> index -> k-NN candidates -> expert rules -> classify -> expand groups.
// Each stage is a separate function so callers can persist and resume between
// stages; run_pipeline chains them.

#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "polydedup/config.hpp"
#include "polydedup/corpus.hpp"
#include "polydedup/csv.hpp"
#include "polydedup/dedup.hpp"
#include "polydedup/embed.hpp"
#include "polydedup/index.hpp"
#include "polydedup/normalize.hpp"
#include "polydedup/translate.hpp"

namespace polydedup {

struct StageTiming {
    std::string stage;
    double millis = 0.0;

    friend bool operator==(const StageTiming&, const StageTiming&) = default;
};

struct LabelCounts {
    std::size_t full = 0;
    std::size_t semantic = 0;
    std::size_t temporal = 0;

    friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

struct RunReport {
    std::string mode;
    std::size_t k = 0;
    double base_theta = 0.0;
    std::vector<StageTiming> timings;

    std::size_t n_postings = 0;
    std::size_t n_unique_texts = 0;
    std::size_t n_embedded = 0;
    std::size_t n_zero_vectors = 0;
    std::uint64_t brute_pairs_postings = 0;
    std::uint64_t brute_pairs_unique = 0;
    std::size_t candidate_pairs = 0;
    std::uint64_t distance_computations = 0;
    std::size_t kept_after_threshold = 0;
    std::size_t kept_after_rules = 0;
    std::size_t exact_pairs = 0;
    LabelCounts labels;

    std::size_t translation_cache_hits = 0;
    std::size_t translation_batches = 0;

    TruncationReport truncation;
    SaturationReport saturation;
    std::vector<SweepRow> sweep;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

class StageTimer {
public:
    StageTimer(RunReport& report, std::string stage)
        : report_(report), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start_;
        report_.timings.push_back({stage_, elapsed.count()});
    }
    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

private:
    RunReport& report_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

// ---- stages -----------------------------------------------------------------

struct NormalizedCorpus {
    std::vector<CanonicalText> canonicals;  // input order
    std::vector<ExactGroup> groups;         // by representative id
};

inline NormalizedCorpus normalize_stage(const std::vector<Posting>& postings, const PipelineConfig& config) {
    NormalizedCorpus n;
    n.canonicals = canonicalize_all(postings, config.normalize, config.threads);
    n.groups = group_exact(n.canonicals);
    return n;
}

inline NormalizedCorpus regroup(std::vector<CanonicalText> canonicals) {
    NormalizedCorpus n;
    n.canonicals = std::move(canonicals);
    n.groups = group_exact(n.canonicals);
    return n;
}

// (representative id, text to embed), in representative order
using RepTexts = std::vector<std::pair<std::string, std::string>>;

inline RepTexts translate_stage(const std::vector<Posting>& postings, const NormalizedCorpus& normalized,
                                const PipelineConfig& config, Translator& translator, TranslationCache& cache,
                                TranslateStats* stats = nullptr) {
    std::unordered_map<std::string, const CanonicalText*> by_id;
    for (const auto& c : normalized.canonicals) by_id.emplace(c.source_id, &c);
    auto lookup = index_postings(postings);
    std::vector<TranslationRequest> requests;
    RepTexts reps;
    for (const auto& g : normalized.groups) {
        const auto& c = *by_id.at(g.representative_id);
        const auto& p = resolve(lookup, g.representative_id);
        std::optional<std::string> source = p.language;
        if (source && *source == kUndeterminedLanguage) source.reset();
        requests.push_back({c.fingerprint, c.text, source, config.translate.target_language});
        reps.emplace_back(g.representative_id, c.text);
    }
    if (config.mode == PipelineMode::Multilingual) return reps;
    TranslateOptions options{config.translate.max_in_flight, config.translate.batch_size, config.translate.retry};
    auto translated = translate_batch(requests, translator, cache, options, stats);
    for (std::size_t i = 0; i < reps.size(); ++i) reps[i].second = std::move(translated[i]);
    return reps;
}

using IdVectors = std::vector<std::pair<std::string, EmbeddingVector>>;

inline IdVectors embed_stage(const RepTexts& reps, Embedder& embedder, const PipelineConfig& config) {
    std::vector<std::string> texts;
    texts.reserve(reps.size());
    for (const auto& r : reps) texts.push_back(r.second);
    EmbedOptions options;
    options.batch_size = config.embed.batch_size;
    options.max_in_flight = config.embed.max_in_flight;
    auto vectors = embed_batch(texts, embedder, options);
    IdVectors out;
    out.reserve(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) out.emplace_back(reps[i].first, std::move(vectors[i]));
    return out;
}

inline IdVectors nonzero(const IdVectors& vectors) {
    IdVectors out;
    for (const auto& v : vectors)
        if (!v.second.is_zero()) out.push_back(v);
    return out;
}

inline VectorIndex index_stage(const IdVectors& nonzero_vectors, const PipelineConfig& config) {
    IndexConfig ic = config.index;
    ic.dim = config.embed.dim;
    return VectorIndex::build(nonzero_vectors, ic);
}

inline std::vector<std::pair<std::string, std::vector<float>>> raw_vectors(const IdVectors& vectors) {
    std::vector<std::pair<std::string, std::vector<float>>> out;
    out.reserve(vectors.size());
    for (const auto& [id, v] : vectors) out.emplace_back(id, v.values);
    return out;
}

// Labels from exact groups (FULL/TEMPORAL) plus rule-accepted candidate pairs
// between representatives expanded to every cross pair of group members.
inline std::vector<LabeledPair> label_stage(const std::vector<Posting>& postings, const NormalizedCorpus& normalized,
                                            const std::vector<CandidatePair>& rep_candidates,
                                            const std::vector<ExpertRule>& rules, RunReport* report = nullptr) {
    auto lookup = index_postings(postings);
    FingerprintLookup fingerprints;
    for (const auto& c : normalized.canonicals) fingerprints.emplace(c.source_id, c.fingerprint);
    std::unordered_map<std::string, const ExactGroup*> group_of;
    for (const auto& g : normalized.groups) group_of.emplace(g.representative_id, &g);

    std::vector<LabeledPair> out;
    std::size_t exact = 0;
    for (const auto& g : normalized.groups)
        for (std::size_t i = 0; i < g.member_ids.size(); ++i)
            for (std::size_t j = i + 1; j < g.member_ids.size(); ++j) {
                const auto& a = g.member_ids[i];
                const auto& b = g.member_ids[j];
                out.push_back({a, b, classify(a, b, lookup, fingerprints, false), std::nullopt,
                               Reason{ReasonKind::ExactFingerprint, 0}});
                ++exact;
            }

    auto kept = apply_rules_detailed(rep_candidates, lookup, rules);
    for (const auto& rp : kept) {
        Reason reason = rules[rp.rule_index].is_catch_all() && rp.rule_index + 1 == rules.size()
                            ? Reason{ReasonKind::SemanticThreshold, 0}
                            : Reason{ReasonKind::Rule, rp.rule_index};
        const auto* ga = group_of.at(rp.pair.id_a);
        const auto* gb = group_of.at(rp.pair.id_b);
        for (const auto& ma : ga->member_ids)
            for (const auto& mb : gb->member_ids) {
                auto cp = make_pair_canonical(ma, mb, rp.pair.distance);
                out.push_back({cp.id_a, cp.id_b, classify(cp.id_a, cp.id_b, lookup, fingerprints, true), cp.distance,
                               reason});
            }
    }
    std::sort(out.begin(), out.end(), [](const LabeledPair& x, const LabeledPair& y) {
        return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
    });
    if (report) {
        report->exact_pairs = exact;
        report->kept_after_rules = kept.size();
        report->labels = {};
        for (const auto& p : out) {
            if (p.label == DuplicateLabel::Full) ++report->labels.full;
            else if (p.label == DuplicateLabel::Semantic) ++report->labels.semantic;
            else if (p.label == DuplicateLabel::Temporal) ++report->labels.temporal;
        }
    }
    return out;
}

// ---- backends from config -----------------------------------------------------

inline std::unique_ptr<Translator> make_translator(const PipelineConfig& config) {
    if (config.mode == PipelineMode::Multilingual) return std::make_unique<IdentityTranslator>();
    TranslatorSpec spec = config.translate.backend;
    if (spec.kind == TranslatorSpec::Kind::Dictionary) spec.dictionary_path = dictionary_path(config);
    return make_backend(spec);
}

inline std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config) {
    if (config.embed.backend == "remote") {
        std::optional<std::string> key;
        if (const char* env = std::getenv(kTranslateApiKeyEnv)) key = env;
        return std::make_unique<RemoteEmbedder>(config.embed.endpoint, config.embed.dim, key);
    }
    return std::make_unique<HashedEmbedder>(config.embed.dim, config.embed.max_tokens);
}

// ---- whole run ------------------------------------------------------------------

// Everything up to candidate generation, kept so that thresholds and rules can
// be re-applied without recomputing embeddings or searches.
struct PreparedRun {
    NormalizedCorpus normalized;
    RepTexts rep_texts;
    IdVectors vectors;  // non-zero representative vectors, index order of insertion
    VectorIndex index;
    CandidateResult candidates;
    RunReport report;
};

inline void finish_candidates(PreparedRun& run, const PipelineConfig& config, std::size_t n_reps) {
    auto& report = run.report;
    report.candidate_pairs = run.candidates.pairs.size();
    report.distance_computations = run.index.comparisons();
    report.sweep = threshold_sweep(run.candidates.pairs, config.dedup.sweep_thetas);
    report.kept_after_threshold = threshold_filter(run.candidates.pairs, config.dedup.base_theta).size();
    std::vector<std::string> ids;
    for (const auto& v : run.vectors) ids.push_back(v.first);
    report.saturation = saturation_report(ids, run.candidates.neighbours, config.dedup.base_theta, config.dedup.k);
    report.n_embedded = run.vectors.size();
    report.n_zero_vectors = n_reps - run.vectors.size();
}

inline void start_report(RunReport& report, const std::vector<Posting>& postings, const NormalizedCorpus& normalized,
                         const PipelineConfig& config) {
    report.mode = std::string(to_string(config.mode));
    report.k = config.dedup.k;
    report.base_theta = config.dedup.base_theta;
    report.n_postings = postings.size();
    report.n_unique_texts = normalized.groups.size();
    report.brute_pairs_postings = static_cast<std::uint64_t>(pair_count(postings.size()));
    report.brute_pairs_unique = static_cast<std::uint64_t>(pair_count(normalized.groups.size()));
}

inline CandidateResult candidate_stage(const VectorIndex& index, const IdVectors& vectors, const PipelineConfig& config) {
    index.reset_comparisons();
    if (vectors.size() < 2) {
        CandidateResult r;
        r.neighbours.resize(vectors.size());
        return r;
    }
    return candidate_pairs_with_hits(index, raw_vectors(vectors), config.dedup.k, config.threads);
}

inline PreparedRun prepare_run(const std::vector<Posting>& postings, const PipelineConfig& config,
                               Translator& translator, Embedder& embedder, TranslationCache& cache) {
    validate(config);
    if (embedder.dim() != config.embed.dim) throw DimensionMismatch(config.embed.dim, embedder.dim());
    PreparedRun run;
    auto& report = run.report;
    {
        StageTimer t(report, "normalize");
        run.normalized = normalize_stage(postings, config);
    }
    start_report(report, postings, run.normalized, config);
    {
        StageTimer t(report, "translate");
        TranslateStats stats;
        run.rep_texts = translate_stage(postings, run.normalized, config, translator, cache, &stats);
        report.translation_cache_hits = stats.cache_hits;
        report.translation_batches = stats.backend_batches;
    }
    {
        StageTimer t(report, "embed");
        std::vector<std::string> texts;
        for (const auto& r : run.rep_texts) texts.push_back(r.second);
        report.truncation = truncation_report(texts, config.embed.max_tokens);
        run.vectors = nonzero(embed_stage(run.rep_texts, embedder, config));
    }
    if (!run.vectors.empty()) {
        StageTimer t(report, "index");
        run.index = index_stage(run.vectors, config);
    }
    {
        StageTimer t(report, "search");
        if (!run.vectors.empty()) run.candidates = candidate_stage(run.index, run.vectors, config);
    }
    finish_candidates(run, config, run.rep_texts.size());
    return run;
}

inline std::vector<LabeledPair> label_run(const std::vector<Posting>& postings, PreparedRun& run,
                                          const std::vector<ExpertRule>& rules) {
    StageTimer t(run.report, "classify");
    return label_stage(postings, run.normalized, run.candidates.pairs, rules, &run.report);
}

inline std::vector<LabeledPair> run_pipeline(const std::vector<Posting>& postings, const PipelineConfig& config,
                                             Translator& translator, Embedder& embedder, TranslationCache& cache,
                                             RunReport* report = nullptr) {
    auto run = prepare_run(postings, config, translator, embedder, cache);
    auto rules = config.dedup.effective_rules();
    validate_rules(rules);
    auto labeled = label_run(postings, run, rules);
    if (report) *report = std::move(run.report);
    return labeled;
}

inline std::vector<LabeledPair> run_pipeline(const std::vector<Posting>& postings, const PipelineConfig& config,
                                             RunReport* report = nullptr) {
    validate(config);
    auto translator = make_translator(config);
    auto embedder = make_embedder(config);
    TranslationCache cache = config.translate.cache_path.empty() ? TranslationCache() : TranslationCache(config.translate.cache_path);
    return run_pipeline(postings, config, *translator, *embedder, cache, report);
}

// ---- results file -----------------------------------------------------------------

inline std::string format_distance(double d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", d);
    return buf;
}

inline void write_results_csv(std::ostream& out, const std::vector<LabeledPair>& pairs) {
    out << "id1,id2,label,distance,reason\n";
    for (const auto& p : pairs)
        out << csv::join({p.id_a, p.id_b, std::string(to_string(p.label)),
                          p.distance ? format_distance(*p.distance) : std::string(), to_string(p.reason)})
            << '\n';
}

inline std::vector<LabeledPair> read_results_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<LabeledPair> out;
    try {
        auto header = reader.next();
        if (!header) return out;
        if (header->fields != std::vector<std::string>{"id1", "id2", "label", "distance", "reason"})
            throw MalformedRecord(header->line, "results header must be id1,id2,label,distance,reason");
        while (auto row = reader.next()) {
            if (row->fields.size() != 5) throw MalformedRecord(row->line, "expected 5 fields");
            auto& f = row->fields;
            auto label = parse_label(f[2]);
            auto reason = parse_reason(f[4]);
            if (!label || !reason) throw MalformedRecord(row->line, "bad label or reason");
            LabeledPair p{f[0], f[1], *label, std::nullopt, *reason};
            if (!f[3].empty()) p.distance = std::stod(f[3]);
            out.push_back(std::move(p));
        }
    } catch (const std::invalid_argument&) {
        throw MalformedRecord(reader.line(), "bad distance");
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const Error*>(&e)) throw;
        throw MalformedRecord(reader.line(), e.what());
    }
    return out;
}

}  // namespace polydedup
