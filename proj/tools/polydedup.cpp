// polydedup: batch duplicate detection over a posting corpus.
//
// Every stage reads its inputs from and writes its outputs to the output
// directory, so stages can be run one at a time or all at once via `dedup`.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "polydedup/config.hpp"
#include "polydedup/corpus.hpp"
#include "polydedup/eval.hpp"
#include "polydedup/pipeline.hpp"
#include "polydedup/report.hpp"
#include "polydedup/synth.hpp"

namespace fs = std::filesystem;
using namespace polydedup;

namespace {

constexpr const char* kPostings = "postings.jsonl";
constexpr const char* kCorpusStats = "corpus_stats.json";
constexpr const char* kCanonical = "canonical.jsonl";
constexpr const char* kTranslated = "translated.jsonl";
constexpr const char* kEmbeddings = "embeddings.pdix";
constexpr const char* kIndex = "index.pdix";
constexpr const char* kResults = "results.csv";
constexpr const char* kRunReport = "run_report.json";
constexpr const char* kEvalReport = "eval_report.json";
constexpr const char* kGold = "gold.csv";
constexpr const char* kDictionary = "dictionary.json";

struct GlobalFlags {
    std::string config_path;
    std::optional<std::string> mode;
    std::optional<std::size_t> k;
    std::optional<double> theta;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    bool paper_strict = false;
    std::optional<std::string> out;
};

PipelineConfig resolve_config(const GlobalFlags& f) {
    PipelineConfig c = f.config_path.empty() ? PipelineConfig{} : load_config(f.config_path);
    if (f.paper_strict) apply_paper_strict(c);
    if (f.mode) c.mode = parse_mode(*f.mode);
    if (f.k) c.dedup.k = *f.k;
    if (f.theta) {
        // a named example ruleset follows the base threshold
        bool example = c.dedup.ruleset == example_ruleset(c.dedup.base_theta);
        c.dedup.base_theta = *f.theta;
        if (example) c.dedup.ruleset = example_ruleset(*f.theta);
    }
    if (f.threads) c.threads = *f.threads;
    if (f.seed) {
        c.seed = *f.seed;
        c.index.seed = *f.seed;
    }
    if (f.out) c.io.output_dir = *f.out;
    validate(c);
    return c;
}

std::string artifact(const PipelineConfig& c, const char* name) { return (fs::path(c.io.output_dir) / name).string(); }

void ensure_out_dir(const PipelineConfig& c) {
    std::error_code ec;
    fs::create_directories(c.io.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + c.io.output_dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

std::ifstream open_in(const std::string& path, const char* produced_by) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing " + path + " (run `" + produced_by + "` first)");
    return in;
}

void log(const std::string& msg) { std::cerr << "polydedup: " << msg << '\n'; }

std::vector<Posting> load_ingested(const PipelineConfig& c) {
    auto in = open_in(artifact(c, kPostings), "ingest");
    return parse_postings_jsonl(in);
}

template <typename Fn>
void for_each_jsonl(const std::string& path, const char* produced_by, Fn fn) {
    auto in = open_in(path, produced_by);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            fn(nlohmann::json::parse(line), line_no);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_no, path + ": " + e.what());
        }
    }
}

// ---- artifacts ---------------------------------------------------------------

void write_canonical(const std::string& path, const NormalizedCorpus& n) {
    auto out = open_out(path);
    for (const auto& c : n.canonicals) {
        nlohmann::ordered_json j;
        j["id"] = c.source_id;
        j["fingerprint"] = c.fingerprint.hex();
        j["text"] = c.text;
        out << j.dump() << '\n';
    }
}

NormalizedCorpus read_canonical(const std::string& path) {
    std::vector<CanonicalText> canonicals;
    for_each_jsonl(path, "normalize", [&](const nlohmann::json& j, std::size_t line) {
        auto fp = Fingerprint::from_hex(j.at("fingerprint").get<std::string>());
        if (!fp) throw MalformedRecord(line, "bad fingerprint");
        canonicals.push_back({j.at("text").get<std::string>(), *fp, j.at("id").get<std::string>()});
    });
    return regroup(std::move(canonicals));
}

void write_translated(const std::string& path, const RepTexts& reps) {
    auto out = open_out(path);
    for (const auto& [id, text] : reps) {
        nlohmann::ordered_json j;
        j["id"] = id;
        j["text"] = text;
        out << j.dump() << '\n';
    }
}

RepTexts read_translated(const std::string& path) {
    RepTexts reps;
    for_each_jsonl(path, "translate", [&](const nlohmann::json& j, std::size_t) {
        reps.emplace_back(j.at("id").get<std::string>(), j.at("text").get<std::string>());
    });
    return reps;
}

// Non-zero representative vectors stored as a flat index file.
void write_embeddings(const std::string& path, const IdVectors& vectors, std::size_t dim) {
    std::vector<std::string> ids;
    std::vector<float> data;
    for (const auto& [id, v] : vectors) {
        ids.push_back(id);
        data.insert(data.end(), v.values.begin(), v.values.end());
    }
    if (ids.empty()) {
        open_out(path);  // empty file: nothing to index
        return;
    }
    IndexConfig flat;
    flat.kind = IndexKind::Flat;
    flat.dim = dim;
    VectorIndex::build(std::move(ids), std::move(data), flat).save(path);
}

IdVectors read_embeddings(const std::string& path) {
    if (!fs::exists(path)) throw IoError("missing " + path + " (run `embed` first)");
    IdVectors out;
    if (fs::file_size(path) == 0) return out;
    auto flat = VectorIndex::load(path);
    for (std::size_t row = 0; row < flat.size(); ++row) {
        auto v = flat.vector(row);
        out.emplace_back(flat.ids()[row], EmbeddingVector{{v.begin(), v.end()}, NormFlag::Unit});
    }
    return out;
}

void write_results(const PipelineConfig& c, const std::vector<LabeledPair>& pairs, const RunReport& report) {
    auto out = open_out(artifact(c, kResults));
    write_results_csv(out, pairs);
    save_run_report(artifact(c, kRunReport), report);
    log("wrote " + std::to_string(pairs.size()) + " labeled pairs to " + artifact(c, kResults));
}

TranslationCache open_cache(const PipelineConfig& c) {
    return c.translate.cache_path.empty() ? TranslationCache() : TranslationCache(c.translate.cache_path);
}

// ---- subcommands -------------------------------------------------------------

void cmd_ingest(const PipelineConfig& c) {
    if (c.io.input.empty()) throw ConfigError("ingest needs --input or io.input");
    auto postings = load_postings(c.io.input, c.io.format);
    ensure_out_dir(c);
    save_postings(artifact(c, kPostings), postings, CorpusFormat::Jsonl);
    auto stats = corpus_stats(postings, [](std::string_view s) { return tokenize(s); });
    open_out(artifact(c, kCorpusStats)) << to_json(stats).dump(2) << '\n';
    log("ingested " + std::to_string(postings.size()) + " postings");
}

void cmd_normalize(const PipelineConfig& c) {
    auto postings = load_ingested(c);
    auto n = normalize_stage(postings, c);
    write_canonical(artifact(c, kCanonical), n);
    log(std::to_string(postings.size()) + " postings, " + std::to_string(n.groups.size()) + " unique texts");
}

void cmd_translate(const PipelineConfig& c) {
    auto postings = load_ingested(c);
    auto n = read_canonical(artifact(c, kCanonical));
    auto translator = make_translator(c);
    auto cache = open_cache(c);
    TranslateStats stats;
    auto reps = translate_stage(postings, n, c, *translator, cache, &stats);
    write_translated(artifact(c, kTranslated), reps);
    log(std::to_string(reps.size()) + " texts, " + std::to_string(stats.cache_hits) + " cache hits, " +
        std::to_string(stats.backend_batches) + " backend batches");
}

void cmd_embed(const PipelineConfig& c) {
    auto reps = read_translated(artifact(c, kTranslated));
    auto embedder = make_embedder(c);
    auto vectors = nonzero(embed_stage(reps, *embedder, c));
    write_embeddings(artifact(c, kEmbeddings), vectors, c.embed.dim);
    log(std::to_string(vectors.size()) + " non-zero vectors of " + std::to_string(reps.size()));
}

void cmd_index(const PipelineConfig& c) {
    auto vectors = read_embeddings(artifact(c, kEmbeddings));
    if (vectors.empty()) throw EmptyInput("no non-zero vectors to index");
    index_stage(vectors, c).save(artifact(c, kIndex));
    log("indexed " + std::to_string(vectors.size()) + " vectors");
}

void cmd_dedup(const PipelineConfig& c, bool staged) {
    auto postings = load_ingested(c);
    auto rules = c.dedup.effective_rules();
    validate_rules(rules);
    if (!staged) {
        auto translator = make_translator(c);
        auto embedder = make_embedder(c);
        auto cache = open_cache(c);
        auto run = prepare_run(postings, c, *translator, *embedder, cache);
        auto pairs = label_run(postings, run, rules);
        if (!run.vectors.empty()) run.index.save(artifact(c, kIndex));
        write_results(c, pairs, run.report);
        return;
    }
    PreparedRun run;
    {
        StageTimer t(run.report, "load");
        run.normalized = read_canonical(artifact(c, kCanonical));
        run.rep_texts = read_translated(artifact(c, kTranslated));
        run.vectors = read_embeddings(artifact(c, kEmbeddings));
        if (!run.vectors.empty()) run.index = VectorIndex::load(artifact(c, kIndex));
    }
    start_report(run.report, postings, run.normalized, c);
    std::vector<std::string> texts;
    for (const auto& r : run.rep_texts) texts.push_back(r.second);
    run.report.truncation = truncation_report(texts, c.embed.max_tokens);
    {
        StageTimer t(run.report, "search");
        if (!run.vectors.empty()) run.candidates = candidate_stage(run.index, run.vectors, c);
    }
    finish_candidates(run, c, run.rep_texts.size());
    auto pairs = label_run(postings, run, rules);
    write_results(c, pairs, run.report);
}

void cmd_eval(const PipelineConfig& c, const std::string& gold_path) {
    auto gold_file = gold_path.empty() ? artifact(c, kGold) : gold_path;
    auto gin = open_in(gold_file, "synth");
    auto gold = read_gold_csv(gin);
    auto rin = open_in(artifact(c, kResults), "dedup");
    auto results = read_results_csv(rin);
    auto report = score(results, gold);
    open_out(artifact(c, kEvalReport)) << to_json(report).dump(2) << '\n';
    for (auto l : kScoredLabels) {
        const auto& m = report[l];
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-9s P=%.4f R=%.4f F1=%.4f (tp=%zu fp=%zu fn=%zu)\n",
                      std::string(to_string(l)).c_str(), m.precision, m.recall, m.f1, m.tp, m.fp, m.fn);
        std::cout << buf;
    }
    std::cout << "macro F1 " << report.macro_f1 << '\n';
}

void cmd_synth(const PipelineConfig& c, SynthPlan plan) {
    auto corpus = synth_corpus(plan);
    ensure_out_dir(c);
    save_postings(artifact(c, kPostings), corpus.postings, CorpusFormat::Jsonl);
    auto gold = open_out(artifact(c, kGold));
    write_gold_csv(gold, corpus.gold);
    auto dict = open_out(artifact(c, kDictionary));
    write_dictionary_json(dict, corpus.dictionary);
    log("synthesized " + std::to_string(corpus.postings.size()) + " postings with " +
        std::to_string(corpus.gold.size()) + " gold pairs");
}

void cmd_report(const PipelineConfig& c, const std::string& format) {
    auto run = load_run_report(artifact(c, kRunReport));
    std::optional<EvalReport> eval;
    auto eval_path = artifact(c, kEvalReport);
    if (fs::exists(eval_path)) {
        std::ifstream in(eval_path);
        try {
            eval = eval_report_from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(1, eval_path + ": " + e.what());
        }
    }
    std::cout << report_render(run, eval, parse_report_format(format));
}

int exit_code(ErrorCategory cat) {
    switch (cat) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::Data: return 3;
        case ErrorCategory::Backend: return 4;
        case ErrorCategory::Internal: return 1;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Duplicate detection for multilingual posting corpora"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "JSON configuration file");
    app.add_option("--mode", flags.mode, "two_step or multilingual");
    app.add_option("--k", flags.k, "neighbours per record");
    app.add_option("--theta", flags.theta, "L2 distance threshold");
    app.add_option("--threads", flags.threads, "worker threads (0 = all cores)");
    app.add_option("--seed", flags.seed, "seed for index building");
    app.add_flag("--paper-strict", flags.paper_strict, "ascii-only cleaning, k=100, theta=0.25, 384 tokens");
    app.add_option("--out", flags.out, "output directory");

    std::string input, format;
    auto* ingest = app.add_subcommand("ingest", "validate a corpus and store it in the output directory");
    ingest->add_option("--input", input, "corpus path");
    ingest->add_option("--format", format, "jsonl or csv");

    app.add_subcommand("normalize", "clean texts and group exact duplicates");
    app.add_subcommand("translate", "translate unique texts to the target language");
    app.add_subcommand("embed", "embed unique texts");
    app.add_subcommand("index", "build the vector index");

    bool staged = false;
    auto* dedup = app.add_subcommand("dedup", "run the pipeline and write labeled pairs");
    dedup->add_flag("--staged", staged, "continue from the artifacts of the individual stages");

    std::string gold_path;
    auto* eval = app.add_subcommand("eval", "score results against gold labels");
    eval->add_option("--gold", gold_path, "gold CSV (default: <out>/gold.csv)");

    SynthPlan plan;
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted duplicates");
    synth->add_option("--n-base", plan.n_base, "number of base postings");
    synth->add_option("--full-rate", plan.full_rate);
    synth->add_option("--semantic-rate", plan.semantic_rate);
    synth->add_option("--temporal-rate", plan.temporal_rate);
    synth->add_flag("--metadata-signal", plan.metadata_signal, "plant metadata-dependent hard cases");
    synth->add_option("--synth-seed", plan.seed, "generator seed");

    std::string report_format = "text";
    auto* report = app.add_subcommand("report", "render the run report");
    report->add_option("--format", report_format, "text or json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        auto config = resolve_config(flags);
        if (!input.empty()) config.io.input = input;
        if (!format.empty()) {
            auto f = parse_corpus_format(format);
            if (!f) throw ConfigError("--format must be jsonl or csv");
            config.io.format = *f;
        }
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "ingest") cmd_ingest(config);
        else if (name == "normalize") cmd_normalize(config);
        else if (name == "translate") cmd_translate(config);
        else if (name == "embed") cmd_embed(config);
        else if (name == "index") cmd_index(config);
        else if (name == "dedup") cmd_dedup(config, staged);
        else if (name == "eval") cmd_eval(config, gold_path);
        else if (name == "synth") cmd_synth(config, plan);
        else if (name == "report") cmd_report(config, report_format);
        return 0;
    } catch (const Error& e) {
        std::cerr << "polydedup: error: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "polydedup: internal error: " << e.what() << '\n';
        return 1;
    }
}
