#pragma once

// Run summary: stage timings, comparison counters, truncation and saturation
// diagnostics, threshold sweep and (when gold labels exist) per-class scores.
// The JSON form round-trips to an equal RunReport.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "polydedup/error.hpp"
#include "polydedup/eval.hpp"
#include "polydedup/pipeline.hpp"

namespace polydedup {

enum class ReportFormat { Text, Json };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "text") return ReportFormat::Text;
    if (s == "json") return ReportFormat::Json;
    throw ConfigError("report format must be text or json, got '" + std::string(s) + "'");
}

inline nlohmann::ordered_json to_json(const TruncationReport& t) {
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& [lo, n] : t.histogram_over_limit) hist.push_back({lo, n});
    return {{"max_tokens", t.max_tokens},
            {"n_total", t.n_total},
            {"n_truncated", t.n_truncated},
            {"fraction_truncated", t.fraction_truncated},
            {"mean_tokens_lost", t.mean_tokens_lost},
            {"median_tokens_lost", t.median_tokens_lost},
            {"bucket_width", t.bucket_width},
            {"histogram_over_limit", hist}};
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["mode"] = r.mode;
    j["k"] = r.k;
    j["base_theta"] = r.base_theta;
    auto& timings = j["timings"] = nlohmann::ordered_json::array();
    for (const auto& t : r.timings) timings.push_back({{"stage", t.stage}, {"millis", t.millis}});
    j["counters"] = {{"n_postings", r.n_postings},
                     {"n_unique_texts", r.n_unique_texts},
                     {"n_embedded", r.n_embedded},
                     {"n_zero_vectors", r.n_zero_vectors},
                     {"brute_pairs_postings", r.brute_pairs_postings},
                     {"brute_pairs_unique", r.brute_pairs_unique},
                     {"candidate_pairs", r.candidate_pairs},
                     {"distance_computations", r.distance_computations},
                     {"kept_after_threshold", r.kept_after_threshold},
                     {"kept_after_rules", r.kept_after_rules},
                     {"exact_pairs", r.exact_pairs},
                     {"translation_cache_hits", r.translation_cache_hits},
                     {"translation_batches", r.translation_batches}};
    j["labels"] = {{"FULL", r.labels.full}, {"SEMANTIC", r.labels.semantic}, {"TEMPORAL", r.labels.temporal}};
    j["truncation"] = to_json(r.truncation);
    j["saturation"] = {{"count", r.saturation.count}, {"saturated_ids", r.saturation.saturated_ids}};
    auto& sweep = j["sweep"] = nlohmann::ordered_json::array();
    for (const auto& s : r.sweep)
        sweep.push_back({{"theta", s.theta}, {"kept_count", s.kept_count}, {"kept_fraction", s.kept_fraction}});
    return j;
}

inline RunReport run_report_from_json(const nlohmann::json& j) {
    try {
        RunReport r;
        r.mode = j.at("mode").get<std::string>();
        r.k = j.at("k").get<std::size_t>();
        r.base_theta = j.at("base_theta").get<double>();
        for (const auto& t : j.at("timings"))
            r.timings.push_back({t.at("stage").get<std::string>(), t.at("millis").get<double>()});
        const auto& c = j.at("counters");
        r.n_postings = c.at("n_postings").get<std::size_t>();
        r.n_unique_texts = c.at("n_unique_texts").get<std::size_t>();
        r.n_embedded = c.at("n_embedded").get<std::size_t>();
        r.n_zero_vectors = c.at("n_zero_vectors").get<std::size_t>();
        r.brute_pairs_postings = c.at("brute_pairs_postings").get<std::uint64_t>();
        r.brute_pairs_unique = c.at("brute_pairs_unique").get<std::uint64_t>();
        r.candidate_pairs = c.at("candidate_pairs").get<std::size_t>();
        r.distance_computations = c.at("distance_computations").get<std::uint64_t>();
        r.kept_after_threshold = c.at("kept_after_threshold").get<std::size_t>();
        r.kept_after_rules = c.at("kept_after_rules").get<std::size_t>();
        r.exact_pairs = c.at("exact_pairs").get<std::size_t>();
        r.translation_cache_hits = c.at("translation_cache_hits").get<std::size_t>();
        r.translation_batches = c.at("translation_batches").get<std::size_t>();
        const auto& l = j.at("labels");
        r.labels = {l.at("FULL").get<std::size_t>(), l.at("SEMANTIC").get<std::size_t>(),
                    l.at("TEMPORAL").get<std::size_t>()};
        const auto& t = j.at("truncation");
        r.truncation.max_tokens = t.at("max_tokens").get<std::size_t>();
        r.truncation.n_total = t.at("n_total").get<std::size_t>();
        r.truncation.n_truncated = t.at("n_truncated").get<std::size_t>();
        r.truncation.fraction_truncated = t.at("fraction_truncated").get<double>();
        r.truncation.mean_tokens_lost = t.at("mean_tokens_lost").get<double>();
        r.truncation.median_tokens_lost = t.at("median_tokens_lost").get<double>();
        r.truncation.bucket_width = t.at("bucket_width").get<std::size_t>();
        for (const auto& h : t.at("histogram_over_limit"))
            r.truncation.histogram_over_limit[h.at(0).get<std::size_t>()] = h.at(1).get<std::size_t>();
        const auto& s = j.at("saturation");
        r.saturation.count = s.at("count").get<std::size_t>();
        r.saturation.saturated_ids = s.at("saturated_ids").get<std::vector<std::string>>();
        for (const auto& row : j.at("sweep"))
            r.sweep.push_back({row.at("theta").get<double>(), row.at("kept_count").get<std::size_t>(),
                               row.at("kept_fraction").get<double>()});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("run report: ") + e.what());
    }
}

inline void save_run_report(const std::string& path, const RunReport& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << to_json(r).dump(2) << '\n';
}

inline RunReport load_run_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing run report " + path);
    try {
        return run_report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("run report: ") + e.what());
    }
}

namespace report_detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline void line(std::ostringstream& out, std::string_view key, const std::string& value) {
    out << "  " << key;
    for (std::size_t i = key.size(); i < 26; ++i) out << ' ';
    out << value << '\n';
}

}  // namespace report_detail

inline std::string report_render(const RunReport& run, const std::optional<EvalReport>& eval, ReportFormat format) {
    if (format == ReportFormat::Json) {
        nlohmann::ordered_json j;
        j["run"] = to_json(run);
        j["eval"] = eval ? nlohmann::ordered_json(to_json(*eval)) : nlohmann::ordered_json(nullptr);
        return j.dump(2) + "\n";
    }
    using report_detail::fixed;
    using report_detail::line;
    std::ostringstream out;
    out << "run: mode=" << run.mode << " k=" << run.k << " theta=" << fixed(run.base_theta, 3) << "\n\n";

    out << "[timings]\n";
    double total = 0.0;
    for (const auto& t : run.timings) {
        line(out, t.stage, fixed(t.millis, 1) + " ms");
        total += t.millis;
    }
    line(out, "total", fixed(total, 1) + " ms");

    out << "\n[counters]\n";
    line(out, "postings", std::to_string(run.n_postings));
    line(out, "unique texts", std::to_string(run.n_unique_texts));
    line(out, "embedded", std::to_string(run.n_embedded));
    line(out, "zero vectors", std::to_string(run.n_zero_vectors));
    line(out, "brute pairs (postings)", std::to_string(run.brute_pairs_postings));
    line(out, "brute pairs (unique)", std::to_string(run.brute_pairs_unique));
    if (run.brute_pairs_postings > 0)
        line(out, "unique-text reduction",
             fixed(100.0 * (1.0 - double(run.brute_pairs_unique) / double(run.brute_pairs_postings)), 2) + " %");
    line(out, "candidate pairs", std::to_string(run.candidate_pairs));
    line(out, "distance computations", std::to_string(run.distance_computations));
    line(out, "kept after threshold", std::to_string(run.kept_after_threshold));
    line(out, "kept after rules", std::to_string(run.kept_after_rules));
    line(out, "exact pairs", std::to_string(run.exact_pairs));
    line(out, "translation cache hits", std::to_string(run.translation_cache_hits));
    line(out, "translation batches", std::to_string(run.translation_batches));
    line(out, "labels FULL", std::to_string(run.labels.full));
    line(out, "labels SEMANTIC", std::to_string(run.labels.semantic));
    line(out, "labels TEMPORAL", std::to_string(run.labels.temporal));

    out << "\n[truncation]\n";
    const auto& t = run.truncation;
    line(out, "max tokens", std::to_string(t.max_tokens));
    line(out, "truncated", std::to_string(t.n_truncated) + " / " + std::to_string(t.n_total) + " (" +
                               fixed(100.0 * t.fraction_truncated, 2) + " %)");
    line(out, "mean tokens lost", fixed(t.mean_tokens_lost, 2));
    line(out, "median tokens lost", fixed(t.median_tokens_lost, 2));
    for (const auto& [lo, n] : t.histogram_over_limit)
        line(out, "  " + std::to_string(lo) + "-" + std::to_string(lo + t.bucket_width - 1), std::to_string(n));

    out << "\n[saturation]\n";
    line(out, "saturated queries", std::to_string(run.saturation.count));
    for (std::size_t i = 0; i < run.saturation.saturated_ids.size() && i < 10; ++i)
        line(out, "  id", run.saturation.saturated_ids[i]);
    if (run.saturation.saturated_ids.size() > 10)
        line(out, "  ...", std::to_string(run.saturation.saturated_ids.size() - 10) + " more");

    out << "\n[sweep]\n  theta    kept      fraction\n";
    for (const auto& s : run.sweep) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-8.3f %-9zu %.4f\n", s.theta, s.kept_count, s.kept_fraction);
        out << buf;
    }

    out << "\n[scores]\n";
    if (!eval) {
        out << "  no gold labels\n";
    } else {
        out << "  class      precision  recall  f1      tp      fp      fn\n";
        for (auto label : kScoredLabels) {
            const auto& m = (*eval)[label];
            char buf[128];
            std::snprintf(buf, sizeof buf, "  %-10s %-10.4f %-7.4f %-7.4f %-7zu %-7zu %zu\n",
                          std::string(to_string(label)).c_str(), m.precision, m.recall, m.f1, m.tp, m.fp, m.fn);
            out << buf;
        }
        line(out, "macro F1", fixed(eval->macro_f1, 4));
    }
    return out.str();
}

}  // namespace polydedup
