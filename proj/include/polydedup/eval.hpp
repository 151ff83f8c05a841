#pragma once

// Pair-level precision / recall / F1 per duplicate class.
// Conventions: 0/0 precision or recall is 0, so F1 is 0; a predicted pair the
// gold set does not contain is a false positive for its predicted class.

#include <array>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "polydedup/csv.hpp"
#include "polydedup/dedup.hpp"
#include "polydedup/error.hpp"

namespace polydedup {

using PairKey = std::pair<std::string, std::string>;

inline PairKey canonical_key(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return {std::move(a), std::move(b)};
}

struct GoldSet {
    std::map<PairKey, DuplicateLabel> pairs;

    void add(const std::string& a, const std::string& b, DuplicateLabel label) {
        if (label == DuplicateLabel::None) throw DataError("gold set cannot hold NONE labels");
        if (a == b) throw DataError("gold pair with itself: " + a);
        pairs[canonical_key(a, b)] = label;
    }
    std::size_t size() const { return pairs.size(); }

    friend bool operator==(const GoldSet&, const GoldSet&) = default;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

inline constexpr std::array<DuplicateLabel, 3> kScoredLabels{DuplicateLabel::Full, DuplicateLabel::Semantic,
                                                             DuplicateLabel::Temporal};

struct EvalReport {
    std::array<ClassMetrics, 3> per_class{};  // indexed like kScoredLabels
    double macro_f1 = 0.0;

    const ClassMetrics& operator[](DuplicateLabel l) const { return per_class.at(static_cast<std::size_t>(l)); }

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline double safe_ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : double(num) / double(den); }

inline EvalReport score(const std::vector<LabeledPair>& predicted, const GoldSet& gold) {
    std::map<PairKey, DuplicateLabel> pred;
    for (const auto& p : predicted) {
        if (p.label == DuplicateLabel::None) continue;
        if (!pred.emplace(canonical_key(p.id_a, p.id_b), p.label).second) throw DuplicatePrediction(p.id_a, p.id_b);
    }
    EvalReport r;
    auto slot = [&](DuplicateLabel l) -> ClassMetrics& { return r.per_class[static_cast<std::size_t>(l)]; };
    for (const auto& [key, label] : pred) {
        auto it = gold.pairs.find(key);
        if (it != gold.pairs.end() && it->second == label) ++slot(label).tp;
        else ++slot(label).fp;
    }
    for (const auto& [key, label] : gold.pairs) {
        auto it = pred.find(key);
        if (it == pred.end() || it->second != label) ++slot(label).fn;
    }
    double sum = 0.0;
    for (auto& m : r.per_class) {
        m.precision = safe_ratio(m.tp, m.tp + m.fp);
        m.recall = safe_ratio(m.tp, m.tp + m.fn);
        m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
        sum += m.f1;
    }
    r.macro_f1 = sum / 3.0;
    return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    for (auto l : kScoredLabels) {
        const auto& m = r[l];
        j[std::string(to_string(l))] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                                        {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}};
    }
    j["macro_f1"] = r.macro_f1;
    return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport r;
    for (auto l : kScoredLabels) {
        const auto& c = j.at(std::string(to_string(l)));
        auto& m = r.per_class[static_cast<std::size_t>(l)];
        m.precision = c.at("precision").get<double>();
        m.recall = c.at("recall").get<double>();
        m.f1 = c.at("f1").get<double>();
        m.tp = c.at("tp").get<std::size_t>();
        m.fp = c.at("fp").get<std::size_t>();
        m.fn = c.at("fn").get<std::size_t>();
    }
    r.macro_f1 = j.at("macro_f1").get<double>();
    return r;
}

// CSV `id1,id2,label`, sorted by pair.
inline void write_gold_csv(std::ostream& out, const GoldSet& gold) {
    out << "id1,id2,label\n";
    for (const auto& [key, label] : gold.pairs)
        out << csv::join({key.first, key.second, std::string(to_string(label))}) << '\n';
}

inline GoldSet read_gold_csv(std::istream& in) {
    GoldSet gold;
    csv::Reader reader(in);
    try {
        auto header = reader.next();
        if (!header) return gold;
        if (header->fields != std::vector<std::string>{"id1", "id2", "label"})
            throw MalformedRecord(header->line, "gold header must be id1,id2,label");
        while (auto row = reader.next()) {
            if (row->fields.size() != 3) throw MalformedRecord(row->line, "expected 3 fields");
            auto label = parse_label(row->fields[2]);
            if (!label || *label == DuplicateLabel::None) throw MalformedRecord(row->line, "bad gold label");
            gold.add(row->fields[0], row->fields[1], *label);
        }
    } catch (const Error&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw MalformedRecord(reader.line(), e.what());
    }
    return gold;
}

}  // namespace polydedup
