#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "polydedup/eval.hpp"
#include "polydedup/synth.hpp"
#include "polydedup/translate.hpp"

using namespace polydedup;

namespace {

std::string dump(const SynthCorpus& c) {
    std::ostringstream out;
    write_postings(out, c.postings, CorpusFormat::Jsonl);
    write_gold_csv(out, c.gold);
    write_dictionary_json(out, c.dictionary);
    return out.str();
}

}  // namespace

TEST(Synth, ZeroRatesGiveEmptyGold) {
    SynthPlan plan;
    plan.n_base = 50;
    plan.full_rate = plan.semantic_rate = plan.temporal_rate = 0;
    auto c = synth_corpus(plan);
    EXPECT_EQ(c.postings.size(), 50u);
    EXPECT_EQ(c.gold.size(), 0u);
}

TEST(Synth, HalfFullRateOnTenBases) {
    SynthPlan plan;
    plan.n_base = 10;
    plan.full_rate = 0.5;
    plan.semantic_rate = plan.temporal_rate = 0;
    auto c = synth_corpus(plan);
    ASSERT_EQ(c.postings.size(), 15u);
    ASSERT_EQ(c.gold.size(), 5u);
    std::map<std::string, Fingerprint> fp;
    for (const auto& p : c.postings) fp[p.id] = canonicalize(p).fingerprint;
    for (const auto& [key, label] : c.gold.pairs) {
        EXPECT_EQ(label, DuplicateLabel::Full);
        EXPECT_EQ(fp.at(key.first), fp.at(key.second));
    }
}

TEST(Synth, Deterministic) {
    SynthPlan plan;
    plan.n_base = 300;
    plan.metadata_signal = true;
    auto a = dump(synth_corpus(plan));
    EXPECT_EQ(a, dump(synth_corpus(plan)));
    plan.seed = 8;
    EXPECT_NE(a, dump(synth_corpus(plan)));
}

TEST(Synth, PlanValidation) {
    SynthPlan plan;
    plan.full_rate = -0.1;
    EXPECT_THROW(synth_corpus(plan), ConfigError);
    plan = SynthPlan{};
    plan.full_rate = plan.semantic_rate = 0.5;
    plan.temporal_rate = 0.1;
    EXPECT_THROW(synth_corpus(plan), ConfigError);
    plan = SynthPlan{};
    plan.languages = {"en"};
    EXPECT_THROW(synth_corpus(plan), ConfigError);
    plan.languages = {"not a code"};
    EXPECT_THROW(synth_corpus(plan), ConfigError);
    plan = SynthPlan{};
    plan.description_words = 5;
    EXPECT_THROW(synth_corpus(plan), ConfigError);
}

TEST(Synth, PostingsAreWellFormed) {
    SynthPlan plan;
    plan.n_base = 400;
    auto c = synth_corpus(plan);
    std::set<std::string> ids, langs;
    for (const auto& p : c.postings) {
        EXPECT_TRUE(ids.insert(p.id).second);
        ASSERT_TRUE(p.language);
        langs.insert(*p.language);
        EXPECT_FALSE(p.title.empty());
        EXPECT_FALSE(p.source.empty());
    }
    EXPECT_EQ(langs, (std::set<std::string>{"en", "qaa", "qab", "qac"}));
    // round trip through the corpus reader
    std::ostringstream out;
    write_postings(out, c.postings, CorpusFormat::Jsonl);
    std::istringstream in(out.str());
    EXPECT_EQ(parse_postings_jsonl(in), c.postings);
    // label mix follows the plan
    std::size_t full = 0, semantic = 0, temporal = 0;
    for (const auto& [_, l] : c.gold.pairs) {
        full += l == DuplicateLabel::Full;
        semantic += l == DuplicateLabel::Semantic;
        temporal += l == DuplicateLabel::Temporal;
    }
    EXPECT_GE(full, 60u);
    EXPECT_GE(semantic, 60u);
    EXPECT_GE(temporal, 40u);
}

TEST(Synth, GeneratorSoundnessByBruteForce) {
    // About 1,960 postings: every planted pair is inside the declared margin
    // after translation and embedding, every other pair outside.
    SynthPlan plan;
    plan.n_base = 1400;
    auto c = synth_corpus(plan);
    ASSERT_LE(c.postings.size(), 2000u);
    DictionaryTranslator translator(c.dictionary);
    HashedEmbedder embedder(plan.embed_dim, plan.max_tokens);

    const std::size_t n = c.postings.size();
    std::vector<Fingerprint> fp(n);
    std::vector<std::vector<float>> vec(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto canon = canonicalize(c.postings[i]);
        fp[i] = canon.fingerprint;
        auto translated = translator.translate_one(canon.text);
        vec[i] = hashed_bow_embed(tokenize(translated), plan.embed_dim, plan.max_tokens).values;
    }
    std::size_t violations = 0, semantic_pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            auto key = canonical_key(c.postings[i].id, c.postings[j].id);
            auto it = c.gold.pairs.find(key);
            double d = l2_distance(vec[i], vec[j]);
            if (it == c.gold.pairs.end()) {
                if (d < c.separation_margin) ++violations;
                EXPECT_NE(fp[i], fp[j]);
            } else if (it->second == DuplicateLabel::Full) {
                EXPECT_EQ(fp[i], fp[j]);
            } else if (fp[i] != fp[j]) {
                ++semantic_pairs;
                if (!(d < c.separation_margin)) ++violations;
            }
        }
    EXPECT_EQ(violations, 0u);
    EXPECT_GT(semantic_pairs, 200u);
}

TEST(Synth, MetadataSignalPlantsHardCases) {
    SynthPlan plan;
    plan.n_base = 500;
    plan.metadata_signal = true;
    auto c = synth_corpus(plan);
    EXPECT_EQ(c.hard_positives, 15u);
    EXPECT_EQ(c.hard_negatives, 30u);
    plan.metadata_signal = false;
    auto plain = synth_corpus(plan);
    EXPECT_EQ(plain.hard_positives, 0u);
    EXPECT_EQ(plain.hard_negatives, 0u);
}

TEST(Synth, DictionaryIsInvertibleMapping) {
    SynthPlan plan;
    plan.n_base = 20;
    auto c = synth_corpus(plan);
    for (const auto& [pseudo, english] : c.dictionary) {
        EXPECT_NE(pseudo, english);
        EXPECT_FALSE(english.empty());
        EXPECT_EQ(c.dictionary.count(english), 0u);
    }
    std::ostringstream out;
    write_dictionary_json(out, c.dictionary);
    auto j = nlohmann::json::parse(out.str());
    EXPECT_EQ(j.size(), c.dictionary.size());
}
