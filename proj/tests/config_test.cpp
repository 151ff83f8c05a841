#include <gtest/gtest.h>

#include "polydedup/config.hpp"
#include "test_util.hpp"

using namespace polydedup;

namespace {

PipelineConfig from(const std::string& text) {
    PipelineConfig c;
    merge_config(c, nlohmann::json::parse(text, nullptr, true, true));
    return c;
}

}  // namespace

TEST(Config, Defaults) {
    PipelineConfig c;
    EXPECT_EQ(c.mode, PipelineMode::TwoStep);
    EXPECT_EQ(c.dedup.k, 100u);
    EXPECT_EQ(c.dedup.base_theta, 0.25);
    EXPECT_EQ(c.embed.dim, 256u);
    EXPECT_EQ(c.embed.max_tokens, 384u);
    EXPECT_EQ(c.dedup.sweep_thetas.size(), 8u);
    EXPECT_EQ(c.dedup.effective_rules(), std::vector<ExpertRule>{default_rule(0.25)});
    EXPECT_NO_THROW(validate(c));
    EXPECT_EQ(dictionary_path(c), "out/dictionary.json");
}

TEST(Config, MergeAllSections) {
    auto c = from(R"({
        // comments are allowed
        "mode": "multilingual",
        "threads": 3,
        "seed": 9,
        "normalize": {"ascii_only": true, "keep_punct": ".,"},
        "translate": {"backend": "remote", "endpoint": "http://127.0.0.1:9/t", "max_in_flight": 2,
                      "batch_size": 8, "cache_path": "c.jsonl", "target": "de", "retry_attempts": 2,
                      "retry_base_ms": 10},
        "embed": {"backend": "hashed", "dim": 128, "max_tokens": 64, "batch_size": 16, "max_in_flight": 2},
        "index": {"kind": "ivf", "nlist": 16, "nprobe": 4, "kmeans_iters": 5, "seed": 11},
        "dedup": {"k": 20, "theta": 0.3, "sweep": [0.1, 0.2],
                  "ruleset": [{"company": "same", "threshold": 0.4},
                              {"language": "different", "action": "reject"},
                              {}]},
        "io": {"input": "x.csv", "format": "csv", "output_dir": "o"}
    })");
    EXPECT_EQ(c.mode, PipelineMode::Multilingual);
    EXPECT_EQ(c.threads, 3u);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_TRUE(c.normalize.ascii_only);
    EXPECT_EQ(c.normalize.keep_punct, (std::set<text::CodePoint>{'.', ','}));
    EXPECT_EQ(c.translate.backend.kind, TranslatorSpec::Kind::Remote);
    EXPECT_EQ(c.translate.backend.endpoint, "http://127.0.0.1:9/t");
    EXPECT_EQ(c.translate.max_in_flight, 2u);
    EXPECT_EQ(c.translate.batch_size, 8u);
    EXPECT_EQ(c.translate.cache_path, "c.jsonl");
    EXPECT_EQ(c.translate.target_language, "de");
    EXPECT_EQ(c.translate.retry.max_attempts, 2);
    EXPECT_EQ(c.translate.retry.base_delay, std::chrono::milliseconds(10));
    EXPECT_EQ(c.embed.dim, 128u);
    EXPECT_EQ(c.embed.max_tokens, 64u);
    EXPECT_EQ(c.index.kind, IndexKind::IVF);
    EXPECT_EQ(c.index.nlist, 16u);
    EXPECT_EQ(c.index.nprobe, 4u);
    EXPECT_EQ(c.index.kmeans_iters, 5u);
    EXPECT_EQ(c.index.seed, 11u);
    EXPECT_EQ(c.dedup.k, 20u);
    EXPECT_EQ(c.dedup.base_theta, 0.3);
    EXPECT_EQ(c.dedup.sweep_thetas, (std::vector<double>{0.1, 0.2}));
    ASSERT_EQ(c.dedup.ruleset.size(), 3u);
    EXPECT_EQ(c.dedup.ruleset[0], (ExpertRule{.company = AttrMatch::Same, .threshold = 0.4}));
    EXPECT_TRUE(c.dedup.ruleset[1].reject);
    EXPECT_EQ(c.dedup.ruleset[2], default_rule(0.3));
    EXPECT_EQ(c.io.input, "x.csv");
    EXPECT_EQ(c.io.format, CorpusFormat::Csv);
    EXPECT_EQ(c.io.output_dir, "o");
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, NamedRulesets) {
    auto c = from(R"({"dedup": {"theta": 0.2, "ruleset": "example"}})");
    EXPECT_EQ(c.dedup.ruleset, example_ruleset(0.2));
    auto none = from(R"({"dedup": {"ruleset": "none"}})");
    EXPECT_TRUE(none.dedup.ruleset.empty());
}

TEST(Config, PaperStrict) {
    auto c = from(R"({"paper_strict": true})");
    EXPECT_TRUE(c.normalize.ascii_only);
    EXPECT_EQ(c.dedup.k, 100u);
    EXPECT_EQ(c.dedup.base_theta, 0.25);
    EXPECT_EQ(c.embed.max_tokens, 384u);
}

TEST(Config, Errors) {
    for (const char* bad : {
             R"({"nonsense": 1})",
             R"({"mode": "three_step"})",
             R"({"dedup": {"k": "many"}})",
             R"({"dedup": {"ruleset": "fancy"}})",
             R"({"dedup": {"ruleset": [{"company": "maybe"}]}})",
             R"({"dedup": {"ruleset": [{"action": "explode"}]}})",
             R"({"dedup": {"ruleset": [{"colour": "same"}]}})",
             R"({"dedup": {"ruleset": [{"company": 3}]}})",
             R"({"translate": {"backend": "oracle"}})",
             R"({"index": {"kind": "hnsw"}})",
             R"({"io": {"format": "xml"}})",
             R"({"embed": {"dim": [1]}})",
             R"([1, 2])",
         })
        EXPECT_THROW(from(bad), ConfigError) << bad;
}

TEST(Config, Validation) {
    auto expect_invalid = [](const std::string& text) { EXPECT_THROW(validate(from(text)), ConfigError) << text; };
    expect_invalid(R"({"translate": {"backend": "identity"}})");
    expect_invalid(R"({"dedup": {"k": 0}})");
    expect_invalid(R"({"dedup": {"theta": -1}})");
    expect_invalid(R"({"embed": {"dim": 1}})");
    expect_invalid(R"({"embed": {"max_tokens": 0}})");
    expect_invalid(R"({"embed": {"backend": "magic"}})");
    expect_invalid(R"({"index": {"kind": "ivf", "nlist": 4, "nprobe": 5}})");
    expect_invalid(R"({"dedup": {"ruleset": [{"company": "same"}]}})");
    expect_invalid(R"({"normalize": {"keep_punct": ""}})");
    EXPECT_THROW(validate(from(R"({"translate": {"target": "english"}})")), InvalidLanguage);
    EXPECT_NO_THROW(validate(from(R"({"mode": "multilingual", "translate": {"backend": "identity"}})")));
}

TEST(Config, LoadFromFile) {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("c.json"), "{ /* block */ \"dedup\": {\"k\": 7} }\n");
    EXPECT_EQ(load_config(tmp.file("c.json")).dedup.k, 7u);
    testutil::write_file(tmp.file("bad.json"), "{ \"dedup\": ");
    EXPECT_THROW(load_config(tmp.file("bad.json")), ConfigError);
    EXPECT_THROW(load_config(tmp.file("missing.json")), ConfigError);
}

TEST(Config, ModeStrings) {
    EXPECT_EQ(to_string(parse_mode("two_step")), "two_step");
    EXPECT_EQ(to_string(parse_mode("multilingual")), "multilingual");
    EXPECT_THROW(parse_mode("both"), ConfigError);
}
