#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "fake_server.hpp"
#include "polydedup/translate.hpp"
#include "test_util.hpp"

using namespace polydedup;

namespace {

TranslationRequest req(const std::string& text, std::optional<std::string> source = std::nullopt) {
    return {fnv1a_128(text::to_lower(text)), text, std::move(source), "en"};
}

RetryPolicy fast_retry(int attempts = 5) {
    RetryPolicy p;
    p.max_attempts = attempts;
    p.base_delay = std::chrono::milliseconds(1);
    return p;
}

// Records every batch it receives; optionally sleeps or fails first.
class RecordingTranslator : public Translator {
public:
    std::string name() const override { return "recording"; }
    std::vector<std::string> translate(const std::vector<std::string>& texts, const std::optional<std::string>& source,
                                       const std::string& target) override {
        {
            std::lock_guard lock(mu);
            batches.push_back(texts);
            sources.push_back(source);
            int now = ++in_flight;
            max_seen = std::max(max_seen, now);
        }
        if (latency.count() > 0) std::this_thread::sleep_for(latency);
        --in_flight;
        if (failures_left > 0) {
            --failures_left;
            throw std::runtime_error("transient");
        }
        std::vector<std::string> out;
        for (const auto& t : texts) out.push_back("[" + target + "]" + t);
        return out;
    }

    std::mutex mu;
    std::vector<std::vector<std::string>> batches;
    std::vector<std::optional<std::string>> sources;
    std::atomic<int> in_flight{0};
    int max_seen = 0;
    std::atomic<int> failures_left{0};
    std::chrono::milliseconds latency{0};
};

}  // namespace

TEST(TranslateBatch, IdentityBackend) {
    IdentityTranslator id;
    TranslationCache cache;
    EXPECT_EQ(translate_batch({req("hund")}, id, cache), (std::vector<std::string>{"hund"}));
}

TEST(TranslateBatch, DictionaryBackend) {
    DictionaryTranslator dict(std::map<std::string, std::string>{{"hund", "dog"}});
    TranslationCache cache;
    EXPECT_EQ(translate_batch({req("hund kennel")}, dict, cache), (std::vector<std::string>{"dog kennel"}));
}

TEST(TranslateBatch, SameFingerprintTwiceInvokesBackendOnce) {
    RecordingTranslator backend;
    TranslationCache cache;
    TranslateStats stats;
    auto out = translate_batch({req("hund"), req("hund")}, backend, cache, {}, &stats);
    EXPECT_EQ(out, (std::vector<std::string>{"[en]hund", "[en]hund"}));
    ASSERT_EQ(backend.batches.size(), 1u);
    EXPECT_EQ(backend.batches[0].size(), 1u);
    EXPECT_EQ(stats.cache_hits, 1u);

    // across calls: served from the cache
    auto again = translate_batch({req("hund")}, backend, cache, {}, &stats);
    EXPECT_EQ(again, (std::vector<std::string>{"[en]hund"}));
    EXPECT_EQ(backend.batches.size(), 1u);
    EXPECT_EQ(stats.cache_hits, 1u);
    EXPECT_EQ(stats.backend_batches, 0u);
}

TEST(TranslateBatch, InvalidLanguage) {
    IdentityTranslator id;
    TranslationCache cache;
    auto bad_target = req("x");
    bad_target.target_language = "English";
    EXPECT_THROW(translate_batch({bad_target}, id, cache), InvalidLanguage);
    EXPECT_THROW(translate_batch({req("x", "D")}, id, cache), InvalidLanguage);
    EXPECT_THROW(translate_batch({req("x")}, id, cache, TranslateOptions{0, 32, {}}), ConfigError);
}

TEST(TranslateBatch, EmptyTextPassesThroughWithoutBackend) {
    RecordingTranslator backend;
    TranslationCache cache;
    auto out = translate_batch({req(""), req("a")}, backend, cache);
    EXPECT_EQ(out, (std::vector<std::string>{"", "[en]a"}));
    EXPECT_EQ(backend.batches.size(), 1u);
}

TEST(TranslateBatch, BatchesShareLanguagePairAndRespectSize) {
    RecordingTranslator backend;
    TranslationCache cache;
    std::vector<TranslationRequest> rs;
    for (int i = 0; i < 10; ++i) rs.push_back(req("t" + std::to_string(i), i % 2 ? "de" : "fr"));
    TranslateOptions opts{1, 3, fast_retry()};
    TranslateStats stats;
    auto out = translate_batch(rs, backend, cache, opts, &stats);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(out[i], "[en]t" + std::to_string(i));
    // 5 per language, batch size 3 -> 2 batches each
    EXPECT_EQ(stats.backend_batches, 4u);
    EXPECT_EQ(stats.texts_sent, 10u);
    for (std::size_t b = 0; b < backend.batches.size(); ++b) {
        EXPECT_LE(backend.batches[b].size(), 3u);
        for (const auto& t : backend.batches[b]) {
            int i = std::stoi(t.substr(1));
            EXPECT_EQ(backend.sources[b], std::optional<std::string>(i % 2 ? "de" : "fr"));
        }
    }
}

TEST(TranslateBatch, OrderPreservedUnderPermutation) {
    RecordingTranslator backend;
    backend.latency = std::chrono::milliseconds(1);
    std::vector<TranslationRequest> rs;
    for (int i = 0; i < 200; ++i) rs.push_back(req("w" + std::to_string(i), i % 3 ? "de" : std::optional<std::string>()));
    std::mt19937_64 rng(4);
    for (int round = 0; round < 5; ++round) {
        std::vector<std::size_t> perm(rs.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<TranslationRequest> shuffled;
        for (auto p : perm) shuffled.push_back(rs[p]);
        TranslationCache cache;
        auto out = translate_batch(shuffled, backend, cache, TranslateOptions{4, 7, fast_retry()});
        for (std::size_t i = 0; i < perm.size(); ++i) ASSERT_EQ(out[i], "[en]" + rs[perm[i]].text);
    }
}

TEST(TranslateBatch, InFlightBound) {
    RecordingTranslator backend;
    backend.latency = std::chrono::milliseconds(5);
    std::vector<TranslationRequest> rs;
    for (int i = 0; i < 40; ++i) rs.push_back(req("x" + std::to_string(i)));
    TranslationCache cache;
    translate_batch(rs, backend, cache, TranslateOptions{3, 2, fast_retry()});
    EXPECT_LE(backend.max_seen, 3);
    EXPECT_EQ(backend.batches.size(), 20u);
}

TEST(TranslateBatch, TransientFailuresAreRetried) {
    RecordingTranslator backend;
    backend.failures_left = 2;
    TranslationCache cache;
    auto out = translate_batch({req("a")}, backend, cache, TranslateOptions{1, 8, fast_retry(5)});
    EXPECT_EQ(out, (std::vector<std::string>{"[en]a"}));
    EXPECT_EQ(backend.batches.size(), 3u);
}

TEST(TranslateBatch, ExhaustedRetriesAreBackendUnavailable) {
    RecordingTranslator backend;
    backend.failures_left = 100;
    TranslationCache cache;
    EXPECT_THROW(translate_batch({req("a")}, backend, cache, TranslateOptions{1, 8, fast_retry(3)}),
                 BackendUnavailable);
    EXPECT_EQ(backend.batches.size(), 3u);
    EXPECT_EQ(cache.size(), 0u);
}

TEST(Retry, ConfigErrorNotRetried) {
    int calls = 0;
    EXPECT_THROW(with_retry(fast_retry(5), 0,
                            [&]() -> int {
                                ++calls;
                                throw ConfigError("bad");
                            }),
                 ConfigError);
    EXPECT_EQ(calls, 1);
}

TEST(Retry, BackoffDelaysBoundedByDoublingCap) {
    RetryPolicy p;
    p.max_attempts = 4;
    p.base_delay = std::chrono::milliseconds(20);
    int calls = 0;
    auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(with_retry(p, 1,
                            [&]() -> int {
                                ++calls;
                                throw std::runtime_error("x");
                            }),
                 BackendUnavailable);
    auto elapsed = std::chrono::steady_clock::now() - start;
    EXPECT_EQ(calls, 4);
    // three sleeps, each at most 20, 40, 80 ms
    EXPECT_LT(elapsed, std::chrono::milliseconds(140 + 200));
}

TEST(TranslationCache, PersistsAndReloads) {
    testutil::TempDir dir;
    auto path = dir.file("cache.jsonl");
    RecordingTranslator backend;
    {
        TranslationCache cache(path);
        translate_batch({req("eins"), req("zwei")}, backend, cache);
        EXPECT_EQ(cache.size(), 2u);
    }
    TranslationCache warm(path);
    EXPECT_EQ(warm.size(), 2u);
    std::size_t calls_before = backend.batches.size();
    TranslateStats stats;
    auto out = translate_batch({req("zwei"), req("eins")}, backend, warm, {}, &stats);
    EXPECT_EQ(out, (std::vector<std::string>{"[en]zwei", "[en]eins"}));
    EXPECT_EQ(backend.batches.size(), calls_before);
    EXPECT_EQ(stats.cache_hits, 2u);
    // one JSONL line per entry, keyed fields present
    auto content = testutil::read_file(path);
    EXPECT_EQ(std::count(content.begin(), content.end(), '\n'), 2);
    auto first = nlohmann::json::parse(content.substr(0, content.find('\n')));
    for (auto key : {"fingerprint", "target", "backend", "translated_text", "timestamp"})
        EXPECT_TRUE(first.contains(key)) << key;
    EXPECT_EQ(first["backend"], "recording");
}

TEST(TranslationCache, KeyIncludesBackendAndTarget) {
    TranslationCache cache;
    auto fp = fnv1a_128("x");
    cache.insert({fp, "en", "a", "one", 0});
    cache.insert({fp, "en", "a", "ignored", 0});
    cache.insert({fp, "de", "a", "two", 0});
    cache.insert({fp, "en", "b", "three", 0});
    EXPECT_EQ(cache.size(), 3u);
    EXPECT_EQ(cache.lookup(fp, "en", "a"), "one");
    EXPECT_EQ(cache.lookup(fp, "de", "a"), "two");
    EXPECT_EQ(cache.lookup(fp, "en", "b"), "three");
    EXPECT_FALSE(cache.lookup(fp, "fr", "a"));
}

TEST(TranslationCache, CorruptFileIsMalformed) {
    testutil::TempDir dir;
    testutil::write_file(dir.file("c.jsonl"), "{\"fingerprint\":\"zz\"}\n");
    EXPECT_THROW(TranslationCache(dir.file("c.jsonl")), MalformedRecord);
}

TEST(TranslationCache, ConcurrentReadersAndWriters) {
    TranslationCache cache;
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&cache, t] {
            for (int i = 0; i < 500; ++i) {
                auto fp = fnv1a_128(std::to_string(i));
                cache.insert({fp, "en", "b", std::to_string(i), t});
                auto v = cache.lookup(fp, "en", "b");
                ASSERT_TRUE(v);
                ASSERT_EQ(*v, std::to_string(i));
            }
        });
    threads.clear();
    EXPECT_EQ(cache.size(), 500u);
}

TEST(Dictionary, EmptyMapPassesThrough) {
    DictionaryTranslator dict({});
    EXPECT_EQ(dict.translate_one("unknown words stay"), "unknown words stay");
}

TEST(Dictionary, LongestMultiwordMatchWins) {
    DictionaryTranslator dict({{"new", "neu"}, {"new york", "NYC"}, {"new york city", "Gotham"}, {"york", "Y"}});
    EXPECT_EQ(dict.translate_one("new york city now"), "Gotham now");
    EXPECT_EQ(dict.translate_one("new york"), "NYC");
    EXPECT_EQ(dict.translate_one("new jersey york"), "neu jersey Y");
}

TEST(Dictionary, PunctuationAndCaseFolding) {
    DictionaryTranslator dict({{"hund", "dog"}, {"Katze", "cat"}, {"z.B.", "e.g."}});
    EXPECT_EQ(dict.translate_one("(Hund), katze!"), "(dog), cat!");
    EXPECT_EQ(dict.translate_one("z.B. Hund."), "e.g. dog.");
    EXPECT_EQ(dict.translate_one("  spaced\tout\n"), "spaced out");
    EXPECT_EQ(dict.translate_one("!!"), "!!");
}

TEST(Dictionary, FromFile) {
    testutil::TempDir dir;
    testutil::write_file(dir.file("d.json"), R"({"hund": "dog", "katze": "cat"})");
    auto dict = DictionaryTranslator::from_file(dir.file("d.json"));
    EXPECT_EQ(dict.translate_one("hund katze"), "dog cat");
    testutil::write_file(dir.file("bad.json"), "[1]");
    EXPECT_THROW(DictionaryTranslator::from_file(dir.file("bad.json")), ConfigError);
    testutil::write_file(dir.file("bad2.json"), R"({"a": 1})");
    EXPECT_THROW(DictionaryTranslator::from_file(dir.file("bad2.json")), ConfigError);
    testutil::write_file(dir.file("bad3.json"), "{");
    EXPECT_THROW(DictionaryTranslator::from_file(dir.file("bad3.json")), ConfigError);
    EXPECT_THROW(DictionaryTranslator::from_file(dir.file("missing.json")), ConfigError);
}

TEST(MakeBackend, Kinds) {
    auto id = make_backend({TranslatorSpec::Kind::Identity, "", ""});
    EXPECT_EQ(id->translate({"x y"}, std::nullopt, "en"), (std::vector<std::string>{"x y"}));
    EXPECT_EQ(id->name(), "identity");
    testutil::TempDir dir;
    testutil::write_file(dir.file("d.json"), "{}");
    auto dict = make_backend({TranslatorSpec::Kind::Dictionary, dir.file("d.json"), ""});
    EXPECT_EQ(dict->translate({"unknown"}, std::nullopt, "en"), (std::vector<std::string>{"unknown"}));
    EXPECT_THROW(make_backend({TranslatorSpec::Kind::Dictionary, dir.file("nope.json"), ""}), ConfigError);
    EXPECT_THROW(make_backend({TranslatorSpec::Kind::Remote, "", "ftp://x"}), ConfigError);
    EXPECT_THROW(make_backend({TranslatorSpec::Kind::Remote, "", "http://"}), ConfigError);
}

TEST(Remote, UnreachableEndpointIsBackendUnavailable) {
    // bind a port and release it so nothing listens there
    int port;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }
    RemoteTranslator remote("http://127.0.0.1:" + std::to_string(port) + "/translate", std::nullopt,
                            std::chrono::milliseconds(200));
    EXPECT_THROW(remote.translate({"a"}, std::nullopt, "en"), BackendUnavailable);
}

TEST(Remote, WireFormatAndAuth) {
    std::mutex mu;
    nlohmann::json seen_body;
    std::string seen_auth;
    testutil::FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        seen_body = nlohmann::json::parse(req.body);
        seen_auth = req.get_header_value("Authorization");
        nlohmann::json reply;
        for (const auto& t : seen_body["texts"]) reply["translations"].push_back("T:" + t.get<std::string>());
        res.set_content(reply.dump(), "application/json");
    });
    RemoteTranslator remote(server.url(), std::string("secret"));
    auto out = remote.translate({"a", "b"}, std::string("de"), "en");
    EXPECT_EQ(out, (std::vector<std::string>{"T:a", "T:b"}));
    EXPECT_EQ(seen_body["target"], "en");
    EXPECT_EQ(seen_body["source"], "de");
    EXPECT_EQ(seen_auth, "Bearer secret");
    remote.translate({"a"}, std::nullopt, "en");
    EXPECT_FALSE(seen_body.contains("source"));
}

TEST(Remote, RateLimitedSurfacesRetryAfter) {
    testutil::FakeServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 429;
        res.set_header("Retry-After", "0.01");
    });
    RemoteTranslator remote(server.url(), std::nullopt);
    try {
        remote.translate({"a"}, std::nullopt, "en");
        FAIL();
    } catch (const RateLimited& e) {
        EXPECT_DOUBLE_EQ(e.retry_after_seconds(), 0.01);
    }
    TranslationCache cache;
    EXPECT_THROW(translate_batch({req("a")}, remote, cache, TranslateOptions{1, 8, fast_retry(2)}), RateLimited);
}

TEST(Remote, ServerErrorsRetriedThenSucceed) {
    std::atomic<int> calls{0};
    testutil::FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        if (calls++ < 2) {
            res.status = 503;
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json reply;
        reply["translations"] = body["texts"];
        res.set_content(reply.dump(), "application/json");
    });
    RemoteTranslator remote(server.url(), std::nullopt);
    TranslationCache cache;
    auto out = translate_batch({req("x")}, remote, cache, TranslateOptions{1, 8, fast_retry(5)});
    EXPECT_EQ(out, (std::vector<std::string>{"x"}));
    EXPECT_EQ(calls.load(), 3);
}

TEST(Remote, MalformedReplies) {
    testutil::FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        if (req.body.find("garbage") != std::string::npos) res.set_content("not json", "application/json");
        else if (req.body.find("short") != std::string::npos) res.set_content(R"({"translations":[]})", "application/json");
        else res.set_content(R"({"other":1})", "application/json");
    });
    RemoteTranslator remote(server.url(), std::nullopt);
    EXPECT_THROW(remote.translate({"garbage"}, std::nullopt, "en"), BackendUnavailable);
    EXPECT_THROW(remote.translate({"short"}, std::nullopt, "en"), BackendUnavailable);
    EXPECT_THROW(remote.translate({"x"}, std::nullopt, "en"), BackendUnavailable);
}
