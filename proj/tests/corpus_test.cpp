#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "polydedup/corpus.hpp"
#include "polydedup/tokenize.hpp"
#include "test_util.hpp"

using namespace polydedup;
using testutil::day;

namespace {

const char* kFullLine =
    R"({"id":"a1","title":"Chef","description":"Cook food","company":"Acme","location":"Berlin",)"
    R"("country":"DE","language":"de","retrieval_date":"2024-03-01","source":"portal"})";

std::vector<Posting> parse_jsonl(const std::string& s) {
    std::istringstream in(s);
    return parse_postings_jsonl(in);
}

std::vector<Posting> parse_csv(const std::string& s) {
    std::istringstream in(s);
    return parse_postings_csv(in);
}

}  // namespace

TEST(LoadPostings, OneJsonlLineWithAllFields) {
    auto ps = parse_jsonl(std::string(kFullLine) + "\n");
    ASSERT_EQ(ps.size(), 1u);
    const auto& p = ps[0];
    EXPECT_EQ(p.id, "a1");
    EXPECT_EQ(p.title, "Chef");
    EXPECT_EQ(p.description, "Cook food");
    EXPECT_EQ(p.company, "Acme");
    EXPECT_EQ(p.location, "Berlin");
    EXPECT_EQ(p.country, "DE");
    EXPECT_EQ(p.language, "de");
    EXPECT_EQ(p.retrieval_date, day(2024, 3, 1));
    EXPECT_EQ(p.source, "portal");
}

TEST(LoadPostings, SharedIdIsDuplicateId) {
    std::string line = kFullLine;
    try {
        parse_jsonl(line + "\n" + line + "\n");
        FAIL() << "expected DuplicateId";
    } catch (const DuplicateId& e) {
        EXPECT_EQ(e.id(), "a1");
    }
}

TEST(LoadPostings, EmptyFileGivesEmptyList) {
    testutil::TempDir dir;
    testutil::write_file(dir.file("empty.jsonl"), "");
    testutil::write_file(dir.file("empty.csv"), "");
    EXPECT_TRUE(load_postings(dir.file("empty.jsonl"), CorpusFormat::Jsonl).empty());
    EXPECT_TRUE(load_postings(dir.file("empty.csv"), CorpusFormat::Csv).empty());
}

TEST(LoadPostings, MissingFileIsIoError) {
    EXPECT_THROW(load_postings("/nonexistent/dir/x.jsonl", CorpusFormat::Jsonl), IoError);
}

TEST(LoadPostings, NullAndAbsentOptionalsAreMissing) {
    auto ps = parse_jsonl(R"({"id":"x","title":"T","company":null,"language":"","retrieval_date":"2024-01-02"})");
    ASSERT_EQ(ps.size(), 1u);
    EXPECT_FALSE(ps[0].company);
    EXPECT_FALSE(ps[0].location);
    EXPECT_FALSE(ps[0].language);
    EXPECT_EQ(ps[0].description, "");
}

TEST(LoadPostings, MalformedJsonReportsLine) {
    try {
        parse_jsonl(std::string(kFullLine) + "\n\n{not json\n");
        FAIL();
    } catch (const MalformedRecord& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_jsonl("[1,2]\n"), MalformedRecord);
    EXPECT_THROW(parse_jsonl(R"({"id":"x","title":5,"retrieval_date":"2024-01-01"})"), MalformedRecord);
}

TEST(LoadPostings, RequiredFields) {
    try {
        parse_jsonl(R"({"title":"T","retrieval_date":"2024-01-01"})");
        FAIL();
    } catch (const MissingRequiredField& e) {
        EXPECT_EQ(e.field(), "id");
    }
    try {
        parse_jsonl(R"({"id":"a","title":"","description":"","retrieval_date":"2024-01-01"})");
        FAIL();
    } catch (const MissingRequiredField& e) {
        EXPECT_EQ(e.field(), "title|description");
    }
    try {
        parse_jsonl(R"({"id":"a","title":"T"})");
        FAIL();
    } catch (const MissingRequiredField& e) {
        EXPECT_EQ(e.field(), "retrieval_date");
    }
}

TEST(LoadPostings, InvalidValuesAreMalformed) {
    EXPECT_THROW(parse_jsonl(R"({"id":"a","title":"T","retrieval_date":"2024-02-30"})"), MalformedRecord);
    EXPECT_THROW(parse_jsonl(R"({"id":"a","title":"T","retrieval_date":"yesterday"})"), MalformedRecord);
    EXPECT_THROW(parse_jsonl(R"({"id":"a","title":"T","country":"DEU","retrieval_date":"2024-01-01"})"),
                 MalformedRecord);
    EXPECT_THROW(parse_jsonl(R"({"id":"a","title":"T","language":"E","retrieval_date":"2024-01-01"})"),
                 MalformedRecord);
}

TEST(Dates, TimeComponentTruncated) {
    EXPECT_EQ(parse_date("2024-03-01T12:30:00Z"), day(2024, 3, 1));
    EXPECT_EQ(parse_date("2024-03-01 23:59"), day(2024, 3, 1));
    EXPECT_FALSE(parse_date("2024-03-01X"));
    EXPECT_FALSE(parse_date("2024-3-1"));
    EXPECT_EQ(parse_date("2024-02-29"), day(2024, 2, 29));
    EXPECT_FALSE(parse_date("2023-02-29"));
    EXPECT_EQ(format_date(day(2024, 3, 1)), "2024-03-01");
}

TEST(LanguageCodes, Validation) {
    for (auto ok : {"en", "deu", "pt-BR", "zh-Hant", "und"}) EXPECT_TRUE(is_valid_language_code(ok)) << ok;
    for (auto bad : {"", "e", "engl", "EN", "en-", "en_US"}) EXPECT_FALSE(is_valid_language_code(bad)) << bad;
}

TEST(LoadPostings, CsvHeaderAnyOrderAndEmptyCellsMissing) {
    auto ps = parse_csv(
        "source,id,title,description,company,location,country,language,retrieval_date\n"
        "portal,c1,\"Cook, line\",\"multi\nline\",,Paris,FR,fr,2024-05-06\n");
    ASSERT_EQ(ps.size(), 1u);
    EXPECT_EQ(ps[0].id, "c1");
    EXPECT_EQ(ps[0].title, "Cook, line");
    EXPECT_EQ(ps[0].description, "multi\nline");
    EXPECT_FALSE(ps[0].company);
    EXPECT_EQ(ps[0].location, "Paris");
}

TEST(LoadPostings, CsvErrors) {
    EXPECT_THROW(parse_csv("id,title\n"), MalformedRecord);
    EXPECT_THROW(parse_csv("id,title,description,company,location,country,language,retrieval_date,source,extra\n"),
                 MalformedRecord);
    try {
        parse_csv("id,title,description,company,location,country,language,retrieval_date,source\n"
                  "a,T,,,,,,2024-01-01,p\n"
                  "b,T,,,,,2024-01-01,p\n");
        FAIL();
    } catch (const MalformedRecord& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_csv("id,title,description,company,location,country,language,retrieval_date,source\n"
                           "a,T,,,,,,2024-01-01,p\n"
                           "a,U,,,,,,2024-01-01,p\n"),
                 DuplicateId);
}

namespace {

Posting random_posting(std::mt19937_64& rng, std::size_t i) {
    static const std::vector<std::string> words{"Chef", "cook", "\"quoted\"", "a,b", "line\nbreak", "caf\xC3\xA9",
                                                "{json}", "\\slash", "tab\there", "plain"};
    auto text = [&](std::size_t n) {
        std::string s;
        for (std::size_t k = 0; k < n; ++k) s += (k ? " " : "") + words[rng() % words.size()];
        return s;
    };
    auto maybe = [&](std::string v) -> std::optional<std::string> {
        if (rng() % 3 == 0) return std::nullopt;
        return v;
    };
    Posting p;
    p.id = "id" + std::to_string(i);
    p.title = rng() % 5 == 0 ? "" : text(1 + rng() % 4);
    p.description = p.title.empty() ? text(3) : (rng() % 4 == 0 ? "" : text(rng() % 20));
    p.company = maybe(text(2));
    p.location = maybe(text(1));
    p.country = maybe(rng() % 2 ? "DE" : "fr");
    p.language = maybe(rng() % 2 ? "de" : "pt-BR");
    p.retrieval_date = std::chrono::sys_days{day(2023, 1, 1)} + std::chrono::days{rng() % 700};
    p.source = rng() % 2 ? "portal" : "";
    return p;
}

}  // namespace

TEST(LoadPostings, RoundTripFidelityBothFormats) {
    std::mt19937_64 rng(11);
    std::vector<Posting> ps;
    for (std::size_t i = 0; i < 500; ++i) ps.push_back(random_posting(rng, i));
    testutil::TempDir dir;
    for (auto fmt : {CorpusFormat::Jsonl, CorpusFormat::Csv}) {
        auto path = dir.file(fmt == CorpusFormat::Jsonl ? "c.jsonl" : "c.csv");
        save_postings(path, ps, fmt);
        auto back = load_postings(path, fmt);
        EXPECT_EQ(back, ps);
        save_postings(path + "2", back, fmt);
        EXPECT_EQ(testutil::read_file(path), testutil::read_file(path + "2"));
    }
}

TEST(PairCount, Values) {
    EXPECT_EQ(to_string(pair_count(112000)), "6271944000");
    EXPECT_EQ(to_string(pair_count(61500)), "1891094250");
    EXPECT_EQ(pair_count(1), 0u);
    EXPECT_EQ(pair_count(0), 0u);
    EXPECT_EQ(to_string(pair_count(1000000000)), "499999999500000000");
    // (2^64 - 1)(2^63 - 1) = 2^127 - 3 * 2^63 + 1
    EXPECT_EQ(to_string(pair_count(UINT64_MAX)), "170141183460469231704017187605319778305");
}

TEST(PairCount, Telescoping) {
    std::mt19937_64 rng(3);
    for (std::uint64_t n = 0; n < 5000; ++n) ASSERT_EQ(pair_count(n + 1) - pair_count(n), n);
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t n = rng() >> 2;
        ASSERT_EQ(pair_count(n + 1) - pair_count(n), static_cast<u128>(n));
    }
}

TEST(PairCount, UniqueTextReduction) {
    double reduction = 1.0 - double(pair_count(61500)) / double(pair_count(112000));
    EXPECT_NEAR(reduction, 0.69848, 0.00001);
    EXPECT_NEAR(reduction * 100.0, 70.0, 0.2);
}

TEST(CorpusStats, LanguageHistogram) {
    std::vector<Posting> ps{testutil::posting("1", "a"), testutil::posting("2", "b"), testutil::posting("3", "c"),
                            testutil::posting("4", "d")};
    ps[0].language = "de";
    ps[1].language = "de";
    ps[2].language = "en";
    auto s = corpus_stats(ps, [](std::string_view t) { return tokenize(t); });
    EXPECT_EQ(s.language_histogram, (std::map<std::string, std::size_t>{{"de", 2}, {"en", 1}, {"und", 1}}));
    EXPECT_EQ(s.n_postings, 4u);
}

TEST(CorpusStats, MissingCompanyFraction) {
    std::vector<Posting> ps{testutil::posting("1", "a")};
    auto s = corpus_stats(ps, [](std::string_view t) { return tokenize(t); });
    EXPECT_DOUBLE_EQ(s.missing_company_fraction, 1.0);
    EXPECT_DOUBLE_EQ(s.missing_location_fraction, 1.0);
    auto empty = corpus_stats({}, [](std::string_view t) { return tokenize(t); });
    EXPECT_EQ(empty.n_postings, 0u);
    EXPECT_DOUBLE_EQ(empty.missing_company_fraction, 0.0);
}

TEST(CorpusStats, TenThousandPostingsAgainstSinglePassCounter) {
    std::mt19937_64 rng(5);
    std::vector<Posting> ps;
    const std::vector<std::string> langs{"de", "en", "fr", "pl"};
    for (std::size_t i = 0; i < 10000; ++i) {
        auto p = testutil::posting("p" + std::to_string(i), "t");
        std::size_t n_words = rng() % 600;
        std::string d;
        for (std::size_t w = 0; w < n_words; ++w) d += "w ";
        p.description = d;
        if (rng() % 5) p.language = langs[rng() % langs.size()];
        if (rng() % 4 == 0) p.company = "c";
        if (rng() % 2 == 0) p.location = "l";
        ps.push_back(p);
    }
    auto s = corpus_stats(ps, [](std::string_view t) { return tokenize(t); });

    // independent counter: title "t" is one token, description n_words tokens
    std::map<std::string, std::size_t> lang;
    std::map<std::size_t, std::size_t> hist;
    std::size_t no_company = 0, no_location = 0;
    for (const auto& p : ps) {
        ++lang[p.language ? *p.language : "und"];
        std::size_t tokens = 1 + std::count(p.description.begin(), p.description.end(), 'w');
        hist[tokens - tokens % 64]++;
        no_company += !p.company.has_value();
        no_location += !p.location.has_value();
    }
    EXPECT_EQ(s.language_histogram, lang);
    EXPECT_EQ(s.token_count_histogram, hist);
    std::size_t total_lang = 0, total_hist = 0;
    for (auto& [k, v] : s.language_histogram) total_lang += v;
    for (auto& [k, v] : s.token_count_histogram) total_hist += v;
    EXPECT_EQ(total_lang, 10000u);
    EXPECT_EQ(total_hist, 10000u);
    EXPECT_DOUBLE_EQ(s.missing_company_fraction, no_company / 10000.0);
    EXPECT_DOUBLE_EQ(s.missing_location_fraction, no_location / 10000.0);
    EXPECT_GE(s.missing_company_fraction, 0.0);
    EXPECT_LE(s.missing_company_fraction, 1.0);
}
