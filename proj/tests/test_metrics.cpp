#include <doctest.h>

#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "agentgeo/engine.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/metrics.hpp"

#include "support/helpers.hpp"

using namespace agentgeo;
using namespace agentgeo::metrics;

// ===== brute-force oracles, sharing nothing with the implementation =====

namespace {

std::vector<std::string> oracle_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current += static_cast<char>(std::tolower(c));
        } else if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

double oracle_jaccard(const std::string& a, const std::string& b) {
    const auto ta = oracle_tokens(a);
    const auto tb = oracle_tokens(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::set<std::string> unions = sa;
    unions.insert(sb.begin(), sb.end());
    double intersection = 0.0;
    for (const auto& token : sa)
        if (sb.count(token)) intersection += 1.0;
    return intersection / static_cast<double>(unions.size());
}

double oracle_tfidf_cosine(const std::string& a, const std::string& b,
                           const std::vector<std::string>& corpus) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& text : corpus) docs.push_back(oracle_tokens(text));
    docs.push_back(oracle_tokens(a));
    docs.push_back(oracle_tokens(b));
    const double n = static_cast<double>(docs.size());

    std::set<std::string> vocabulary;
    for (const auto& doc : docs)
        for (const auto& token : doc) vocabulary.insert(token);

    auto weigh = [&](const std::vector<std::string>& doc,
                     const std::string& term) {
        if (doc.empty()) return 0.0;
        double count = 0.0;
        for (const auto& token : doc)
            if (token == term) count += 1.0;
        if (count == 0.0) return 0.0;
        double df = 0.0;
        for (const auto& other : docs) {
            for (const auto& token : other) {
                if (token == term) {
                    df += 1.0;
                    break;
                }
            }
        }
        const double tf = count / static_cast<double>(doc.size());
        const double idf = std::log((1.0 + n) / (1.0 + df)) + 1.0;
        return tf * idf;
    };

    const auto& da = docs[docs.size() - 2];
    const auto& db = docs[docs.size() - 1];
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& term : vocabulary) {
        const double wa = weigh(da, term);
        const double wb = weigh(db, term);
        dot += wa * wb;
        na += wa * wa;
        nb += wb * wb;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double value = dot / (std::sqrt(na) * std::sqrt(nb));
    if (value < 0.0) value = 0.0;
    if (value > 1.0) value = 1.0;
    return value;
}

struct OracleContribution {
    double word = 0.0;
    double pos = 0.0;
    double wordpos = 0.0;
};

OracleContribution oracle_contribution(const engine::GeneratedAnswer& answer,
                                       int target) {
    const double n = static_cast<double>(answer.sentences.size());
    double wn = 0.0, wd = 0.0, pn = 0.0, pd = 0.0, wpn = 0.0, wpd = 0.0;
    for (std::size_t i = 0; i < answer.sentences.size(); ++i) {
        const auto& sentence = answer.sentences[i];
        const double w =
            static_cast<double>(oracle_tokens(sentence.text).size());
        const double p = std::exp(-static_cast<double>(i) / n);
        wd += w;
        pd += p;
        wpd += w * p;
        if (sentence.citations.count(target)) {
            const double share =
                1.0 / static_cast<double>(sentence.citations.size());
            wn += w * share;
            pn += p * share;
            wpn += w * p * share;
        }
    }
    OracleContribution result;
    if (wd > 0.0) result.word = wn / wd;
    if (pd > 0.0) result.pos = pn / pd;
    if (wpd > 0.0) result.wordpos = wpn / wpd;
    return result;
}

// Noisy token soup: mixed case, punctuation separators, numerals.
std::string noisy_text(std::mt19937_64& rng, int max_tokens) {
    static const std::vector<std::string> vocab = {
        "alpaca", "Baseline", "criteria", "DATASET", "engine", "fabric",
        "grammar", "harvest", "insight", "junction", "kernel", "42",
        "measure", "2024", "orchard", "paradigm", "quartz", "ratio",
    };
    static const std::vector<std::string> seps = {" ", ", ", "; ", " - ",
                                                  "\n", "'", "! "};
    std::uniform_int_distribution<int> count(0, max_tokens);
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
    std::uniform_int_distribution<std::size_t> sep(0, seps.size() - 1);
    std::string out;
    const int tokens = count(rng);
    for (int i = 0; i < tokens; ++i) {
        if (!out.empty()) out += seps[sep(rng)];
        out += vocab[word(rng)];
    }
    return out;
}

engine::GeneratedAnswer random_answer(std::mt19937_64& rng) {
    engine::GeneratedAnswer answer;
    answer.mode = engine::CitationMode::InContext;
    std::uniform_int_distribution<int> sentence_count(1, 5);
    std::uniform_int_distribution<int> sources(1, 5);
    std::uniform_int_distribution<int> cite_count(0, 3);
    answer.source_count = sources(rng);
    // Citation values may exceed the source count; the metric reads the set
    // as written.
    std::uniform_int_distribution<int> cite_value(1, answer.source_count + 2);
    const int n = sentence_count(rng);
    for (int i = 0; i < n; ++i) {
        engine::Sentence sentence;
        sentence.text = noisy_text(rng, 12);
        const int cites = cite_count(rng);
        for (int c = 0; c < cites; ++c)
            sentence.citations.insert(cite_value(rng));
        answer.sentences.push_back(sentence);
    }
    return answer;
}

} // namespace

// ===== hand-computed fixtures =====

TEST_CASE("jaccard on hand-computed pairs") {
    CHECK(jaccard("apple banana", "banana cherry") ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(jaccard("", "") == doctest::Approx(1.0));
    CHECK(jaccard("apple", "") == doctest::Approx(0.0));
    CHECK(jaccard("Apple, BANANA!", "apple banana") == doctest::Approx(1.0));
    // Duplicates collapse: unique-token sets.
    CHECK(jaccard("apple apple apple", "apple") == doctest::Approx(1.0));
}

TEST_CASE("contribution on a hand-computed two-sentence answer") {
    engine::GeneratedAnswer answer;
    answer.source_count = 2;
    engine::Sentence s0;
    s0.text = "alpha beta gamma";
    s0.citations = {1};
    engine::Sentence s1;
    s1.text = "delta epsilon";
    s1.citations = {1, 2};
    answer.sentences = {s0, s1};

    const double p0 = 1.0;               // exp(-0/2)
    const double p1 = std::exp(-0.5);    // exp(-1/2)

    const Contribution first = contribution(answer, 1);
    CHECK(first.word == doctest::Approx((3.0 + 2.0 * 0.5) / 5.0));
    CHECK(first.pos == doctest::Approx((p0 + p1 * 0.5) / (p0 + p1)));
    CHECK(first.wordpos == doctest::Approx((3.0 * p0 + 2.0 * p1 * 0.5) /
                                           (3.0 * p0 + 2.0 * p1)));

    const Contribution second = contribution(answer, 2);
    CHECK(second.word == doctest::Approx(1.0 / 5.0));
    CHECK(second.pos == doctest::Approx(p1 * 0.5 / (p0 + p1)));
    CHECK(second.wordpos ==
          doctest::Approx(2.0 * p1 * 0.5 / (3.0 * p0 + 2.0 * p1)));
}

TEST_CASE("contribution guards its domain") {
    engine::GeneratedAnswer answer;
    answer.source_count = 2;
    try {
        contribution(answer, 1);
        FAIL("expected an undefined-metric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UndefinedMetric);
    }

    engine::Sentence sentence;
    sentence.text = "some words";
    answer.sentences.push_back(sentence);
    for (int target : {0, -3, 3}) {
        CAPTURE(target);
        try {
            contribution(answer, target);
            FAIL("expected a range error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Range);
        }
    }

    // Sentences with no tokens zero the word denominators, not the metric
    // call itself.
    engine::GeneratedAnswer hollow;
    hollow.source_count = 1;
    engine::Sentence bare;
    bare.text = "...";
    bare.citations = {1};
    hollow.sentences = {bare};
    const Contribution c = contribution(hollow, 1);
    CHECK(c.word == doctest::Approx(0.0));
    CHECK(c.pos == doctest::Approx(1.0));
}

TEST_CASE("citation rate is the cited fraction and needs data") {
    CHECK(citation_rate({true, false, true, true}) == doctest::Approx(0.75));
    CHECK(citation_rate({false}) == doctest::Approx(0.0));
    CHECK(citation_rate({true}) == doctest::Approx(1.0));
    try {
        citation_rate({});
        FAIL("expected an undefined-metric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UndefinedMetric);
    }
}

TEST_CASE("tfidf cosine endpoints") {
    const std::vector<std::string> corpus = {"alpha beta", "gamma delta"};
    CHECK(tfidf_cosine("same words here", "same words here", corpus) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tfidf_cosine("alpha beta", "gamma delta", {}) ==
          doctest::Approx(0.0));

    testsupport::LogCapture logs;
    CHECK(tfidf_cosine("", "alpha", corpus) == doctest::Approx(0.0));
    CHECK(logs.saw("zero vector"));
}

// ===== the randomized oracle equivalence (1,000+ instances each) =====

TEST_CASE("jaccard matches the oracle on a thousand random pairs") {
    std::mt19937_64 rng(71003);
    for (int round = 0; round < 1000; ++round) {
        const std::string a = noisy_text(rng, 50);
        const std::string b = noisy_text(rng, 50);
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(jaccard(a, b) ==
                doctest::Approx(oracle_jaccard(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("tfidf cosine matches the oracle on a thousand random pairs") {
    std::mt19937_64 rng(82114);
    std::uniform_int_distribution<int> corpus_size(0, 4);
    for (int round = 0; round < 1000; ++round) {
        std::vector<std::string> corpus;
        const int extras = corpus_size(rng);
        for (int i = 0; i < extras; ++i)
            corpus.push_back(noisy_text(rng, 30));
        const std::string a = noisy_text(rng, 50);
        const std::string b = noisy_text(rng, 50);
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(tfidf_cosine(a, b, corpus) ==
                doctest::Approx(oracle_tfidf_cosine(a, b, corpus))
                    .epsilon(1e-9));
    }
}

TEST_CASE("contribution matches the oracle on a thousand random answers") {
    std::mt19937_64 rng(93225);
    for (int round = 0; round < 1000; ++round) {
        const engine::GeneratedAnswer answer = random_answer(rng);
        std::uniform_int_distribution<int> target_pick(1,
                                                       answer.source_count);
        const int target = target_pick(rng);
        CAPTURE(round);
        CAPTURE(target);
        const Contribution got = contribution(answer, target);
        const OracleContribution expected =
            oracle_contribution(answer, target);
        REQUIRE(got.word ==
                doctest::Approx(expected.word).epsilon(1e-9));
        REQUIRE(got.pos == doctest::Approx(expected.pos).epsilon(1e-9));
        REQUIRE(got.wordpos ==
                doctest::Approx(expected.wordpos).epsilon(1e-9));
    }
}

// ===== embeddings =====

TEST_CASE("the offline embedder is unit-norm and deterministic") {
    const Embedder embed = mock_embedder();
    const auto v1 = embed("alpaca fabric kernel");
    const auto v2 = embed("alpaca fabric kernel");
    REQUIRE(v1.size() == 256);
    CHECK(v1 == v2);
    double norm = 0.0;
    for (const double x : v1) norm += x * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));

    // No tokens: the zero vector.
    const auto empty = embed("...!?");
    CHECK(*std::max_element(empty.begin(), empty.end()) == 0.0);
}

TEST_CASE("embedding cosine clamps to the unit interval") {
    const Embedder embed = mock_embedder();
    CHECK(embed_cosine("same text", "same text", embed) ==
          doctest::Approx(1.0));
    const double other = embed_cosine("alpaca kernel", "quartz orchard",
                                      embed);
    CHECK(other >= 0.0);
    CHECK(other <= 1.0);

    testsupport::LogCapture logs;
    CHECK(embed_cosine("", "alpaca", embed) == doctest::Approx(0.0));
    CHECK(logs.saw("zero vector"));

    const Embedder lopsided = [](const std::string& text) {
        return std::vector<double>(text.size() % 7 + 1, 1.0);
    };
    try {
        embed_cosine("abc", "defg", lopsided);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

// ===== faithfulness over documents =====

TEST_CASE("faithfulness compares extracted text, not markup") {
    const std::string original =
        "<html><body><p>alpaca fleece handbook with care instructions"
        "</p></body></html>";
    const std::string reformatted =
        "<html><body><ul><li>alpaca fleece handbook</li><li>with care "
        "instructions</li></ul></body></html>";
    const Faithfulness same = faithfulness(original, original, {},
                                           mock_embedder());
    CHECK(same.jaccard == doctest::Approx(1.0));
    CHECK(same.tfidf == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(same.embed == doctest::Approx(1.0));

    // Pure re-structuring keeps the token sets identical.
    const Faithfulness restructured =
        faithfulness(original, reformatted, {}, mock_embedder());
    CHECK(restructured.jaccard == doctest::Approx(1.0));

    try {
        faithfulness(original, "<html><body><script>x()</script></body></html>",
                     {}, mock_embedder());
        FAIL("expected an undefined-metric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UndefinedMetric);
    }
}

TEST_CASE("small insertions into a diverse document stay faithful") {
    // 100 distinct tokens, then an edit inserting five new ones (5%).
    std::string body;
    for (int i = 0; i < 100; ++i)
        body += "token" + std::to_string(i) + " ";
    const std::string original =
        "<html><body><p>" + body + "</p></body></html>";
    const std::string edited = "<html><body><p>" + body +
                               " extra1 extra2 extra3 extra4 extra5"
                               "</p></body></html>";
    const Faithfulness f = faithfulness(original, edited, {},
                                        mock_embedder());
    CHECK(f.jaccard == doctest::Approx(100.0 / 105.0));
    CHECK(f.jaccard >= 0.80);
    CHECK(f.tfidf > 0.9);
}

TEST_CASE("metric reports default to not-applicable") {
    const MetricReport report;
    CHECK_FALSE(report.cr.has_value());
    CHECK_FALSE(report.word.has_value());
    CHECK_FALSE(report.pos.has_value());
    CHECK_FALSE(report.wordpos.has_value());
    CHECK_FALSE(report.tfidf.has_value());
    CHECK_FALSE(report.embed.has_value());
    CHECK_FALSE(report.jaccard.has_value());
}
