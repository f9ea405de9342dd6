#include "agentgeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "agentgeo/chunker.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/text.hpp"

namespace agentgeo::metrics {

Embedder mock_embedder() {
    return [](const std::string& text) {
        std::vector<double> vec(256, 0.0);
        for (const auto& token : tokenize(text))
            vec[fnv1a64(token) % 256] += 1.0;
        double norm = 0.0;
        for (const double v : vec) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& v : vec) v /= norm;
        return vec;
    };
}

double citation_rate(const std::vector<bool>& cited) {
    if (cited.empty())
        raise(ErrorKind::UndefinedMetric,
              "citation rate over zero evaluations");
    const auto hits = std::count(cited.begin(), cited.end(), true);
    return static_cast<double>(hits) / static_cast<double>(cited.size());
}

Contribution contribution(const engine::GeneratedAnswer& answer,
                          int target_index) {
    if (answer.sentences.empty())
        raise(ErrorKind::UndefinedMetric,
              "contribution over an answer with no sentences");
    if (target_index < 1 || target_index > answer.source_count)
        raise(ErrorKind::Range, "target index " + std::to_string(target_index) +
                                    " outside [1, " +
                                    std::to_string(answer.source_count) + "]");

    const std::size_t n = answer.sentences.size();
    double word_num = 0.0, word_den = 0.0;
    double pos_num = 0.0, pos_den = 0.0;
    double wordpos_num = 0.0, wordpos_den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sentence = answer.sentences[i];
        const double w = static_cast<double>(tokenize(sentence.text).size());
        const double p = std::exp(-static_cast<double>(i) /
                                  static_cast<double>(n));
        word_den += w;
        pos_den += p;
        wordpos_den += w * p;
        if (sentence.citations.count(target_index)) {
            const double share =
                1.0 / static_cast<double>(sentence.citations.size());
            word_num += w * share;
            pos_num += p * share;
            wordpos_num += w * p * share;
        }
    }
    Contribution result;
    result.word = word_den > 0.0 ? word_num / word_den : 0.0;
    result.pos = pos_den > 0.0 ? pos_num / pos_den : 0.0;
    result.wordpos = wordpos_den > 0.0 ? wordpos_num / wordpos_den : 0.0;
    return result;
}

double jaccard(const std::string& a, const std::string& b) {
    const auto ta = tokenize(a);
    const auto tb = tokenize(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t intersection = 0;
    for (const auto& token : sa)
        if (sb.count(token)) ++intersection;
    const std::size_t unions = sa.size() + sb.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

namespace {

std::map<std::string, double> tfidf_vector(
    const std::vector<std::string>& tokens,
    const std::map<std::string, int>& df, std::size_t corpus_size) {
    std::map<std::string, double> vec;
    if (tokens.empty()) return vec;
    std::map<std::string, int> counts;
    for (const auto& token : tokens) ++counts[token];
    const double length = static_cast<double>(tokens.size());
    for (const auto& [token, count] : counts) {
        const auto it = df.find(token);
        const int doc_freq = it == df.end() ? 0 : it->second;
        const double idf =
            std::log((1.0 + static_cast<double>(corpus_size)) /
                     (1.0 + static_cast<double>(doc_freq))) +
            1.0;
        vec[token] = (static_cast<double>(count) / length) * idf;
    }
    return vec;
}

double cosine(const std::map<std::string, double>& a,
              const std::map<std::string, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [token, value] : a) {
        na += value * value;
        const auto it = b.find(token);
        if (it != b.end()) dot += value * it->second;
    }
    for (const auto& [token, value] : b) nb += value * value;
    if (na == 0.0 || nb == 0.0) {
        log_warn("cosine over a zero vector; reporting 0.0");
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

double tfidf_cosine(const std::string& a, const std::string& b,
                    const std::vector<std::string>& corpus) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.size() + 2);
    for (const auto& text : corpus) docs.push_back(tokenize(text));
    docs.push_back(tokenize(a));
    docs.push_back(tokenize(b));

    std::map<std::string, int> df;
    for (const auto& tokens : docs) {
        const std::set<std::string> unique(tokens.begin(), tokens.end());
        for (const auto& token : unique) ++df[token];
    }

    const auto va = tfidf_vector(docs[docs.size() - 2], df, docs.size());
    const auto vb = tfidf_vector(docs[docs.size() - 1], df, docs.size());
    return std::clamp(cosine(va, vb), 0.0, 1.0);
}

double embed_cosine(const std::string& a, const std::string& b,
                    const Embedder& embedder) {
    const auto va = embedder(a);
    const auto vb = embedder(b);
    if (va.size() != vb.size())
        raise(ErrorKind::Config, "embedder returned mismatched dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    if (na == 0.0 || nb == 0.0) {
        log_warn("embedding cosine over a zero vector; reporting 0.0");
        return 0.0;
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

Faithfulness faithfulness(const std::string& original_html,
                          const std::string& optimized_html,
                          const std::vector<std::string>& corpus_texts,
                          const Embedder& embedder) {
    const std::string original = chunker::extract_text(original_html);
    const std::string optimized = chunker::extract_text(optimized_html);
    if (trim(original).empty() || trim(optimized).empty())
        raise(ErrorKind::UndefinedMetric,
              "faithfulness over a document with no extractable text");

    Faithfulness result;
    result.tfidf = tfidf_cosine(original, optimized, corpus_texts);
    result.embed = embed_cosine(original, optimized, embedder);
    result.jaccard = jaccard(original, optimized);
    return result;
}

} // namespace agentgeo::metrics
