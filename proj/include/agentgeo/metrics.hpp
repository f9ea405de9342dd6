#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "agentgeo/engine.hpp"

namespace agentgeo::metrics {

using Embedder = std::function<std::vector<double>(const std::string&)>;

// Deterministic offline embedder: hashed bag of words (FNV-1a modulo 256),
// L2-normalized. A real embedding endpoint can be plugged in instead.
Embedder mock_embedder();

// Fraction of outcomes where the target was cited. Raises UndefinedMetric on
// an empty list: no evaluations is not the same as zero citations.
double citation_rate(const std::vector<bool>& cited);

// Per-answer contribution of source `target_index` (1-based). Sentence i of
// n carries word mass w_i (token count) and position weight
// p_i = exp(-(i-1)/n); a citation set of size |C_i| splits the sentence's
// mass equally across the cited sources. Sentences citing nothing count only
// toward the denominators.
struct Contribution {
    double word = 0.0;
    double pos = 0.0;
    double wordpos = 0.0;
};

Contribution contribution(const engine::GeneratedAnswer& answer,
                          int target_index);

// |A ∩ B| / |A ∪ B| over unique lowercased alphanumeric tokens; two empty
// sets are identical, hence 1.0.
double jaccard(const std::string& a, const std::string& b);

// Cosine over tf-idf vectors with tf = count / doc_length and
// idf = ln((1+N)/(1+df)) + 1, statistics over `corpus` plus the two compared
// texts. A zero vector yields 0.0 with a warning.
double tfidf_cosine(const std::string& a, const std::string& b,
                    const std::vector<std::string>& corpus);

// Cosine of the two embeddings, clamped to [0, 1] for reporting.
double embed_cosine(const std::string& a, const std::string& b,
                    const Embedder& embedder);

// All three similarity metrics over the extracted text of the two documents.
// Raises UndefinedMetric when either extracts to empty text.
struct Faithfulness {
    double tfidf = 0.0;
    double embed = 0.0;
    double jaccard = 0.0;
};

Faithfulness faithfulness(const std::string& original_html,
                          const std::string& optimized_html,
                          const std::vector<std::string>& corpus_texts,
                          const Embedder& embedder);

// Absent means not applicable for the evaluated configuration, not zero.
struct MetricReport {
    std::optional<double> cr;
    std::optional<double> word;
    std::optional<double> pos;
    std::optional<double> wordpos;
    std::optional<double> tfidf;
    std::optional<double> embed;
    std::optional<double> jaccard;
};

} // namespace agentgeo::metrics
