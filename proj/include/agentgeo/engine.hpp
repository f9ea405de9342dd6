#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agentgeo/corpus.hpp"
#include "agentgeo/llm.hpp"

namespace agentgeo::engine {

enum class CitationMode { InContext, AttrFirst };

const char* to_string(CitationMode mode);
std::optional<CitationMode> parse_citation_mode(const std::string& label);

struct Sentence {
    std::string text;
    std::set<int> citations; // 1-based source indices
};

struct GeneratedAnswer {
    std::string full_text;
    std::vector<Sentence> sentences;
    CitationMode mode = CitationMode::InContext;
    int source_count = 0;
    std::vector<std::string> warnings; // dropped citations, lenient parses
};

struct CitationOutcome {
    std::string query_id;
    std::string target_id;
    std::vector<std::string> ranked_candidates; // webpage ids, best rank first
    GeneratedAnswer answer;
    std::set<std::string> cited_ids;
    bool target_cited = false;
};

// Supplies document HTML by webpage id. Overlays let a repair loop substitute
// its surrogate copy for the target without touching the shared corpus.
using DocumentProvider = std::function<std::string(const std::string&)>;

DocumentProvider dataset_provider(const corpus::Dataset& dataset);
DocumentProvider overlay_provider(DocumentProvider base, std::string page_id,
                                  std::string html);

// Okapi BM25 (k1 = 1.2, b = 0.75) with idf = ln(1 + (N - df + 0.5)/(df + 0.5)),
// statistics over exactly the documents given. Exposed for verification.
std::vector<double> bm25_scores(const std::string& query_text,
                                const std::vector<std::string>& document_texts);

// Top-k candidate ids by BM25 over extracted text, ties broken by pool order.
// Raises Retrieval for an empty pool or k < 1.
std::vector<std::string> retrieve(const std::string& query_text,
                                  const std::vector<std::string>& pool,
                                  const DocumentProvider& docs, int k);

// Splits a generation into sentences with their citation sets. Terminal
// punctuation (. ! ?) followed by whitespace or end closes a sentence;
// bracket groups of integers in both the [1][2] and [1, 2] forms are
// citations and are stripped from the text; any other bracket span is
// literal text. Pure: indices are reported as written, without range checks.
std::vector<Sentence> parse_citations(const std::string& text);

// Inline-citation generation over the ranked sources (extracted text,
// numbered [1].. in rank order). Citations outside [1, source_count] are
// dropped with a warning. Raises GenerationFormat when the response yields
// no sentences.
GeneratedAnswer generate_incontext(const std::string& query_text,
                                   const std::vector<std::string>& source_texts,
                                   llm::Adapter& adapter);

// Attribute-first generation: chunk selection over "doc_id-chunk_id" indices,
// highlight clustering (at least two clusters, one retry), then one generated
// sentence per cluster citing the documents that contributed its highlights.
GeneratedAnswer generate_attr_first(const std::string& query_text,
                                    const std::vector<std::string>& source_htmls,
                                    llm::Adapter& adapter);

// The citation indicator: 1 iff the target is cited for this query. A target
// that misses the top-k is 0 with an empty answer and no generation call.
// Raises Config when the target is not in the pool.
struct VerifyResult {
    int value = 0;
    CitationOutcome outcome;
};

VerifyResult verify_citation(const corpus::QueryRecord& query,
                             const std::string& target_id,
                             const std::vector<std::string>& pool,
                             CitationMode mode, int k,
                             const DocumentProvider& docs,
                             llm::Adapter& adapter);

} // namespace agentgeo::engine
