#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agentgeo/corpus.hpp"
#include "agentgeo/llm.hpp"

namespace agentgeo::querygen {

struct KeywordCluster {
    std::vector<std::string> core;
    std::vector<std::string> lsi_synonyms;
    std::vector<std::string> keyphrases;
};

struct Persona {
    std::string name; // never empty; nameless personas are dropped with a warning
    std::string description;
};

struct Profile {
    KeywordCluster cluster;
    std::vector<Persona> personas;
};

// Title-anchored profile extraction. Raises ProfileFailure for an empty
// title or when the parsed core keyword list is empty, Format for a response
// without a parseable JSON object.
Profile extract_profile(const std::string& title, llm::Adapter& adapter);

struct IntentDecision {
    std::vector<corpus::QueryIntent> intents; // deduped, declaration order
    std::string reasoning;
};

// Which of the four search intents the page satisfies; possibly none.
// Unknown labels are dropped with a warning; a response without an intents
// line yields the empty subset, never an error.
IntentDecision classify_intents(const std::string& title,
                                const std::string& summary,
                                llm::Adapter& adapter);

// Five queries per applicable intent for one (keyword, persona) pair. The
// result always carries all four intents; non-applicable ones map to empty
// lists (entries under them are dropped with a warning). Short lists are
// accepted with a warning, long ones truncated to five. Raises Config for an
// empty intent list, Format for an unparseable response.
std::map<corpus::QueryIntent, std::vector<std::string>> generate_queries(
    const std::string& keyword, const Persona& persona,
    const std::vector<corpus::QueryIntent>& intents, llm::Adapter& adapter);

// Case-insensitive exact duplicate removal; the first spelling survives.
std::vector<std::string> exact_dedup(const std::vector<std::string>& queries);

// Semantic deduplication: exact_dedup, then one model pass that may only
// select representatives from its input. The result is re-ordered to first
// occurrence in the input. A response containing a string absent from the
// input is retried once, then raises DedupIntegrity.
std::vector<std::string> deduplicate(const std::vector<std::string>& queries,
                                     llm::Adapter& adapter);

struct FilterResult {
    std::vector<std::string> relevant;
    std::vector<std::string> filtered;
};

// Broad default-keep relevance filter. The two output lists must partition
// the input as multisets; a violating or unparseable response is retried
// once, after which everything is kept with a warning. Both lists come back
// in input order.
FilterResult domain_filter(const std::vector<std::string>& queries,
                           const std::string& doc_title,
                           const std::string& doc_summary,
                           llm::Adapter& adapter);

struct QuerygenConfig {
    int target = 60; // stratified sample size per page
    std::uint64_t seed = 0;
    corpus::SplitMode split_mode = corpus::SplitMode::Standard;
    std::vector<std::string> reserve_personas; // OOD train personas, optional
};

// The full pipeline for one page: profile -> intents -> per-(persona, core
// keyword) generation -> exact dedup -> semantic dedup -> domain filter ->
// stratified sample (intent primary, persona secondary, deterministic given
// seed) -> train/test split. Returns train records then test records, ids
// assigned as "<page_id>-qNNN". A page satisfying no intent, or a profile
// with no personas, yields an empty set with a warning. Upstream errors
// propagate with a stage label prefixed to the message.
std::vector<corpus::QueryRecord> assemble_query_set(
    const corpus::Webpage& webpage, const QuerygenConfig& config,
    llm::Adapter& adapter);

} // namespace agentgeo::querygen
