#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentgeo/chunker.hpp"
#include "agentgeo/corpus.hpp"
#include "agentgeo/diagnosis.hpp"
#include "agentgeo/engine.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/llm.hpp"

namespace agentgeo::optimizer {

enum class ConflictStrategy { DiagnosisAware, Voting };

const char* to_string(ConflictStrategy strategy);
std::optional<ConflictStrategy> parse_conflict_strategy(const std::string& label);

struct OptimizerConfig {
    int batch_size = 5;     // B: queries per batch
    int max_iterations = 5; // T_max: repair iterations per query
    engine::CitationMode citation_mode = engine::CitationMode::InContext;
    bool memory_enabled = true;
    ConflictStrategy conflict_strategy = ConflictStrategy::DiagnosisAware;
    int retrieval_k = 5;
    std::uint64_t seed = 0;
    int workers = 1; // repair loops run concurrently within a batch when > 1
};

// At most one per query per batch: the chunk fragment whose installation made
// the surrogate citable, addressed in the frozen index space.
struct EditSuggestion {
    std::string query_id;
    int query_ordinal = 0; // position of the query in the batch input order
    diagnosis::RootCause root_cause = diagnosis::RootCause::Unknown;
    diagnosis::Severity severity = diagnosis::Severity::Medium;
    double confidence = 0.5;
    int target_chunk_index = -1;
    std::string fragment_html;
    std::vector<std::string> summary;
    std::string tool_id;
};

// Deterministic conflict resolution at the batch barrier: one edit per chunk.
// DiagnosisAware ranks by (severity, confidence, lowest query ordinal);
// Voting picks the fragment proposed by the most queries, severity then
// ordinal as tiebreaks. Suggestions are ordinal-sorted first, so the result
// does not depend on the scheduling of concurrent repair loops.
std::vector<chunker::ChunkEdit> aggregate(
    std::vector<EditSuggestion> suggestions, const chunker::ChunkMap& frozen,
    ConflictStrategy strategy);

struct RepairResult {
    std::optional<EditSuggestion> suggestion;
    int iterations = 0;
    std::string failure; // query-level failure, recorded and skipped
    std::map<std::string, int> diagnosis_counts; // root cause -> count
};

// The per-query diagnose-then-repair loop over an isolated surrogate copy.
// `initial` is the failed verification that put the query here. Query-level
// errors are captured in the result; transport-level and document-integrity
// errors propagate.
RepairResult repair_loop(const corpus::QueryRecord& query,
                         const corpus::Webpage& webpage,
                         const chunker::ChunkMap& frozen,
                         const engine::CitationOutcome& initial,
                         const corpus::Dataset& dataset,
                         const OptimizerConfig& config, llm::Adapter& adapter);

struct PageReport {
    std::vector<corpus::QueryOutcome> outcomes;
    std::vector<corpus::EditLogEntry> edits;
    std::map<std::string, int> diagnosis_histogram;
    bool aborted = false;
    std::string abort_reason;
    ErrorKind abort_kind = ErrorKind::Partial; // meaningful only when aborted
};

struct OptimizeResult {
    corpus::Webpage optimized;
    PageReport report;
};

// Algorithm: partition the train queries into input-order batches of B;
// freeze the chunk map; verify each query against the current page (already
// cited short-circuits with no further calls); run repair loops on isolated
// surrogates; aggregate the suggestions; apply the winning edits in a single
// pass before the next batch. A fatal error aborts with the partial report.
OptimizeResult optimize(const corpus::Webpage& webpage,
                        const std::vector<corpus::QueryRecord>& train_queries,
                        const corpus::Dataset& dataset,
                        const OptimizerConfig& config, llm::Adapter& adapter);

} // namespace agentgeo::optimizer
