#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentgeo/diagnosis.hpp"
#include "agentgeo/llm.hpp"

namespace agentgeo::policy {

enum class Outcome { CitationAchieved, StillUncited };

const char* to_string(Outcome outcome);

// One attempted repair: the diagnosis it answered, the tool applied, and
// whether the re-verification cited the target. The effect of an attempt
// (its "result cause") is implicit: the root cause of the following entry,
// or the current diagnosis for the newest entry.
struct MemoryEntry {
    diagnosis::RootCause root_cause = diagnosis::RootCause::Unknown;
    std::string tool_id;
    Outcome outcome = Outcome::StillUncited;
    int iteration = 0;
};

// Query-scoped attempt history. Initialized empty; single-writer (the
// query's repair loop owns it).
class TrajectoryMemory {
public:
    void record(diagnosis::RootCause cause, const std::string& tool_id,
                Outcome outcome, int iteration);

    const std::vector<MemoryEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    int uses(const std::string& tool_id) const;
    int consecutive_failures(const std::string& tool_id) const;

private:
    std::vector<MemoryEntry> entries_;
    std::map<std::string, int> uses_;
    std::map<std::string, int> consecutive_failures_;
};

// Diagnosis-to-tool routing. Mandatory causes bypass the LLM's tool choice
// (the call is still made, for chunk targeting); candidates bound the LLM's
// choice, in priority order.
struct Routing {
    std::optional<std::string> mandatory;
    std::vector<std::string> candidates;
};

Routing map_diagnosis(diagnosis::RootCause cause);

// Memory constraints: budget (three uses per tool per trajectory), stability
// pruning (two consecutive failed uses), and the idempotency guard (the last
// use under the current cause left that same cause behind).
bool tool_eligible(const TrajectoryMemory& memory,
                   diagnosis::RootCause current_cause,
                   const std::string& tool_id);

std::vector<std::string> eligible_tools(const TrajectoryMemory& memory,
                                        diagnosis::RootCause current_cause,
                                        const std::vector<std::string>& tools);

// Escalation protocols, checked in order: failed factual augmentation shifts
// to persuasive_rewriting; a structural tool failing on BURIED_ANSWER
// defaults to bluf_optimization; repeated truncation triggers aggressive
// noise_isolation.
struct Escalation {
    std::string tool_id;
    std::map<std::string, std::string> extra_args;
    std::string reason;
};

std::optional<Escalation> escalate(const TrajectoryMemory& memory,
                                   const diagnosis::Diagnosis& diagnosis);

struct PolicyDecision {
    std::string tool_id;
    int target_chunk_index = -1;
    std::map<std::string, std::string> tool_arguments;
    double confidence = 0.5;
    std::string rationale;
    std::string route; // "mandatory", "escalation:<reason>", "llm", ...
};

// Parses the controller response; Format when no JSON object is present.
PolicyDecision parse_policy_decision(const std::string& raw);

// The selection policy: mandatory route first (when its tool is eligible),
// then escalation overrides, then the LLM choice constrained to the eligible
// candidates with a first-candidate fallback for invalid picks. The chunk
// index is validated against [0, chunk_count); one re-ask, then Targeting.
// Raises PolicyExhausted when no route is available. memory_enabled=false
// turns off all three constraints and the escalations.
PolicyDecision select(const diagnosis::Diagnosis& diagnosis,
                      const TrajectoryMemory& memory,
                      const std::string& indexed_doc,
                      const std::string& query_text, int chunk_count,
                      bool memory_enabled, llm::Adapter& adapter);

} // namespace agentgeo::policy
