#include "agentgeo/policy.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/prompts.hpp"
#include "agentgeo/text.hpp"
#include "agentgeo/toolkit.hpp"

namespace agentgeo::policy {

const char* to_string(Outcome outcome) {
    return outcome == Outcome::CitationAchieved ? "CitationAchieved"
                                                : "StillUncited";
}

// ===== trajectory memory =====

void TrajectoryMemory::record(diagnosis::RootCause cause,
                              const std::string& tool_id, Outcome outcome,
                              int iteration) {
    MemoryEntry entry;
    entry.root_cause = cause;
    entry.tool_id = tool_id;
    entry.outcome = outcome;
    entry.iteration = iteration;
    entries_.push_back(entry);

    ++uses_[tool_id];
    if (outcome == Outcome::StillUncited)
        ++consecutive_failures_[tool_id];
    else
        consecutive_failures_[tool_id] = 0;
}

int TrajectoryMemory::uses(const std::string& tool_id) const {
    auto it = uses_.find(tool_id);
    return it == uses_.end() ? 0 : it->second;
}

int TrajectoryMemory::consecutive_failures(const std::string& tool_id) const {
    auto it = consecutive_failures_.find(tool_id);
    return it == consecutive_failures_.end() ? 0 : it->second;
}

// ===== routing =====

Routing map_diagnosis(diagnosis::RootCause cause) {
    using diagnosis::RootCause;
    Routing routing;
    switch (cause) {
    case RootCause::ParsingFailure:
    case RootCause::DataIntegrity:
        routing.candidates = {"static_renderer"};
        break;
    case RootCause::WebNoise:
        routing.mandatory = "noise_isolation";
        routing.candidates = {"noise_isolation"};
        break;
    case RootCause::LowSignalRatio:
        routing.candidates = {"noise_isolation"};
        break;
    case RootCause::ContentTruncated:
        routing.mandatory = "content_relocation";
        routing.candidates = {"content_relocation"};
        break;
    case RootCause::MissingInfo:
        routing.candidates = {"entity_injection", "data_serialization"};
        break;
    case RootCause::LowInfoDensity:
        routing.candidates = {"entity_injection", "data_serialization",
                              "structure_optimization"};
        break;
    case RootCause::StructuralWeakness:
        routing.candidates = {"structure_optimization"};
        break;
    case RootCause::SemanticIrrelevance:
    case RootCause::AttributeMismatch:
        routing.candidates = {"intent_realignment"};
        break;
    case RootCause::BuriedAnswer:
        routing.candidates = {"bluf_optimization", "content_relocation"};
        break;
    case RootCause::NonFactualContent:
    case RootCause::TrustCredibility:
        routing.candidates = {"persuasive_rewriting"};
        break;
    case RootCause::OutdatedContent:
        routing.candidates = {"historical_redteam"};
        break;
    case RootCause::Unknown:
        for (const auto& spec : toolkit::all_tools())
            routing.candidates.push_back(spec.id);
        break;
    }
    return routing;
}

// ===== memory constraints =====

bool tool_eligible(const TrajectoryMemory& memory,
                   diagnosis::RootCause current_cause,
                   const std::string& tool_id) {
    if (memory.uses(tool_id) >= 3) return false;          // budget threshold
    if (memory.consecutive_failures(tool_id) >= 2) return false; // stability

    // Idempotency guard: the effect of an attempt is the root cause of the
    // following entry (the re-diagnosis), or the current diagnosis for the
    // newest entry. A tool whose last use under the current cause left that
    // very cause is masked.
    const auto& entries = memory.entries();
    for (std::size_t k = entries.size(); k-- > 0;) {
        if (entries[k].tool_id != tool_id) continue;
        if (entries[k].root_cause != current_cause) continue;
        const diagnosis::RootCause result = (k + 1 < entries.size())
                                                ? entries[k + 1].root_cause
                                                : current_cause;
        return result != current_cause;
    }
    return true;
}

std::vector<std::string> eligible_tools(const TrajectoryMemory& memory,
                                        diagnosis::RootCause current_cause,
                                        const std::vector<std::string>& tools) {
    std::vector<std::string> eligible;
    for (const auto& tool_id : tools)
        if (tool_eligible(memory, current_cause, tool_id))
            eligible.push_back(tool_id);
    return eligible;
}

// ===== escalation protocols =====

namespace {

bool is_structural(const std::string& tool_id) {
    return toolkit::tool_spec(tool_id).category ==
           toolkit::ToolCategory::StructuralEnhancement;
}

} // namespace

std::optional<Escalation> escalate(const TrajectoryMemory& memory,
                                   const diagnosis::Diagnosis& diagnosis) {
    if (memory.empty()) return std::nullopt;
    const MemoryEntry& last = memory.entries().back();

    if (last.tool_id == "entity_injection" &&
        last.outcome == Outcome::StillUncited) {
        Escalation escalation;
        escalation.tool_id = "persuasive_rewriting";
        escalation.reason = "content-to-persuasion";
        return escalation;
    }

    if (last.root_cause == diagnosis::RootCause::BuriedAnswer &&
        last.outcome == Outcome::StillUncited && is_structural(last.tool_id)) {
        Escalation escalation;
        escalation.tool_id = "bluf_optimization";
        escalation.reason = "structure-to-visibility";
        return escalation;
    }

    if (diagnosis.root_cause == diagnosis::RootCause::ContentTruncated) {
        const auto& entries = memory.entries();
        const bool repeated = std::any_of(
            entries.begin(), entries.end(), [](const MemoryEntry& entry) {
                return entry.root_cause ==
                       diagnosis::RootCause::ContentTruncated;
            });
        if (repeated) {
            Escalation escalation;
            escalation.tool_id = "noise_isolation";
            escalation.extra_args["aggressive"] = "true";
            escalation.reason = "density-adaptation";
            return escalation;
        }
    }
    return std::nullopt;
}

// ===== controller interaction =====

PolicyDecision parse_policy_decision(const std::string& raw) {
    const auto payload = extract_json_object(raw);
    if (!payload)
        raise(ErrorKind::Format, "no JSON object in tool-selection response");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(*payload);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Format,
              std::string("tool-selection response is not valid JSON: ") +
                  e.what());
    }
    if (!doc.is_object())
        raise(ErrorKind::Format, "tool-selection response is not an object");

    PolicyDecision decision;
    if (doc.contains("tool") && doc["tool"].is_string())
        decision.tool_id = doc["tool"].get<std::string>();
    if (doc.contains("target_chunk_index") &&
        doc["target_chunk_index"].is_number_integer())
        decision.target_chunk_index = doc["target_chunk_index"].get<int>();
    if (doc.contains("tool_arguments") && doc["tool_arguments"].is_object()) {
        for (const auto& [key, value] : doc["tool_arguments"].items()) {
            if (value.is_string())
                decision.tool_arguments[key] = value.get<std::string>();
            else
                decision.tool_arguments[key] = value.dump();
        }
    }
    if (doc.contains("confidence") && doc["confidence"].is_number())
        decision.confidence =
            std::clamp(doc["confidence"].get<double>(), 0.0, 1.0);
    if (doc.contains("rationale") && doc["rationale"].is_string())
        decision.rationale = doc["rationale"].get<std::string>();
    return decision;
}

namespace {

std::string history_context(const TrajectoryMemory& memory) {
    if (memory.empty()) return "(no previous attempts)";
    std::string out;
    for (const auto& entry : memory.entries()) {
        if (!out.empty()) out += "\n";
        out += "- t=" + std::to_string(entry.iteration) + ": " +
               diagnosis::to_string(entry.root_cause) + " -> " +
               entry.tool_id + " -> " + to_string(entry.outcome);
    }
    return out;
}

llm::ChatRequest controller_request(const diagnosis::Diagnosis& diagnosis,
                                    const TrajectoryMemory& memory,
                                    const std::string& indexed_doc,
                                    const std::string& query_text) {
    llm::ChatRequest request;
    request.user = prompts::render(
        prompts::get("policy_controller"),
        {{"query", query_text},
         {"diagnosis_cause", diagnosis::to_string(diagnosis.root_cause)},
         {"diagnosis_explanation", diagnosis.explanation},
         {"history_context", history_context(memory)},
         {"policy_guidelines", prompts::get("policy_guidelines")},
         {"target_content", indexed_doc},
         {"tool_descriptions", toolkit::tool_descriptions()},
         {"format_instructions", prompts::get("policy_format_instructions")}});
    request.tag = "policy:select";
    return request;
}

} // namespace

PolicyDecision select(const diagnosis::Diagnosis& diagnosis,
                      const TrajectoryMemory& memory,
                      const std::string& indexed_doc,
                      const std::string& query_text, int chunk_count,
                      bool memory_enabled, llm::Adapter& adapter) {
    const Routing routing = map_diagnosis(diagnosis.root_cause);
    auto eligible = [&](const std::string& tool_id) {
        return !memory_enabled ||
               tool_eligible(memory, diagnosis.root_cause, tool_id);
    };

    std::string forced;
    std::map<std::string, std::string> forced_args;
    std::string route = "llm";
    if (routing.mandatory && eligible(*routing.mandatory)) {
        forced = *routing.mandatory;
        route = "mandatory";
    } else if (memory_enabled) {
        if (auto escalation = escalate(memory, diagnosis);
            escalation && eligible(escalation->tool_id)) {
            forced = escalation->tool_id;
            forced_args = escalation->extra_args;
            route = "escalation:" + escalation->reason;
        }
    }

    std::vector<std::string> eligible_candidates;
    for (const auto& candidate : routing.candidates)
        if (eligible(candidate)) eligible_candidates.push_back(candidate);

    if (forced.empty() && eligible_candidates.empty())
        raise(ErrorKind::PolicyExhausted,
              std::string("every tool for root cause ") +
                  diagnosis::to_string(diagnosis.root_cause) + " is masked");

    // One controller call; mandatory and escalation routes use it solely for
    // chunk targeting. A malformed response or an out-of-range chunk index
    // earns a single re-ask.
    const llm::ChatRequest request =
        controller_request(diagnosis, memory, indexed_doc, query_text);
    PolicyDecision decision;
    bool ok = false;
    std::string failure;
    ErrorKind failure_kind = ErrorKind::Targeting;
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
        if (attempt)
            log_warn("re-asking the controller: " + failure);
        try {
            decision = parse_policy_decision(adapter.complete(request));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Format) throw;
            failure = e.what();
            failure_kind = ErrorKind::Format;
            continue;
        }
        if (decision.target_chunk_index < 0 ||
            decision.target_chunk_index >= chunk_count) {
            failure = "target chunk index " +
                      std::to_string(decision.target_chunk_index) +
                      " outside [0, " + std::to_string(chunk_count) + ")";
            failure_kind = ErrorKind::Targeting;
            continue;
        }
        ok = true;
    }
    if (!ok) raise(failure_kind, failure + " after the re-ask");

    for (const auto& [key, value] : forced_args)
        decision.tool_arguments[key] = value;

    if (!forced.empty()) {
        decision.tool_id = forced;
        decision.route = route;
        return decision;
    }

    if (std::find(eligible_candidates.begin(), eligible_candidates.end(),
                  decision.tool_id) == eligible_candidates.end()) {
        log_warn("controller chose '" + decision.tool_id +
                 "', which is not an eligible candidate for " +
                 diagnosis::to_string(diagnosis.root_cause) +
                 "; falling back to '" + eligible_candidates.front() + "'");
        decision.tool_id = eligible_candidates.front();
        decision.route = "llm-fallback";
        return decision;
    }
    decision.route = "llm";
    return decision;
}

} // namespace agentgeo::policy
