#include <doctest.h>

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "agentgeo/diagnosis.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/llm.hpp"
#include "agentgeo/policy.hpp"
#include "agentgeo/toolkit.hpp"

#include "support/helpers.hpp"

using namespace agentgeo;
using namespace agentgeo::policy;
using diagnosis::RootCause;

namespace {

diagnosis::Diagnosis diag(RootCause cause) {
    diagnosis::Diagnosis d;
    d.root_cause = cause;
    d.severity = diagnosis::Severity::High;
    d.explanation = "scripted";
    return d;
}

std::string pick_json(const std::string& tool, int chunk = 0) {
    return "{\"tool\": \"" + tool + "\", \"target_chunk_index\": " +
           std::to_string(chunk) + ", \"tool_arguments\": {},"
           " \"confidence\": 0.9, \"rationale\": \"scripted\"}";
}

std::vector<std::string> all_tool_ids() {
    std::vector<std::string> ids;
    for (const auto& spec : toolkit::all_tools()) ids.push_back(spec.id);
    return ids;
}

} // namespace

// ===== trajectory memory =====

TEST_CASE("memory tracks uses and failure streaks per tool") {
    TrajectoryMemory memory;
    CHECK(memory.empty());
    CHECK(memory.uses("entity_injection") == 0);
    CHECK(memory.consecutive_failures("entity_injection") == 0);

    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 1);
    CHECK(memory.uses("entity_injection") == 2);
    CHECK(memory.consecutive_failures("entity_injection") == 2);

    // A success resets the streak but not the budget.
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::CitationAchieved, 2);
    CHECK(memory.uses("entity_injection") == 3);
    CHECK(memory.consecutive_failures("entity_injection") == 0);

    // Another tool's attempts do not interleave with the streak.
    memory.record(RootCause::WebNoise, "noise_isolation",
                  Outcome::StillUncited, 3);
    CHECK(memory.consecutive_failures("noise_isolation") == 1);
    CHECK(memory.uses("entity_injection") == 3);

    REQUIRE(memory.entries().size() == 4);
    CHECK(memory.entries()[3].iteration == 3);
    CHECK(memory.entries()[0].root_cause == RootCause::MissingInfo);
}

// ===== routing table =====

TEST_CASE("every root cause routes to its repair tools") {
    struct Row {
        RootCause cause;
        std::optional<std::string> mandatory;
        std::vector<std::string> candidates;
    };
    const std::vector<Row> table = {
        {RootCause::ParsingFailure, std::nullopt, {"static_renderer"}},
        {RootCause::DataIntegrity, std::nullopt, {"static_renderer"}},
        {RootCause::WebNoise, "noise_isolation", {"noise_isolation"}},
        {RootCause::LowSignalRatio, std::nullopt, {"noise_isolation"}},
        {RootCause::ContentTruncated, "content_relocation",
         {"content_relocation"}},
        {RootCause::MissingInfo, std::nullopt,
         {"entity_injection", "data_serialization"}},
        {RootCause::LowInfoDensity, std::nullopt,
         {"entity_injection", "data_serialization", "structure_optimization"}},
        {RootCause::StructuralWeakness, std::nullopt,
         {"structure_optimization"}},
        {RootCause::SemanticIrrelevance, std::nullopt, {"intent_realignment"}},
        {RootCause::AttributeMismatch, std::nullopt, {"intent_realignment"}},
        {RootCause::BuriedAnswer, std::nullopt,
         {"bluf_optimization", "content_relocation"}},
        {RootCause::NonFactualContent, std::nullopt,
         {"persuasive_rewriting"}},
        {RootCause::TrustCredibility, std::nullopt, {"persuasive_rewriting"}},
        {RootCause::OutdatedContent, std::nullopt, {"historical_redteam"}},
        {RootCause::Unknown, std::nullopt, all_tool_ids()},
    };
    REQUIRE(table.size() == diagnosis::all_root_causes().size());
    for (const auto& row : table) {
        CAPTURE(diagnosis::to_string(row.cause));
        const Routing routing = map_diagnosis(row.cause);
        CHECK(routing.mandatory == row.mandatory);
        CHECK(routing.candidates == row.candidates);
    }
    CHECK(map_diagnosis(RootCause::Unknown).candidates.size() == 10);
}

// ===== memory constraints, hand-picked cases =====

TEST_CASE("three uses exhaust a tool's budget regardless of outcomes") {
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::CitationAchieved, 0);
    memory.record(RootCause::LowInfoDensity, "entity_injection",
                  Outcome::CitationAchieved, 1);
    CHECK(tool_eligible(memory, RootCause::Unknown, "entity_injection"));
    memory.record(RootCause::Unknown, "entity_injection",
                  Outcome::CitationAchieved, 2);
    CHECK_FALSE(tool_eligible(memory, RootCause::Unknown, "entity_injection"));
    CHECK(tool_eligible(memory, RootCause::Unknown, "data_serialization"));
}

TEST_CASE("two consecutive failures prune a tool until it succeeds") {
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    CHECK(tool_eligible(memory, RootCause::LowInfoDensity,
                        "entity_injection"));
    memory.record(RootCause::LowInfoDensity, "entity_injection",
                  Outcome::StillUncited, 1);
    CHECK_FALSE(tool_eligible(memory, RootCause::StructuralWeakness,
                              "entity_injection"));

    // An interleaved success with a different tool does not clear it.
    memory.record(RootCause::WebNoise, "noise_isolation",
                  Outcome::CitationAchieved, 2);
    CHECK_FALSE(tool_eligible(memory, RootCause::StructuralWeakness,
                              "entity_injection"));
}

TEST_CASE("a tool whose last use left the same cause behind is masked") {
    // Newest entry: the re-diagnosis IS the current cause.
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::CitationAchieved, 0);
    CHECK_FALSE(tool_eligible(memory, RootCause::MissingInfo,
                              "entity_injection"));
    // A different current cause is a different problem: eligible again.
    CHECK(tool_eligible(memory, RootCause::LowInfoDensity,
                        "entity_injection"));

    // The following entry's cause is the recorded effect of the attempt.
    TrajectoryMemory moved;
    moved.record(RootCause::MissingInfo, "entity_injection",
                 Outcome::StillUncited, 0);
    moved.record(RootCause::BuriedAnswer, "bluf_optimization",
                 Outcome::StillUncited, 1);
    // entity_injection shifted MISSING_INFO to BURIED_ANSWER: not masked.
    CHECK(tool_eligible(moved, RootCause::MissingInfo, "entity_injection"));

    TrajectoryMemory stuck;
    stuck.record(RootCause::MissingInfo, "entity_injection",
                 Outcome::StillUncited, 0);
    stuck.record(RootCause::MissingInfo, "data_serialization",
                 Outcome::StillUncited, 1);
    // entity_injection left MISSING_INFO as MISSING_INFO: masked.
    CHECK_FALSE(tool_eligible(stuck, RootCause::MissingInfo,
                              "entity_injection"));

    // Only the newest use under the current cause counts.
    TrajectoryMemory newest;
    newest.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    newest.record(RootCause::BuriedAnswer, "bluf_optimization",
                  Outcome::StillUncited, 1);
    newest.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 2);
    CHECK_FALSE(tool_eligible(newest, RootCause::MissingInfo,
                              "entity_injection"));
}

TEST_CASE("eligible_tools filters a candidate list in order") {
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::CitationAchieved, 0);
    const auto filtered =
        eligible_tools(memory, RootCause::MissingInfo,
                       {"entity_injection", "data_serialization",
                        "structure_optimization"});
    CHECK(filtered == std::vector<std::string>{"data_serialization",
                                               "structure_optimization"});
}

// ===== escalation protocols =====

TEST_CASE("failed factual augmentation escalates to persuasion") {
    TrajectoryMemory memory;
    CHECK_FALSE(escalate(memory, diag(RootCause::MissingInfo)).has_value());

    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    const auto escalation = escalate(memory, diag(RootCause::MissingInfo));
    REQUIRE(escalation.has_value());
    CHECK(escalation->tool_id == "persuasive_rewriting");
    CHECK(escalation->reason == "content-to-persuasion");
    CHECK(escalation->extra_args.empty());

    // A successful injection does not escalate.
    TrajectoryMemory happy;
    happy.record(RootCause::MissingInfo, "entity_injection",
                 Outcome::CitationAchieved, 0);
    CHECK_FALSE(escalate(happy, diag(RootCause::MissingInfo)).has_value());

    // Only the most recent attempt triggers it.
    TrajectoryMemory stale;
    stale.record(RootCause::MissingInfo, "entity_injection",
                 Outcome::StillUncited, 0);
    stale.record(RootCause::MissingInfo, "data_serialization",
                 Outcome::StillUncited, 1);
    CHECK_FALSE(escalate(stale, diag(RootCause::MissingInfo)).has_value());
}

TEST_CASE("structural tools failing on a buried answer yield to BLUF") {
    TrajectoryMemory memory;
    memory.record(RootCause::BuriedAnswer, "structure_optimization",
                  Outcome::StillUncited, 0);
    const auto escalation = escalate(memory, diag(RootCause::BuriedAnswer));
    REQUIRE(escalation.has_value());
    CHECK(escalation->tool_id == "bluf_optimization");
    CHECK(escalation->reason == "structure-to-visibility");

    // noise_isolation is the other structural tool.
    TrajectoryMemory noisy;
    noisy.record(RootCause::BuriedAnswer, "noise_isolation",
                 Outcome::StillUncited, 0);
    CHECK(escalate(noisy, diag(RootCause::BuriedAnswer)).has_value());

    // A positioning tool failing the same way does not trigger it.
    TrajectoryMemory positioned;
    positioned.record(RootCause::BuriedAnswer, "content_relocation",
                      Outcome::StillUncited, 0);
    CHECK_FALSE(
        escalate(positioned, diag(RootCause::BuriedAnswer)).has_value());
}

TEST_CASE("repeated truncation escalates to aggressive noise isolation") {
    TrajectoryMemory memory;
    memory.record(RootCause::ContentTruncated, "content_relocation",
                  Outcome::StillUncited, 0);
    const auto escalation =
        escalate(memory, diag(RootCause::ContentTruncated));
    REQUIRE(escalation.has_value());
    CHECK(escalation->tool_id == "noise_isolation");
    CHECK(escalation->reason == "density-adaptation");
    CHECK(escalation->extra_args.at("aggressive") == "true");

    // The past truncation can sit anywhere in the history.
    TrajectoryMemory buried;
    buried.record(RootCause::ContentTruncated, "content_relocation",
                  Outcome::StillUncited, 0);
    buried.record(RootCause::WebNoise, "noise_isolation",
                  Outcome::CitationAchieved, 1);
    CHECK(escalate(buried, diag(RootCause::ContentTruncated)).has_value());

    // First encounter with truncation: no history of it, no escalation.
    TrajectoryMemory fresh;
    fresh.record(RootCause::WebNoise, "noise_isolation",
                 Outcome::CitationAchieved, 0);
    CHECK_FALSE(
        escalate(fresh, diag(RootCause::ContentTruncated)).has_value());
}

TEST_CASE("escalation protocols are checked in their fixed order") {
    // The last attempt satisfies both the persuasion and the truncation
    // protocols; the persuasion one is declared first and wins.
    TrajectoryMemory memory;
    memory.record(RootCause::ContentTruncated, "entity_injection",
                  Outcome::StillUncited, 0);
    const auto escalation =
        escalate(memory, diag(RootCause::ContentTruncated));
    REQUIRE(escalation.has_value());
    CHECK(escalation->reason == "content-to-persuasion");
}

// ===== controller response parsing =====

TEST_CASE("a complete controller response parses field by field") {
    const PolicyDecision decision = parse_policy_decision(
        "{\"tool\": \"bluf_optimization\", \"target_chunk_index\": 2,"
        " \"tool_arguments\": {\"key_takeaway\": \"lead with the fact\","
        " \"weights\": [1, 2]},"
        " \"confidence\": 0.75, \"rationale\": \"the answer is buried\"}");
    CHECK(decision.tool_id == "bluf_optimization");
    CHECK(decision.target_chunk_index == 2);
    CHECK(decision.tool_arguments.at("key_takeaway") == "lead with the fact");
    CHECK(decision.tool_arguments.at("weights") == "[1,2]");
    CHECK(decision.confidence == doctest::Approx(0.75));
    CHECK(decision.rationale == "the answer is buried");
}

TEST_CASE("missing controller fields fall back to sentinel defaults") {
    const PolicyDecision decision = parse_policy_decision("{}");
    CHECK(decision.tool_id.empty());
    CHECK(decision.target_chunk_index == -1);
    CHECK(decision.tool_arguments.empty());
    CHECK(decision.confidence == doctest::Approx(0.5));

    CHECK(parse_policy_decision("{\"confidence\": 9}").confidence ==
          doctest::Approx(1.0));

    const PolicyDecision fenced = parse_policy_decision(
        "Sure!\n```json\n{\"tool\": \"static_renderer\","
        " \"target_chunk_index\": 0}\n```");
    CHECK(fenced.tool_id == "static_renderer");

    for (const char* raw : {"no json", "", "[]"}) {
        CAPTURE(raw);
        try {
            parse_policy_decision(raw);
            FAIL("expected a format error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
        }
    }
}

// ===== selection routes =====

TEST_CASE("mandatory causes bypass the controller's tool choice") {
    testsupport::CapturingAdapter adapter({pick_json("entity_injection", 1)});
    TrajectoryMemory memory;
    const PolicyDecision decision =
        select(diag(RootCause::WebNoise), memory, "[CHUNK 0]\nbody",
               "the query", 3, true, adapter);
    CHECK(decision.tool_id == "noise_isolation");
    CHECK(decision.route == "mandatory");
    // The controller is still consulted exactly once, for targeting.
    CHECK(decision.target_chunk_index == 1);
    REQUIRE(adapter.requests().size() == 1);
    const auto& request = adapter.requests()[0];
    CHECK(request.tag == "policy:select");
    CHECK(request.user.find("GEO Optimization Controller") !=
          std::string::npos);
    CHECK(request.user.find("[CHUNK 0]") != std::string::npos);
    CHECK(request.user.find("the query") != std::string::npos);
    CHECK(request.user.find("(no previous attempts)") != std::string::npos);
    CHECK(request.user.find("WEB_NOISE") != std::string::npos);
}

TEST_CASE("attempt history is rendered into the controller prompt") {
    testsupport::CapturingAdapter adapter({pick_json("entity_injection")});
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    memory.record(RootCause::BuriedAnswer, "bluf_optimization",
                  Outcome::CitationAchieved, 1);
    select(diag(RootCause::LowInfoDensity), memory, "[CHUNK 0]\nbody", "q", 1,
           true, adapter);
    const auto& prompt = adapter.requests()[0].user;
    CHECK(prompt.find("- t=0: MISSING_INFO -> entity_injection -> "
                      "StillUncited") != std::string::npos);
    CHECK(prompt.find("- t=1: BURIED_ANSWER -> bluf_optimization -> "
                      "CitationAchieved") != std::string::npos);
}

TEST_CASE("the controller's choice rules within the candidate set") {
    testsupport::CapturingAdapter adapter({pick_json("data_serialization")});
    TrajectoryMemory memory;
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, true, adapter);
    CHECK(decision.tool_id == "data_serialization");
    CHECK(decision.route == "llm");
    CHECK(decision.confidence == doctest::Approx(0.9));
}

TEST_CASE("an out-of-set pick falls back to the first eligible candidate") {
    testsupport::LogCapture logs;
    testsupport::CapturingAdapter adapter({pick_json("static_renderer")});
    TrajectoryMemory memory;
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, true, adapter);
    CHECK(decision.tool_id == "entity_injection");
    CHECK(decision.route == "llm-fallback");
    CHECK(logs.saw("not an eligible candidate"));
}

TEST_CASE("escalations override the controller and merge their arguments") {
    TrajectoryMemory memory;
    memory.record(RootCause::ContentTruncated, "content_relocation",
                  Outcome::StillUncited, 0);
    memory.record(RootCause::ContentTruncated, "content_relocation",
                  Outcome::StillUncited, 1);
    // content_relocation now has two consecutive failures: the mandatory
    // route is masked and the density-adaptation escalation takes over.
    testsupport::CapturingAdapter adapter({pick_json("content_relocation")});
    const PolicyDecision decision =
        select(diag(RootCause::ContentTruncated), memory, "[CHUNK 0]\nbody",
               "q", 1, true, adapter);
    CHECK(decision.tool_id == "noise_isolation");
    CHECK(decision.route == "escalation:density-adaptation");
    CHECK(decision.tool_arguments.at("aggressive") == "true");
    CHECK(adapter.requests().size() == 1);
}

TEST_CASE("a masked escalation falls through to the candidate route") {
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    // persuasive_rewriting would be the escalation, but it is budget-masked.
    for (int i = 0; i < 3; ++i)
        memory.record(RootCause::TrustCredibility, "persuasive_rewriting",
                      Outcome::CitationAchieved, 1 + i);
    testsupport::CapturingAdapter adapter({pick_json("data_serialization")});
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, true, adapter);
    CHECK(decision.tool_id == "data_serialization");
    CHECK(decision.route == "llm");
}

TEST_CASE("an exhausted candidate set raises before any controller call") {
    TrajectoryMemory memory;
    memory.record(RootCause::StructuralWeakness, "structure_optimization",
                  Outcome::CitationAchieved, 0);
    // The idempotency guard masks the only candidate; no escalations apply.
    testsupport::CapturingAdapter adapter({pick_json("structure_optimization")});
    try {
        select(diag(RootCause::StructuralWeakness), memory, "[CHUNK 0]\nbody",
               "q", 1, true, adapter);
        FAIL("expected policy exhaustion");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::PolicyExhausted);
        CHECK(std::string(e.what()).find("STRUCTURAL_WEAKNESS") !=
              std::string::npos);
    }
    CHECK(adapter.requests().empty());
}

TEST_CASE("a malformed controller response earns exactly one re-ask") {
    testsupport::LogCapture logs;
    testsupport::CapturingAdapter recovers(
        {"not json at all", pick_json("entity_injection")});
    TrajectoryMemory memory;
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, true, recovers);
    CHECK(decision.tool_id == "entity_injection");
    CHECK(recovers.requests().size() == 2);
    CHECK(logs.saw("re-asking"));

    testsupport::CapturingAdapter hopeless({"not json", "still not json"});
    try {
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, true, hopeless);
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Format);
        CHECK(std::string(e.what()).find("after the re-ask") !=
              std::string::npos);
    }
}

TEST_CASE("chunk targeting is validated against the document") {
    TrajectoryMemory memory;
    testsupport::CapturingAdapter recovers(
        {pick_json("entity_injection", 7), pick_json("entity_injection", 2)});
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               3, true, recovers);
    CHECK(decision.target_chunk_index == 2);
    CHECK(recovers.requests().size() == 2);

    testsupport::CapturingAdapter hopeless(
        {pick_json("entity_injection", 3), pick_json("entity_injection", -1)});
    try {
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               3, true, hopeless);
        FAIL("expected a targeting error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Targeting);
        CHECK(std::string(e.what()).find("after the re-ask") !=
              std::string::npos);
    }

    // A transport-level failure is not retried here.
    llm::ScriptedAdapter strict({}, true);
    try {
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               3, true, strict);
        FAIL("expected an unmatched-prompt error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnmatchedPrompt);
    }
}

// ===== memory disabled: all constraints verifiably inert =====

TEST_CASE("without memory the budget, stability, and idempotency masks lift") {
    // entity_injection violates all three constraints at once: three uses,
    // two trailing failures, and an idempotent last use under this cause.
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 1);
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 2);
    CHECK_FALSE(tool_eligible(memory, RootCause::MissingInfo,
                              "entity_injection"));

    testsupport::CapturingAdapter adapter({pick_json("entity_injection")});
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, false, adapter);
    CHECK(decision.tool_id == "entity_injection");
    CHECK(decision.route == "llm");
}

TEST_CASE("without memory no escalation ever fires") {
    TrajectoryMemory memory;
    memory.record(RootCause::MissingInfo, "entity_injection",
                  Outcome::StillUncited, 0);
    testsupport::CapturingAdapter adapter({pick_json("data_serialization")});
    const PolicyDecision decision =
        select(diag(RootCause::MissingInfo), memory, "[CHUNK 0]\nbody", "q",
               1, false, adapter);
    CHECK(decision.tool_id == "data_serialization");
    CHECK(decision.route == "llm");
}

TEST_CASE("mandatory routing is not a memory constraint and stays on") {
    TrajectoryMemory memory;
    testsupport::CapturingAdapter adapter({pick_json("entity_injection")});
    const PolicyDecision decision =
        select(diag(RootCause::WebNoise), memory, "[CHUNK 0]\nbody", "q", 1,
               false, adapter);
    CHECK(decision.tool_id == "noise_isolation");
    CHECK(decision.route == "mandatory");
}

TEST_CASE("a saturated memory exhausts every cause unless memory is off") {
    TrajectoryMemory saturated;
    int iteration = 0;
    for (const auto& tool_id : all_tool_ids())
        for (int i = 0; i < 3; ++i)
            saturated.record(RootCause::Unknown, tool_id,
                             Outcome::CitationAchieved, iteration++);

    for (const RootCause cause : diagnosis::all_root_causes()) {
        CAPTURE(diagnosis::to_string(cause));
        testsupport::CapturingAdapter adapter(
            {pick_json("entity_injection")});
        try {
            select(diag(cause), saturated, "[CHUNK 0]\nbody", "q", 1, true,
                   adapter);
            FAIL("expected policy exhaustion");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::PolicyExhausted);
        }

        testsupport::CapturingAdapter relaxed(
            {pick_json("entity_injection")});
        const PolicyDecision decision = select(
            diag(cause), saturated, "[CHUNK 0]\nbody", "q", 1, false, relaxed);
        CHECK_FALSE(decision.tool_id.empty());
    }
}

// ===== randomized trajectory suite =====

namespace {

// Re-derivations of the three constraints and the escalation protocols from
// their definitions, reading nothing but the raw entry list.
int oracle_uses(const std::vector<MemoryEntry>& entries,
                const std::string& tool) {
    int count = 0;
    for (const auto& entry : entries)
        if (entry.tool_id == tool) ++count;
    return count;
}

int oracle_streak(const std::vector<MemoryEntry>& entries,
                  const std::string& tool) {
    int streak = 0;
    for (const auto& entry : entries) {
        if (entry.tool_id != tool) continue;
        streak = entry.outcome == Outcome::StillUncited ? streak + 1 : 0;
    }
    return streak;
}

bool oracle_idempotency_mask(const std::vector<MemoryEntry>& entries,
                             RootCause current, const std::string& tool) {
    for (std::size_t k = entries.size(); k-- > 0;) {
        if (entries[k].tool_id != tool) continue;
        if (entries[k].root_cause != current) continue;
        const RootCause effect =
            k + 1 < entries.size() ? entries[k + 1].root_cause : current;
        return effect == current;
    }
    return false;
}

bool oracle_eligible(const std::vector<MemoryEntry>& entries,
                     RootCause current, const std::string& tool) {
    return oracle_uses(entries, tool) < 3 &&
           oracle_streak(entries, tool) < 2 &&
           !oracle_idempotency_mask(entries, current, tool);
}

struct OracleEscalation {
    std::string tool_id;
    std::string reason;
};

std::optional<OracleEscalation> oracle_escalation(
    const std::vector<MemoryEntry>& entries, RootCause current) {
    if (entries.empty()) return std::nullopt;
    const MemoryEntry& last = entries.back();
    if (last.tool_id == "entity_injection" &&
        last.outcome == Outcome::StillUncited)
        return OracleEscalation{"persuasive_rewriting",
                                "content-to-persuasion"};
    if (last.root_cause == RootCause::BuriedAnswer &&
        last.outcome == Outcome::StillUncited &&
        (last.tool_id == "structure_optimization" ||
         last.tool_id == "noise_isolation"))
        return OracleEscalation{"bluf_optimization", "structure-to-visibility"};
    if (current == RootCause::ContentTruncated) {
        for (const auto& entry : entries)
            if (entry.root_cause == RootCause::ContentTruncated)
                return OracleEscalation{"noise_isolation",
                                        "density-adaptation"};
    }
    return std::nullopt;
}

} // namespace

TEST_CASE("ten thousand randomized trajectories never violate a constraint") {
    const auto tools = all_tool_ids();
    const auto& causes = diagnosis::all_root_causes();
    // Bias toward causes with one or two candidate tools so budgets,
    // streaks, and idempotency masks actually bite.
    const std::vector<RootCause> narrow = {
        RootCause::MissingInfo,     RootCause::StructuralWeakness,
        RootCause::LowSignalRatio,  RootCause::BuriedAnswer,
        RootCause::TrustCredibility, RootCause::OutdatedContent,
        RootCause::ContentTruncated, RootCause::WebNoise,
    };

    std::mt19937_64 rng(53771);
    std::uniform_int_distribution<int> steps_dist(1, 8);
    std::uniform_int_distribution<int> percent(0, 99);
    std::uniform_int_distribution<std::size_t> tool_pick(0, tools.size() - 1);
    std::uniform_int_distribution<std::size_t> cause_pick(0,
                                                          causes.size() - 1);
    std::uniform_int_distribution<std::size_t> narrow_pick(0,
                                                           narrow.size() - 1);

    long violations = 0;
    long exhaustions = 0;
    long selections = 0;
    std::map<std::string, long> routes_seen;
    std::string first_violation;

    auto note = [&](const std::string& what) {
        if (violations++ == 0) first_violation = what;
    };

    std::string llm_pick;
    testsupport::CallbackAdapter adapter([&](const llm::ChatRequest&) {
        return pick_json(llm_pick);
    });

    for (int trajectory = 0; trajectory < 10000; ++trajectory) {
        TrajectoryMemory memory;
        RootCause cause = causes[cause_pick(rng)];
        const int steps = steps_dist(rng);
        for (int step = 0; step < steps; ++step) {
            const int roll = percent(rng);
            if (roll < 30) {
                // keep the previous cause
            } else if (roll < 75) {
                cause = narrow[narrow_pick(rng)];
            } else {
                cause = causes[cause_pick(rng)];
            }
            // The controller picks an arbitrary tool, sometimes a bogus one.
            llm_pick = percent(rng) < 10 ? "imaginary_tool"
                                         : tools[tool_pick(rng)];

            const auto& entries = memory.entries();
            const Routing routing = map_diagnosis(cause);

            // The oracle's prediction of the whole selection decision.
            std::string expected_tool;
            std::string expected_route;
            if (routing.mandatory &&
                oracle_eligible(entries, cause, *routing.mandatory)) {
                expected_tool = *routing.mandatory;
                expected_route = "mandatory";
            } else if (auto esc = oracle_escalation(entries, cause);
                       esc && oracle_eligible(entries, cause, esc->tool_id)) {
                expected_tool = esc->tool_id;
                expected_route = "escalation:" + esc->reason;
            } else {
                std::vector<std::string> open;
                for (const auto& candidate : routing.candidates)
                    if (oracle_eligible(entries, cause, candidate))
                        open.push_back(candidate);
                if (!open.empty()) {
                    const bool listed = std::find(open.begin(), open.end(),
                                                  llm_pick) != open.end();
                    expected_tool = listed ? llm_pick : open.front();
                    expected_route = listed ? "llm" : "llm-fallback";
                }
            }

            PolicyDecision decision;
            try {
                decision = select(diag(cause), memory, "[CHUNK 0]\nbody",
                                  "query", 1, true, adapter);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::PolicyExhausted) throw;
                ++exhaustions;
                if (!expected_tool.empty())
                    note("unexpected exhaustion under " +
                         std::string(diagnosis::to_string(cause)));
                break;
            }
            ++selections;

            if (expected_tool.empty())
                note("expected exhaustion, got " + decision.tool_id);
            if (decision.tool_id != expected_tool ||
                decision.route != expected_route)
                note("under " + std::string(diagnosis::to_string(cause)) +
                     " expected " + expected_tool + "/" + expected_route +
                     ", got " + decision.tool_id + "/" + decision.route);

            // The three constraints, re-checked from the raw entries.
            if (oracle_uses(entries, decision.tool_id) >= 3)
                note("budget violation on " + decision.tool_id);
            if (oracle_streak(entries, decision.tool_id) >= 2)
                note("stability violation on " + decision.tool_id);
            if (oracle_idempotency_mask(entries, cause, decision.tool_id))
                note("idempotency violation on " + decision.tool_id);

            ++routes_seen[decision.route.substr(0, decision.route.find(':'))];
            std::bernoulli_distribution cited(0.25);
            memory.record(cause, decision.tool_id,
                          cited(rng) ? Outcome::CitationAchieved
                                     : Outcome::StillUncited,
                          step);
        }
    }

    CAPTURE(first_violation);
    CHECK(violations == 0);
    // The suite genuinely exercised every path.
    CHECK(selections > 20000);
    CHECK(exhaustions > 100);
    CHECK(routes_seen["mandatory"] > 0);
    CHECK(routes_seen["escalation"] > 0);
    CHECK(routes_seen["llm"] > 0);
    CHECK(routes_seen["llm-fallback"] > 0);
    MESSAGE("selections: " << selections << ", exhaustions: " << exhaustions);
}

TEST_CASE("eligibility agrees with the oracle across random histories") {
    const auto tools = all_tool_ids();
    const auto& causes = diagnosis::all_root_causes();
    std::mt19937_64 rng(40925);
    std::uniform_int_distribution<int> length(0, 10);
    std::uniform_int_distribution<std::size_t> tool_pick(0, tools.size() - 1);
    std::uniform_int_distribution<std::size_t> cause_pick(0,
                                                          causes.size() - 1);
    std::bernoulli_distribution cited(0.4);

    long mismatches = 0;
    std::string first_mismatch;
    for (int round = 0; round < 10000; ++round) {
        TrajectoryMemory memory;
        const int n = length(rng);
        for (int i = 0; i < n; ++i)
            memory.record(causes[cause_pick(rng)], tools[tool_pick(rng)],
                          cited(rng) ? Outcome::CitationAchieved
                                     : Outcome::StillUncited,
                          i);
        const RootCause current = causes[cause_pick(rng)];
        for (const auto& tool : tools) {
            const bool got = tool_eligible(memory, current, tool);
            const bool expected =
                oracle_eligible(memory.entries(), current, tool);
            if (got != expected && mismatches++ == 0)
                first_mismatch = tool + " under " +
                                 diagnosis::to_string(current) + ": got " +
                                 (got ? "eligible" : "masked");
        }
    }
    CAPTURE(first_mismatch);
    CHECK(mismatches == 0);
}
