#include "agentgeo/diagnosis.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "agentgeo/chunker.hpp"
#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/prompts.hpp"
#include "agentgeo/text.hpp"

namespace agentgeo::diagnosis {

const char* to_string(RootCause cause) {
    switch (cause) {
    case RootCause::ParsingFailure: return "PARSING_FAILURE";
    case RootCause::ContentTruncated: return "CONTENT_TRUNCATED";
    case RootCause::DataIntegrity: return "DATA_INTEGRITY";
    case RootCause::WebNoise: return "WEB_NOISE";
    case RootCause::LowSignalRatio: return "LOW_SIGNAL_RATIO";
    case RootCause::LowInfoDensity: return "LOW_INFO_DENSITY";
    case RootCause::MissingInfo: return "MISSING_INFO";
    case RootCause::StructuralWeakness: return "STRUCTURAL_WEAKNESS";
    case RootCause::SemanticIrrelevance: return "SEMANTIC_IRRELEVANCE";
    case RootCause::AttributeMismatch: return "ATTRIBUTE_MISMATCH";
    case RootCause::BuriedAnswer: return "BURIED_ANSWER";
    case RootCause::NonFactualContent: return "NON_FACTUAL_CONTENT";
    case RootCause::TrustCredibility: return "TRUST_CREDIBILITY";
    case RootCause::OutdatedContent: return "OUTDATED_CONTENT";
    case RootCause::Unknown: return "UNKNOWN";
    }
    return "UNKNOWN";
}

const char* to_string(Severity severity) {
    switch (severity) {
    case Severity::Critical: return "critical";
    case Severity::High: return "high";
    case Severity::Medium: return "medium";
    case Severity::Low: return "low";
    }
    return "medium";
}

const char* to_string(Category category) {
    switch (category) {
    case Category::TechnicalIntegrity: return "Technical Integrity";
    case Category::SemanticAlignment: return "Semantic Alignment";
    case Category::ContentQuality: return "Content Quality";
    case Category::SystemicExclusion: return "Systemic Exclusion";
    case Category::Uncategorized: return "Uncategorized";
    }
    return "Uncategorized";
}

const std::vector<RootCause>& all_root_causes() {
    static const std::vector<RootCause> causes = {
        RootCause::ParsingFailure,   RootCause::ContentTruncated,
        RootCause::DataIntegrity,    RootCause::WebNoise,
        RootCause::LowSignalRatio,   RootCause::LowInfoDensity,
        RootCause::MissingInfo,      RootCause::StructuralWeakness,
        RootCause::SemanticIrrelevance, RootCause::AttributeMismatch,
        RootCause::BuriedAnswer,     RootCause::NonFactualContent,
        RootCause::TrustCredibility, RootCause::OutdatedContent,
        RootCause::Unknown,
    };
    return causes;
}

std::optional<RootCause> parse_root_cause(const std::string& label) {
    for (const RootCause cause : all_root_causes())
        if (label == to_string(cause)) return cause;
    return std::nullopt;
}

std::optional<Severity> parse_severity(const std::string& label) {
    const std::string lowered = to_lower(label);
    if (lowered == "critical") return Severity::Critical;
    if (lowered == "high") return Severity::High;
    if (lowered == "medium") return Severity::Medium;
    if (lowered == "low") return Severity::Low;
    return std::nullopt;
}

Category category_of(RootCause cause) {
    switch (cause) {
    case RootCause::ParsingFailure:
    case RootCause::DataIntegrity:
    case RootCause::WebNoise:
    case RootCause::LowSignalRatio:
        return Category::TechnicalIntegrity;
    case RootCause::SemanticIrrelevance:
    case RootCause::AttributeMismatch:
    case RootCause::MissingInfo:
    case RootCause::OutdatedContent:
        return Category::SemanticAlignment;
    case RootCause::LowInfoDensity:
    case RootCause::StructuralWeakness:
    case RootCause::BuriedAnswer:
    case RootCause::NonFactualContent:
    case RootCause::TrustCredibility:
        return Category::ContentQuality;
    case RootCause::ContentTruncated:
        return Category::SystemicExclusion;
    case RootCause::Unknown:
        return Category::Uncategorized;
    }
    return Category::Uncategorized;
}

// ===== competitor selection =====

std::optional<std::string> select_competitor(
    const engine::CitationOutcome& outcome) {
    for (const auto& id : outcome.ranked_candidates) {
        if (id == outcome.target_id) continue;
        if (outcome.cited_ids.count(id)) return id;
    }
    return std::nullopt;
}

std::string competitor_or_fallback(const engine::CitationOutcome& outcome) {
    if (auto competitor = select_competitor(outcome)) return *competitor;
    for (const auto& id : outcome.ranked_candidates) {
        if (id != outcome.target_id) {
            log_warn("query '" + outcome.query_id +
                     "': nothing was cited; using the best-ranked candidate "
                     "'" + id + "' as the contrast document");
            return id;
        }
    }
    raise(ErrorKind::Config, "query '" + outcome.query_id +
                                 "' has no non-target candidate to "
                                 "contrast against");
}

// ===== parsing =====

Diagnosis parse_diagnosis(const std::string& raw) {
    const auto payload = extract_json_object(raw);
    if (!payload)
        raise(ErrorKind::DiagnosisFormat,
              "no JSON object in diagnosis response");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(*payload);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::DiagnosisFormat,
              std::string("diagnosis response is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        raise(ErrorKind::DiagnosisFormat,
              "diagnosis response is not a JSON object");

    Diagnosis result;
    if (doc.contains("root_cause") && doc["root_cause"].is_string()) {
        const std::string label = doc["root_cause"].get<std::string>();
        if (auto cause = parse_root_cause(label)) {
            result.root_cause = *cause;
        } else {
            log_warn("root cause '" + label +
                     "' is not an exact taxonomy label; recording UNKNOWN");
        }
    } else {
        log_warn("diagnosis response lacks a root_cause; recording UNKNOWN");
    }

    if (doc.contains("severity") && doc["severity"].is_string()) {
        const std::string label = doc["severity"].get<std::string>();
        if (auto severity = parse_severity(label)) {
            result.severity = *severity;
        } else {
            log_warn("severity '" + label + "' unrecognized; using medium");
        }
    } else {
        log_warn("diagnosis response lacks a severity; using medium");
    }

    if (doc.contains("explanation") && doc["explanation"].is_string())
        result.explanation = doc["explanation"].get<std::string>();

    if (doc.contains("confidence") && doc["confidence"].is_number()) {
        result.confidence =
            std::clamp(doc["confidence"].get<double>(), 0.0, 1.0);
    }
    return result;
}

// ===== analysis =====

Diagnosis diagnose(const std::string& query_text, const ContrastPair& pair,
                   llm::Adapter& adapter) {
    llm::ChatRequest request;
    request.user = prompts::render(
        prompts::get("diagnosis_failure_analysis"),
        {{"query", query_text},
         {"competitor", chunker::extract_text(pair.competitor_html)},
         {"target", chunker::extract_text(pair.target_html)},
         {"failure_taxonomy", prompts::get("diagnosis_taxonomy")},
         {"format_instructions", prompts::get("diagnosis_format_instructions")}});
    request.tag = "diagnosis";

    Diagnosis result = parse_diagnosis(adapter.complete(request));
    result.competitor_id = pair.competitor_id;
    return result;
}

TaxonomyHistogram histogram(const std::vector<Diagnosis>& diagnoses) {
    TaxonomyHistogram result;
    for (const auto& diagnosis : diagnoses) {
        ++result.by_cause[to_string(diagnosis.root_cause)];
        ++result.by_category[to_string(category_of(diagnosis.root_cause))];
        ++result.total;
    }
    return result;
}

} // namespace agentgeo::diagnosis
