#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentgeo/engine.hpp"
#include "agentgeo/llm.hpp"

namespace agentgeo::diagnosis {

// The closed failure taxonomy. Any response string that is not exactly one
// of the fifteen labels maps to Unknown, never to a fuzzy match.
enum class RootCause {
    ParsingFailure,
    ContentTruncated,
    DataIntegrity,
    WebNoise,
    LowSignalRatio,
    LowInfoDensity,
    MissingInfo,
    StructuralWeakness,
    SemanticIrrelevance,
    AttributeMismatch,
    BuriedAnswer,
    NonFactualContent,
    TrustCredibility,
    OutdatedContent,
    Unknown,
};

enum class Severity { Low = 1, Medium = 2, High = 3, Critical = 4 };

enum class Category {
    TechnicalIntegrity,
    SemanticAlignment,
    ContentQuality,
    SystemicExclusion,
    Uncategorized,
};

const char* to_string(RootCause cause);     // the UPPER_SNAKE wire labels
const char* to_string(Severity severity);   // "critical" .. "low"
const char* to_string(Category category);

std::optional<RootCause> parse_root_cause(const std::string& label); // exact
std::optional<Severity> parse_severity(const std::string& label);   // case-blind

inline int rank(Severity severity) { return static_cast<int>(severity); }

Category category_of(RootCause cause);

const std::vector<RootCause>& all_root_causes(); // the 15 labels, Unknown last

struct Diagnosis {
    RootCause root_cause = RootCause::Unknown;
    Severity severity = Severity::Medium;
    std::string explanation;
    double confidence = 0.5;
    std::string competitor_id;
};

struct TaxonomyHistogram {
    std::map<std::string, int> by_cause;
    std::map<std::string, int> by_category;
    int total = 0;
};

// The best-ranked cited non-target source; empty when the answer cited
// nothing usable as a contrast.
std::optional<std::string> select_competitor(
    const engine::CitationOutcome& outcome);

// select_competitor, falling back to the best-ranked non-target candidate
// with a warning. Raises Config when no non-target candidate exists at all.
std::string competitor_or_fallback(const engine::CitationOutcome& outcome);

// Strict parse of the analyst response: fenced JSON accepted, non-exact root
// causes become Unknown, missing severity defaults to medium, missing
// confidence to 0.5. Raises DiagnosisFormat when no JSON object is present.
Diagnosis parse_diagnosis(const std::string& raw);

struct ContrastPair {
    std::string target_id;
    std::string target_html;
    std::string competitor_id;
    std::string competitor_html;
};

// Contrastive failure analysis over the extracted text of both documents.
Diagnosis diagnose(const std::string& query_text, const ContrastPair& pair,
                   llm::Adapter& adapter);

TaxonomyHistogram histogram(const std::vector<Diagnosis>& diagnoses);

} // namespace agentgeo::diagnosis
