#include "agentgeo/error.hpp"

namespace agentgeo {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Format: return "format";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Range: return "range";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::StaleMap: return "stale-map";
    case ErrorKind::Template: return "template";
    case ErrorKind::ToolOutput: return "tool-output";
    case ErrorKind::Targeting: return "targeting";
    case ErrorKind::PolicyExhausted: return "policy-exhausted";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::UnmatchedPrompt: return "unmatched-prompt";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::Retrieval: return "retrieval";
    case ErrorKind::GenerationFormat: return "generation-format";
    case ErrorKind::SelectionFormat: return "selection-format";
    case ErrorKind::Clustering: return "clustering";
    case ErrorKind::DiagnosisFormat: return "diagnosis-format";
    case ErrorKind::ProfileFailure: return "profile-failure";
    case ErrorKind::DedupIntegrity: return "dedup-integrity";
    case ErrorKind::Partial: return "partial";
    }
    return "unknown";
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Usage:
        return 1;
    case ErrorKind::Transport:
    case ErrorKind::UnmatchedPrompt:
        return 3;
    case ErrorKind::Partial:
        return 4;
    default:
        return 2;
    }
}

} // namespace agentgeo
