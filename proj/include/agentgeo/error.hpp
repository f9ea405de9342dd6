#pragma once

#include <stdexcept>
#include <string>

namespace agentgeo {

// Every failure the library raises carries a kind so callers (and the CLI
// exit-code mapping) can react without string matching.
enum class ErrorKind {
    Usage,            // bad invocation, unknown config key, missing argument
    Format,           // malformed JSON / unparseable model output
    Integrity,        // dangling cross-reference, violated dataset invariant
    Config,           // invalid option value or precondition on a call
    Parse,            // catastrophically unparseable document bytes
    Range,            // index outside the valid range
    Conflict,         // two edits target the same chunk
    StaleMap,         // chunk map does not describe the supplied document
    Template,         // unresolved or missing prompt placeholder
    ToolOutput,       // tool returned empty or unusable content
    Targeting,        // chunk targeting failed after the single re-ask
    PolicyExhausted,  // every tool masked for the current diagnosis
    Transport,        // HTTP failure after retries, timeout
    UnmatchedPrompt,  // strict scripted adapter had no entry for a request
    UndefinedMetric,  // metric asked over an empty domain
    Retrieval,        // empty candidate pool or k < 1
    GenerationFormat, // engine could not parse a generation into sentences
    SelectionFormat,  // attr-first selection outside the chunk space
    Clustering,       // fewer than two clusters after the single retry
    DiagnosisFormat,  // no JSON object in a diagnosis response
    ProfileFailure,   // profile extraction yielded no usable keywords
    DedupIntegrity,   // dedup output not a subset of its input
    Partial,          // run aborted after partial progress was recorded
};

const char* to_string(ErrorKind kind);

// CLI exit statuses: 0 success, 1 usage, 2 data/integrity, 3 transport,
// 4 partial completion.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace agentgeo
