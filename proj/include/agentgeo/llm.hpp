#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace agentgeo::llm {

struct ChatRequest {
    std::string system;
    std::string user;       // never empty
    double temperature = 0.0;
    int max_tokens = 4096;
    std::string tag;        // caller label surfaced in errors, e.g. "tool:bluf_optimization"
};

class Adapter {
public:
    virtual ~Adapter() = default;
    // Returns the raw completion text. Raises Transport after retries are
    // exhausted, UnmatchedPrompt for a strict scripted adapter with no entry.
    virtual std::string complete(const ChatRequest& request) = 0;
};

// ===== scripted adapter =====

// One transcript entry. `match` is a substring of the user prompt by default,
// a full std::regex search when `regex` is true. Entries are evaluated in
// order; the first live match wins. `max_uses` 0 means unlimited.
struct TranscriptEntry {
    std::string match;
    std::string response;
    int max_uses = 0;
    bool regex = false;
};

// Parses a transcript file (a JSON list of {match, response, max_uses,
// regex}); Usage when unreadable, Format when malformed.
std::vector<TranscriptEntry> load_transcript(const std::string& path);

class ScriptedAdapter : public Adapter {
public:
    explicit ScriptedAdapter(std::vector<TranscriptEntry> entries,
                             bool strict = true);

    // Transcript file: a JSON list of {match, response, max_uses, regex}.
    static ScriptedAdapter from_file(const std::string& path, bool strict = true);

    std::string complete(const ChatRequest& request) override;

    std::size_t calls() const;
    std::vector<std::string> request_tags() const;

private:
    struct Slot {
        TranscriptEntry entry;
        int uses = 0;
    };
    mutable std::mutex mutex_;
    std::vector<Slot> slots_;
    bool strict_;
    std::size_t calls_ = 0;
    std::vector<std::string> tags_;
};

// ===== HTTP adapter =====

// OpenAI-style chat endpoint. Endpoint, key and model come from
// AGENTGEO_LLM_ENDPOINT / AGENTGEO_LLM_KEY / AGENTGEO_LLM_MODEL unless set
// explicitly. 120 s request timeout, 3 attempts with bounded backoff.
struct HttpConfig {
    std::string endpoint;
    std::string api_key;
    std::string model;
    int timeout_seconds = 120;
    int attempts = 3;

    static HttpConfig from_env();
};

class HttpAdapter : public Adapter {
public:
    explicit HttpAdapter(HttpConfig config);
    std::string complete(const ChatRequest& request) override;

private:
    HttpConfig config_;
};

// ===== caching decorator =====

// Content-addressed response cache keyed by the (system, user, temperature)
// triple. Files live under `directory`, named by the key digest, and store
// the full triple so a digest collision can never serve a wrong response.
class CachingAdapter : public Adapter {
public:
    CachingAdapter(std::shared_ptr<Adapter> inner, std::string directory);
    std::string complete(const ChatRequest& request) override;

    std::size_t hits() const;
    std::size_t misses() const;

private:
    std::shared_ptr<Adapter> inner_;
    std::string directory_;
    mutable std::mutex mutex_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

} // namespace agentgeo::llm
