#pragma once

// Shared fixtures for the unit tests: transcript helpers, log capture, and
// small deterministic text generators.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "agentgeo/llm.hpp"
#include "agentgeo/log.hpp"

namespace testsupport {

inline agentgeo::llm::TranscriptEntry entry(std::string match,
                                            std::string response,
                                            int max_uses = 0,
                                            bool regex = false) {
    agentgeo::llm::TranscriptEntry e;
    e.match = std::move(match);
    e.response = std::move(response);
    e.max_uses = max_uses;
    e.regex = regex;
    return e;
}

// Answers every request through a user-supplied function.
class CallbackAdapter : public agentgeo::llm::Adapter {
public:
    using Fn = std::function<std::string(const agentgeo::llm::ChatRequest&)>;
    explicit CallbackAdapter(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const agentgeo::llm::ChatRequest& request) override {
        return fn_(request);
    }

private:
    Fn fn_;
};

// Records every request it sees and answers each from a fixed queue,
// repeating the last response once the queue runs dry.
class CapturingAdapter : public agentgeo::llm::Adapter {
public:
    explicit CapturingAdapter(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}

    std::string complete(const agentgeo::llm::ChatRequest& request) override {
        requests_.push_back(request);
        if (responses_.empty()) return "";
        const std::size_t index =
            std::min(requests_.size() - 1, responses_.size() - 1);
        return responses_[index];
    }

    const std::vector<agentgeo::llm::ChatRequest>& requests() const {
        return requests_;
    }

private:
    std::vector<std::string> responses_;
    std::vector<agentgeo::llm::ChatRequest> requests_;
};

// Collects log lines at or above the given level while alive; restores the
// previous sink and level on destruction.
class LogCapture {
public:
    explicit LogCapture(agentgeo::LogLevel level = agentgeo::LogLevel::Warn) {
        previous_level_ = agentgeo::set_log_level(agentgeo::LogLevel::Debug);
        previous_sink_ = agentgeo::set_log_sink(
            [this, level](agentgeo::LogLevel l, const std::string& message) {
                if (l >= level) lines_.push_back(message);
            });
    }
    ~LogCapture() {
        agentgeo::set_log_sink(previous_sink_);
        agentgeo::set_log_level(previous_level_);
    }
    LogCapture(const LogCapture&) = delete;
    LogCapture& operator=(const LogCapture&) = delete;

    const std::vector<std::string>& lines() const { return lines_; }
    bool saw(const std::string& needle) const {
        for (const auto& line : lines_) {
            if (line.find(needle) != std::string::npos) return true;
        }
        return false;
    }

private:
    std::vector<std::string> lines_;
    agentgeo::LogSink previous_sink_;
    agentgeo::LogLevel previous_level_;
};

// Deterministic word soup for fixtures; never empty for count >= 1.
inline std::string words(std::mt19937_64& rng, int count) {
    static const std::vector<std::string> vocab = {
        "alpaca", "baseline", "criteria", "dataset",  "engine", "fabric",
        "grammar", "harvest",  "insight",  "junction", "kernel", "ledger",
        "measure", "notation", "orchard",  "paradigm", "quartz", "ratio",
        "segment", "texture",  "uplift",   "vector",   "window", "yield",
    };
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string out;
    for (int i = 0; i < count; ++i) {
        if (!out.empty()) out += " ";
        out += vocab[pick(rng)];
    }
    return out;
}

// A paragraph guaranteed to stay its own chunk (>= 200 visible characters).
inline std::string big_para(const std::string& lead) {
    std::string text = lead;
    while (text.size() < 220) {
        text += " and the record keeps the remaining context nearby";
    }
    return "<p>" + text + "</p>";
}

// A scratch directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (stem + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

} // namespace testsupport
