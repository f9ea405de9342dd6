#include "agentgeo/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentgeo/error.hpp"
#include "agentgeo/log.hpp"
#include "agentgeo/text.hpp"

using nlohmann::json;

namespace agentgeo::llm {

// ===== scripted adapter =====

ScriptedAdapter::ScriptedAdapter(std::vector<TranscriptEntry> entries,
                                 bool strict)
    : strict_(strict) {
    for (TranscriptEntry& entry : entries)
        slots_.push_back(Slot{std::move(entry), 0});
}

std::vector<TranscriptEntry> load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        raise(ErrorKind::Usage, "cannot open transcript file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        raise(ErrorKind::Format,
              "transcript '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_array())
        raise(ErrorKind::Format,
              "transcript '" + path + "' must be a JSON list of entries");
    std::vector<TranscriptEntry> entries;
    for (const json& item : doc) {
        if (!item.is_object() || !item.contains("match") ||
            !item.contains("response"))
            raise(ErrorKind::Format,
                  "transcript '" + path +
                      "': each entry needs 'match' and 'response'");
        TranscriptEntry entry;
        entry.match = item["match"].get<std::string>();
        entry.response = item["response"].get<std::string>();
        entry.max_uses = item.value("max_uses", 0);
        entry.regex = item.value("regex", false);
        entries.push_back(std::move(entry));
    }
    return entries;
}

ScriptedAdapter ScriptedAdapter::from_file(const std::string& path,
                                           bool strict) {
    return ScriptedAdapter(load_transcript(path), strict);
}

std::string ScriptedAdapter::complete(const ChatRequest& request) {
    if (request.user.empty())
        raise(ErrorKind::Config, "chat request has an empty user prompt (" +
                                     request.tag + ")");
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    tags_.push_back(request.tag);
    for (Slot& slot : slots_) {
        if (slot.entry.max_uses > 0 && slot.uses >= slot.entry.max_uses)
            continue;
        bool matched;
        if (slot.entry.regex) {
            std::regex re(slot.entry.match);
            matched = std::regex_search(request.user, re);
        } else {
            matched = request.user.find(slot.entry.match) != std::string::npos;
        }
        if (matched) {
            ++slot.uses;
            return slot.entry.response;
        }
    }
    if (strict_)
        raise(ErrorKind::UnmatchedPrompt,
              "no transcript entry matches request '" + request.tag + "'");
    log_warn("scripted adapter: no entry for request '" + request.tag +
             "', returning empty completion");
    return {};
}

std::size_t ScriptedAdapter::calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

std::vector<std::string> ScriptedAdapter::request_tags() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return tags_;
}

// ===== HTTP adapter =====

HttpConfig HttpConfig::from_env() {
    HttpConfig config;
    if (const char* v = std::getenv("AGENTGEO_LLM_ENDPOINT"))
        config.endpoint = v;
    if (const char* v = std::getenv("AGENTGEO_LLM_KEY"))
        config.api_key = v;
    if (const char* v = std::getenv("AGENTGEO_LLM_MODEL"))
        config.model = v;
    return config;
}

HttpAdapter::HttpAdapter(HttpConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
        raise(ErrorKind::Config,
              "no LLM endpoint configured (set AGENTGEO_LLM_ENDPOINT)");
}

} // namespace agentgeo::llm

// httplib is header-only and heavy; keep it confined to this translation unit.
#include <httplib.h>

namespace agentgeo::llm {

namespace {

// Splits "https://host:port/path" into (scheme://host:port, /path).
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    std::size_t scheme = endpoint.find("://");
    std::size_t path_start = scheme == std::string::npos
                                 ? endpoint.find('/')
                                 : endpoint.find('/', scheme + 3);
    if (path_start == std::string::npos)
        return {endpoint, "/v1/chat/completions"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

} // namespace

std::string HttpAdapter::complete(const ChatRequest& request) {
    if (request.user.empty())
        raise(ErrorKind::Config, "chat request has an empty user prompt (" +
                                     request.tag + ")");
    json body;
    body["model"] = config_.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    body["messages"] = json::array();
    if (!request.system.empty())
        body["messages"].push_back(
            {{"role", "system"}, {"content", request.system}});
    body["messages"].push_back({{"role", "user"}, {"content", request.user}});

    auto [host, path] = split_endpoint(config_.endpoint);
    std::string payload = body.dump();
    std::string last_error;

    for (int attempt = 1; attempt <= config_.attempts; ++attempt) {
        httplib::Client client(host);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);

        auto res = client.Post(path, headers, payload, "application/json");
        if (res && res->status == 200) {
            try {
                json reply = json::parse(res->body);
                return reply.at("choices").at(0).at("message").at("content")
                    .get<std::string>();
            } catch (const json::exception& e) {
                last_error = std::string("unexpected response shape: ") + e.what();
            }
        } else if (res) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            last_error = "connection failure (" +
                         std::string(httplib::to_string(res.error())) + ")";
        }
        if (attempt < config_.attempts) {
            log_warn("LLM request '" + request.tag + "' attempt " +
                     std::to_string(attempt) + " failed: " + last_error);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(250 * (1 << (attempt - 1))));
        }
    }
    raise(ErrorKind::Transport, "LLM request '" + request.tag + "' failed after " +
                                    std::to_string(config_.attempts) +
                                    " attempts: " + last_error);
}

// ===== caching decorator =====

CachingAdapter::CachingAdapter(std::shared_ptr<Adapter> inner,
                               std::string directory)
    : inner_(std::move(inner)), directory_(std::move(directory)) {
    std::filesystem::create_directories(directory_);
}

std::string CachingAdapter::complete(const ChatRequest& request) {
    // The digest names the file; the stored triple is what authorizes a hit.
    std::string key = std::to_string(request.temperature) + "\x1f" +
                      request.system + "\x1f" + request.user;
    std::string digest = fnv1a64_hex(key);
    std::filesystem::path file =
        std::filesystem::path(directory_) / (digest + ".json");

    {
        std::lock_guard<std::mutex> lock(mutex_);
        std::ifstream in(file, std::ios::binary);
        if (in) {
            try {
                json doc;
                in >> doc;
                if (doc.value("system", "") == request.system &&
                    doc.value("user", "") == request.user &&
                    doc.value("temperature", 0.0) == request.temperature) {
                    ++hits_;
                    return doc.at("response").get<std::string>();
                }
            } catch (const json::exception&) {
                // unreadable cache entry: fall through and refresh it
            }
        }
    }

    std::string response = inner_->complete(request);

    std::lock_guard<std::mutex> lock(mutex_);
    ++misses_;
    json doc = {{"system", request.system},
                {"user", request.user},
                {"temperature", request.temperature},
                {"response", response}};
    std::ofstream out(file, std::ios::binary);
    if (out)
        out << doc.dump() << "\n";
    else
        log_warn("cache: cannot write entry " + file.string());
    return response;
}

std::size_t CachingAdapter::hits() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return hits_;
}

std::size_t CachingAdapter::misses() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return misses_;
}

} // namespace agentgeo::llm
