#include "agentgeo/log.hpp"

#include <cstdio>
#include <mutex>
#include <utility>

namespace agentgeo {

namespace {

std::mutex g_mutex;
LogLevel g_level = LogLevel::Info;
LogSink g_sink; // empty => stderr

const char* level_tag(LogLevel level) {
    switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    }
    return "?";
}

} // namespace

LogSink set_log_sink(LogSink sink) {
    std::lock_guard<std::mutex> lock(g_mutex);
    LogSink previous = std::move(g_sink);
    g_sink = std::move(sink);
    return previous;
}

LogLevel set_log_level(LogLevel level) {
    std::lock_guard<std::mutex> lock(g_mutex);
    LogLevel previous = g_level;
    g_level = level;
    return previous;
}

void log(LogLevel level, const std::string& message) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (level < g_level)
        return;
    if (g_sink) {
        g_sink(level, message);
        return;
    }
    std::fprintf(stderr, "[%s] %s\n", level_tag(level), message.c_str());
}

} // namespace agentgeo
