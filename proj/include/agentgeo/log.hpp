#pragma once

#include <functional>
#include <string>

namespace agentgeo {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Diagnostics go to stderr by default; tests may install a capturing sink.
// Both setters return the previous value. Sink invocation is serialized, so
// concurrent repair loops may log freely.
LogSink set_log_sink(LogSink sink);
LogLevel set_log_level(LogLevel level);

void log(LogLevel level, const std::string& message);

inline void log_debug(const std::string& m) { log(LogLevel::Debug, m); }
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_warn(const std::string& m) { log(LogLevel::Warn, m); }
inline void log_error(const std::string& m) { log(LogLevel::Error, m); }

} // namespace agentgeo
