#pragma once

#include <functional>

#include <json.hpp>

namespace s2st {

using LogSink = std::function<void(const nlohmann::json&)>;

// Structured log events (one JSON object each). The default sink writes
// newline-delimited JSON to stderr.
void log_event(const nlohmann::json& event);
// Returns the sink that was installed before.
LogSink set_log_sink(LogSink sink);
LogSink default_log_sink();

// Milliseconds since the first call; used for wall-clock fields.
double wall_clock_ms();

}  // namespace s2st
