#include "s2st/log.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>

namespace s2st {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

LogSink& current_sink() {
  static LogSink sink = default_log_sink();
  return sink;
}

}  // namespace

LogSink default_log_sink() {
  return [](const nlohmann::json& event) {
    std::string line = event.dump();
    line.push_back('\n');
    std::fputs(line.c_str(), stderr);
  };
}

LogSink set_log_sink(LogSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  LogSink prev = std::move(current_sink());
  current_sink() = sink ? std::move(sink) : [](const nlohmann::json&) {};
  return prev;
}

void log_event(const nlohmann::json& event) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  current_sink()(event);
}

double wall_clock_ms() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double, std::milli>(clock::now() - start).count();
}

}  // namespace s2st
