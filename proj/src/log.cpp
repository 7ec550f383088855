#include "mgmn/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mgmn::log {
namespace {

std::mutex g_mutex;
std::atomic<std::size_t> g_errors{0};

void default_sink(Level level, std::string_view message) {
  static constexpr const char* kPrefix[] = {"", "warning: ", "error: "};
  std::cerr << kPrefix[static_cast<int>(level)] << message << '\n';
}

Sink& sink() {
  static Sink s = default_sink;
  return s;
}

void emit(Level level, std::string_view message) {
  if (level == Level::error) ++g_errors;
  std::lock_guard lock(g_mutex);
  if (sink()) sink()(level, message);
}

}  // namespace

Sink set_sink(Sink s) {
  std::lock_guard lock(g_mutex);
  Sink old = std::move(sink());
  sink() = std::move(s);
  return old;
}

void info(std::string_view message) { emit(Level::info, message); }
void warn(std::string_view message) { emit(Level::warning, message); }
void error(std::string_view message) { emit(Level::error, message); }

std::size_t error_count() { return g_errors.load(); }

}  // namespace mgmn::log
