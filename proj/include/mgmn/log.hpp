#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace mgmn::log {

enum class Level { info, warning, error };

using Sink = std::function<void(Level, std::string_view)>;

/// Replaces the process-wide sink (default: standard error). Returns the old one.
Sink set_sink(Sink sink);

void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

/// Number of error records emitted since start-up.
std::size_t error_count();

}  // namespace mgmn::log
