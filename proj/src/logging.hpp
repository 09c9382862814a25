#pragma once

#include <string>

namespace ccqm::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Threshold from CCQM_LOG_LEVEL (default warn).
Level threshold();
void write(Level level, const std::string& message);

inline void error(const std::string& m) { write(Level::error, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void debug(const std::string& m) { write(Level::debug, m); }

} // namespace ccqm::log
