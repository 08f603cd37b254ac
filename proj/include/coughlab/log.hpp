#pragma once

#include <string>

namespace coughlab::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold comes from COUGHLAB_LOG (error|warn|info|debug), default info.
Level threshold();
void set_threshold(Level level);

void emit(Level level, const std::string& msg);

inline void error(const std::string& msg) { emit(Level::error, msg); }
inline void warn(const std::string& msg) { emit(Level::warn, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void debug(const std::string& msg) { emit(Level::debug, msg); }

}  // namespace coughlab::log
