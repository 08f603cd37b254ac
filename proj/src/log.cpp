#include "coughlab/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace coughlab::log {

namespace {

Level parse_env() {
    const char* env = std::getenv("COUGHLAB_LOG");
    if (!env) return Level::info;
    std::string v(env);
    if (v == "error") return Level::error;
    if (v == "warn") return Level::warn;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::info;
}

Level g_threshold = parse_env();
std::mutex g_mutex;

const char* tag(Level level) {
    switch (level) {
        case Level::error: return "error";
        case Level::warn: return "warn";
        case Level::info: return "info";
        case Level::debug: return "debug";
    }
    return "?";
}

}  // namespace

Level threshold() { return g_threshold; }

void set_threshold(Level level) { g_threshold = level; }

void emit(Level level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(g_threshold)) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "coughlab [" << tag(level) << "] " << msg << "\n";
}

}  // namespace coughlab::log
