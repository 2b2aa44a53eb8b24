#include "distill/log.hpp"

#include <iostream>
#include <mutex>

namespace distill::log {
namespace {

std::mutex g_mutex;
Level g_min = Level::info;

const char* label(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "info";
}

Sink& sink() {
    static Sink s = [](Level level, std::string_view message) {
        std::cerr << "[" << label(level) << "] " << message << '\n';
    };
    return s;
}

}  // namespace

Sink set_sink(Sink s) {
    std::lock_guard lock(g_mutex);
    std::swap(sink(), s);
    return s;
}

void set_min_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_min = level;
}

void write(Level level, std::string_view message) {
    std::lock_guard lock(g_mutex);
    if (level < g_min || !sink()) return;
    sink()(level, message);
}

}  // namespace distill::log
