#include "pipeplan/log.hpp"

#include <cstdlib>
#include <iostream>

namespace pipeplan {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("PICO_LOG");
        if (!env) return LogLevel::Error;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Error;
    }();
    return level;
}

void log(LogLevel level, const std::string& message) {
    if (level > log_level()) return;
    static const char* names[] = {"error", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

} // namespace pipeplan
