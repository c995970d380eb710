#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace nie {

enum class LogLevel : int { Debug = 0, Info = 1, Warn = 2, Error = 3 };

/// Verbosity is controlled by the NIE_LOG environment variable
/// (debug|info|warn|error). Default is info.
inline LogLevel log_threshold() {
    static LogLevel level = [] {
        const char* env = std::getenv("NIE_LOG");
        if (env == nullptr) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        return LogLevel::Info;
    }();
    return level;
}

inline void log_line(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) < static_cast<int>(log_threshold())) return;
    const char* tag = "info";
    switch (level) {
        case LogLevel::Debug: tag = "debug"; break;
        case LogLevel::Info: tag = "info"; break;
        case LogLevel::Warn: tag = "warn"; break;
        case LogLevel::Error: tag = "error"; break;
    }
    std::fprintf(stderr, "[nie %s] %s\n", tag, msg.c_str());
}

inline void log_debug(const std::string& msg) { log_line(LogLevel::Debug, msg); }
inline void log_info(const std::string& msg) { log_line(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_line(LogLevel::Warn, msg); }
inline void log_error(const std::string& msg) { log_line(LogLevel::Error, msg); }

}  // namespace nie
