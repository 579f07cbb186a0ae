#ifndef ACMT_LOG_HPP
#define ACMT_LOG_HPP

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace acmt {

// Leveled stderr logging, controlled by ACMT_LOG_LEVEL (error|info|debug,
// default info). Header-only on purpose: the CLI is the main consumer.
enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static LogLevel lvl = [] {
        const char* env = std::getenv("ACMT_LOG_LEVEL");
        if (!env) return LogLevel::Info;
        if (std::strcmp(env, "error") == 0) return LogLevel::Error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return lvl;
}

template <typename... Args>
inline void log_at(LogLevel lvl, const char* tag, const char* fmt, Args... args) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

#define ACMT_LOG_ERROR(...) ::acmt::log_at(::acmt::LogLevel::Error, "error", __VA_ARGS__)
#define ACMT_LOG_INFO(...) ::acmt::log_at(::acmt::LogLevel::Info, "info", __VA_ARGS__)
#define ACMT_LOG_DEBUG(...) ::acmt::log_at(::acmt::LogLevel::Debug, "debug", __VA_ARGS__)

}  // namespace acmt

#endif
