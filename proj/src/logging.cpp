#include "logging.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace ccqm::log {

Level threshold()
{
    static const Level level = [] {
        const char* env = std::getenv("CCQM_LOG_LEVEL");
        const std::string s = env ? env : "warn";
        if (s == "error") return Level::error;
        if (s == "info") return Level::info;
        if (s == "debug") return Level::debug;
        return Level::warn;
    }();
    return level;
}

void write(Level level, const std::string& message)
{
    if (static_cast<int>(level) > static_cast<int>(threshold())) return;
    static std::mutex mu;
    static constexpr const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(mu);
    std::cerr << "[ccqm " << names[static_cast<int>(level)] << "] " << message << '\n';
}

} // namespace ccqm::log
