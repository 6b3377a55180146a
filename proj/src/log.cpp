#include "longbasis/log.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string>

namespace longbasis::log {
namespace {

std::atomic<int>& level_slot() {
    static std::atomic<int> slot = [] {
        const char* env = std::getenv("LONGBASIS_LOG");
        return static_cast<int>(env ? parse_level(env) : Level::Warn);
    }();
    return slot;
}

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Level parse_level(std::string_view text) {
    if (text == "error") return Level::Error;
    if (text == "info") return Level::Info;
    if (text == "debug") return Level::Debug;
    return Level::Warn;
}

Level threshold() { return static_cast<Level>(level_slot().load()); }

void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
    if (static_cast<int>(level) > level_slot().load())
        return;
    static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(sink_mutex());
    std::clog << "[longbasis:" << tags[static_cast<int>(level)] << "] " << message << '\n';
}

} // namespace longbasis::log
