#pragma once

#include <iostream>
#include <string_view>

namespace longbasis::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity comes from LONGBASIS_LOG (error|warn|info|debug), default warn.
Level threshold();
void set_threshold(Level level);
Level parse_level(std::string_view text);

void write(Level level, std::string_view message);

inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }

} // namespace longbasis::log
