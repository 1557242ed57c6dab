#pragma once

#include <string_view>

namespace xmodal::log {

enum class Level { Off, Warn, Info, Debug };

void set_level(Level level);

/// Reads XMODAL_LOG (off|info|debug). Unset or empty means warnings only.
/// Returns false and leaves the level unchanged on an unrecognized value.
bool configure_from_env();

void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace xmodal::log
