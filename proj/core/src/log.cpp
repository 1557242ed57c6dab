#include "xmodal/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace xmodal::log {

namespace {

spdlog::logger& instance() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("xmodal");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *logger;
}

}  // namespace

void set_level(Level level) {
  switch (level) {
    case Level::Off: instance().set_level(spdlog::level::off); break;
    case Level::Warn: instance().set_level(spdlog::level::warn); break;
    case Level::Info: instance().set_level(spdlog::level::info); break;
    case Level::Debug: instance().set_level(spdlog::level::debug); break;
  }
}

bool configure_from_env() {
  const char* env = std::getenv("XMODAL_LOG");
  const std::string v = env ? env : "";
  if (v.empty()) set_level(Level::Warn);
  else if (v == "off") set_level(Level::Off);
  else if (v == "info") set_level(Level::Info);
  else if (v == "debug") set_level(Level::Debug);
  else return false;
  return true;
}

void warn(std::string_view msg) { instance().warn("{}", msg); }
void info(std::string_view msg) { instance().info("{}", msg); }
void debug(std::string_view msg) { instance().debug("{}", msg); }

}  // namespace xmodal::log
