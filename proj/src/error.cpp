#include "forgetbench/error.hpp"

#include <iostream>
#include <mutex>

namespace forgetbench {

namespace {
std::mutex sink_mutex;
WarningSink& sink() {
  static WarningSink s = [](std::string_view m) { std::cerr << "warning: " << m << '\n'; };
  return s;
}
}  // namespace

void set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex);
  sink() = s ? std::move(s) : [](std::string_view m) { std::cerr << "warning: " << m << '\n'; };
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  sink()(message);
}

}  // namespace forgetbench
