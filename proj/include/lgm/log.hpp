#pragma once

// Minimal stderr logger. Verbosity comes from the LGM_LOG environment
// variable: 0 = errors only (default), 1 = info, 2 = debug.

#include <cstdio>
#include <cstdlib>
#include <string>

namespace lgm {

inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("LGM_LOG");
    if (!env) return 0;
    return std::atoi(env);
  }();
  return level;
}

namespace detail {

template <typename... Args>
void log_line(const char* prefix, const char* fmt, Args... args) {
  std::fputs(prefix, stderr);
  if constexpr (sizeof...(Args) == 0)
    std::fputs(fmt, stderr);
  else
    std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

}  // namespace detail

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= 1) detail::log_line("[lgm] ", fmt, args...);
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= 2) detail::log_line("[lgm debug] ", fmt, args...);
}

template <typename... Args>
void log_warn(const char* fmt, Args... args) {
  detail::log_line("[lgm warning] ", fmt, args...);
}

}  // namespace lgm
