#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "gazelign/error.hpp"

namespace gazelign {

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parallel map
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index writes only
/// its own output slot, so results do not depend on scheduling. The first
/// exception (by index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Logging: one line per event on stderr, `LEVEL event key=value ...`.
// ---------------------------------------------------------------------------

enum class LogLevel { debug, info, warn, error };

class Logger {
 public:
  static Logger& instance() {
    static Logger l;
    return l;
  }

  void set_level(LogLevel l) { min_ = l; }
  void set_stream(std::ostream* os) { os_ = os; }

  void log(LogLevel level, std::string_view event, std::string_view detail = {}) {
    if (level < min_ || !os_) return;
    std::lock_guard lock(mu_);
    *os_ << name(level) << ' ' << event;
    if (!detail.empty()) *os_ << ' ' << detail;
    *os_ << '\n';
  }

 private:
  static std::string_view name(LogLevel l) {
    switch (l) {
      case LogLevel::debug: return "DEBUG";
      case LogLevel::info: return "INFO";
      case LogLevel::warn: return "WARN";
      case LogLevel::error: return "ERROR";
    }
    return "?";
  }

  LogLevel min_ = LogLevel::info;
  std::ostream* os_ = &std::cerr;
  std::mutex mu_;
};

inline void log_info(std::string_view event, std::string_view detail = {}) {
  Logger::instance().log(LogLevel::info, event, detail);
}
inline void log_warn(std::string_view event, std::string_view detail = {}) {
  Logger::instance().log(LogLevel::warn, event, detail);
}
inline void log_error(std::string_view event, std::string_view detail = {}) {
  Logger::instance().log(LogLevel::error, event, detail);
}

}  // namespace gazelign
