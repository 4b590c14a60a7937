#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

namespace procap {

// Collects warnings emitted while loading or processing data. Messages are
// also forwarded to stderr unless `quiet` is set.
class Diagnostics {
 public:
  explicit Diagnostics(bool quiet = false) : quiet_(quiet) {}

  void warn(const std::string& message) {
    std::lock_guard<std::mutex> lock(mutex_);
    warnings_.push_back(message);
    if (!quiet_) std::cerr << "WARNING: " << message << '\n';
  }

  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t count() const { return warnings_.size(); }

 private:
  bool quiet_;
  std::mutex mutex_;
  std::vector<std::string> warnings_;
};

// Route a warning to `diag` when given, otherwise straight to stderr.
inline void warn(Diagnostics* diag, const std::string& message) {
  if (diag != nullptr) {
    diag->warn(message);
  } else {
    std::cerr << "WARNING: " << message << '\n';
  }
}

}  // namespace procap
