#pragma once

#include <cstddef>
#include <functional>
#include <memory>

namespace taxelsim {

/// Fixed-size worker pool for data-parallel loops. threads == 0 means all
/// hardware threads; threads == 1 runs loops inline on the caller.
class Executor {
 public:
  explicit Executor(std::size_t threads = 0);
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  std::size_t threads() const { return threads_; }

  /// Calls body(begin, end) over disjoint chunks covering [0, n).
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) const;

 private:
  struct Impl;
  std::size_t threads_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace taxelsim
