#include "taxelsim/parallel.hpp"

#include <algorithm>
#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace taxelsim {

struct Executor::Impl {
  explicit Impl(int threads) : arena(threads) {}
  tbb::task_arena arena;
};

Executor::Executor(std::size_t threads) : threads_(threads) {
  const std::size_t cores = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (threads_ == 0) threads_ = cores;
  // Oversubscribing buys nothing and makes TBB complain; output is the same
  // either way.
  const std::size_t workers = std::min(threads_, cores);
  if (workers > 1) impl_ = std::make_unique<Impl>(static_cast<int>(workers));
}

Executor::~Executor() = default;

void Executor::parallel_for(std::size_t n,
                            const std::function<void(std::size_t, std::size_t)>& body) const {
  if (n == 0) return;
  if (!impl_) {
    body(0, n);
    return;
  }
  impl_->arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 256),
                      [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); });
  });
}

}  // namespace taxelsim
