#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gmclt {

inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Static contiguous partition of [0, n) over `workers` threads; fn(begin, end)
// runs once per non-empty chunk. Results must be written by index so that the
// outcome does not depend on the partition. The first exception is rethrown.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  workers = std::max(1u, workers);
  const std::size_t chunks = std::min<std::size_t>(workers, n);
  if (chunks == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  const std::size_t base = n / chunks;
  const std::size_t extra = n % chunks;
  std::size_t begin = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t end = begin + base + (c < extra ? 1 : 0);
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace gmclt
