#ifndef MORAN_REPLICATES_HPP
#define MORAN_REPLICATES_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace moran {

/// Worker count: 1 in strict mode, otherwise hardware concurrency capped by
/// MORAN_MOMENTS_THREADS when that is set to a positive integer.
inline std::size_t worker_count(bool strict) {
  if (strict) return 1;
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MORAN_MOMENTS_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
    }
  }
  return n;
}

/// Calls fn(r) for r in [0, count) on up to `workers` threads. Each replicate
/// owns its output slot, so results do not depend on the number of workers.
template <class F>
void for_each_replicate_on(std::size_t workers, std::size_t count, F&& fn) {
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        fn(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <class F>
void for_each_replicate(std::size_t count, bool strict, F&& fn) {
  for_each_replicate_on(worker_count(strict), count, std::forward<F>(fn));
}

/// Pairwise (tree) summation in index order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace moran

#endif  // MORAN_REPLICATES_HPP
