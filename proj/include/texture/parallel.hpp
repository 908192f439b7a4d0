#ifndef TEXTURE_PARALLEL_HPP
#define TEXTURE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace texture {

/// Worker count: hardware concurrency, capped by TEXTURE_THREADS when set.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TEXTURE_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = static_cast<std::size_t>(cap);
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return n;
}

/// Runs fn(i) for i in [0, count). Each index writes only its own output
/// slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t workers = worker_count()) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace texture

#endif  // TEXTURE_PARALLEL_HPP
