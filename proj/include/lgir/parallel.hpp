#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lgir {

// Paths are processed in fixed chunks of this many indices; every chunk writes
// only its own output slots, so results do not depend on the thread count or
// on which thread handled which chunk.
constexpr std::size_t kChunkSize = 256;

// Calls fn(begin, end) for consecutive index ranges covering [0, n).
template <class F>
void parallel_for_chunks(std::size_t n, int threads, F&& fn) {
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  auto run_chunk = [&](std::size_t c) {
    const std::size_t b = c * kChunkSize;
    fn(b, std::min(n, b + kChunkSize));
  };
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), chunks));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= chunks) return;
        try {
          run_chunk(c);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Pairwise (cascade) summation in a fixed association order.
double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace lgir
