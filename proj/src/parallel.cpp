#include "mlmc/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mlmc {

void run_lanes(int n_lanes, int n_threads, const std::function<void(int)>& fn) {
  if (n_threads < 1) n_threads = 1;
  if (n_threads == 1 || n_lanes <= 1) {
    for (int lane = 0; lane < n_lanes; ++lane) fn(lane);
    return;
  }
  int workers = n_threads < n_lanes ? n_threads : n_lanes;
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      int lane = next.fetch_add(1, std::memory_order_relaxed);
      if (lane >= n_lanes) return;
      try {
        fn(lane);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mlmc
