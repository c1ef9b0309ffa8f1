#include "bevreproj/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace bevreproj {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) {
  g_threads.store(std::max(1, n));
}

int thread_count() {
  return g_threads.load();
}

void parallel_chunks(int n, const std::function<void(int, int)>& fn) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1 || n <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int b = std::min(n, w * chunk);
    const int e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace bevreproj
