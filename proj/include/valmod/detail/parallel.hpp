#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace valmod::detail {

inline unsigned resolve_workers(unsigned requested) noexcept {
  if (requested > 0)
    return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(task, worker) for every task in [0, tasks). Task boundaries are
/// fixed by the caller, so results never depend on the worker count as long
/// as fn writes only task-owned or worker-owned state.
template <class Fn>
void parallel_for(std::size_t tasks, unsigned workers, Fn &&fn) {
  workers = std::min<unsigned>(resolve_workers(workers),
                               static_cast<unsigned>(std::max<std::size_t>(tasks, 1)));
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t)
      fn(t, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t t = next++; t < tasks; t = next++)
          fn(t, w);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error)
          error = std::current_exception();
        next = tasks;
      }
    });
  }
  for (auto &th : pool)
    th.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace valmod::detail
