#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

namespace fermikac {

template <typename T>
std::vector<T> run_replicas(int count, int threads, const std::function<T(int)>& fn) {
  std::vector<T> out(static_cast<std::size_t>(std::max(0, count)));
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int r = 0; r < count; ++r) out[static_cast<std::size_t>(r)] = fn(r);
    return out;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex lock;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int r = w; r < count; r += workers) {
        try {
          out[static_cast<std::size_t>(r)] = fn(r);
        } catch (...) {
          std::lock_guard<std::mutex> g(lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace fermikac
