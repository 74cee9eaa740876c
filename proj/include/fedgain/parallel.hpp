#pragma once

// Deterministic index-space parallelism for replication ensembles. Workers
// get disjoint contiguous index blocks and must write only to slots they
// own; aggregation happens afterwards in index order, so results never
// depend on scheduling.

#include <exception>
#include <thread>
#include <vector>

namespace fedgain {

template <typename Fn>
void parallel_for(long n, Fn&& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  if (n <= 0) return;
  if (threads == 1 || n == 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned workers =
      static_cast<unsigned>(std::min<long>(n, static_cast<long>(threads)));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      const long begin = n * t / workers;
      const long end = n * (t + 1) / workers;
      try {
        for (long i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fedgain
