#include "cpopt/exec.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cpopt {

void parallel_for(std::size_t n, const Exec& exec,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, exec.workers), n == 0 ? 1 : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  threads.clear();
  if (first_error) std::rethrow_exception(first_error);
}

double ordered_sum(std::size_t n, const Exec& exec,
                   const std::function<double(std::size_t)>& term) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto reduce_block = [&](std::size_t b) {
    const std::size_t begin = b * kReduceBlock;
    const std::size_t end = std::min(n, begin + kReduceBlock);
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    partial[b] = s;
  };
  if (blocks <= 1 || exec.workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) reduce_block(b);
  } else {
    parallel_for(blocks, exec, reduce_block);
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace cpopt
