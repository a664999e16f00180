#pragma once

#include <cstddef>
#include <functional>

namespace cpopt {

/// Worker count for per-path loops. No result depends on it.
struct Exec {
  unsigned workers = 1;
};

/// Calls body(i) for every i in [0, n). Iterations must not share mutable state.
void parallel_for(std::size_t n, const Exec& exec,
                  const std::function<void(std::size_t)>& body);

/// Sum of term(i) over [0, n).
///
/// Terms are accumulated in fixed blocks of `kReduceBlock` indices and the block
/// partials are added in index order, so the bits of the result are the same for
/// any worker count.
double ordered_sum(std::size_t n, const Exec& exec,
                   const std::function<double(std::size_t)>& term);

inline constexpr std::size_t kReduceBlock = 2048;

}  // namespace cpopt
