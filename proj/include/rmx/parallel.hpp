// Contiguous work partitioning and a minimal fork/join helper.

#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rmx {

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Splits [0, n) into `parts` contiguous ranges whose sizes differ by at most
/// one, larger ranges first. Surplus parts are empty ranges at the end.
std::vector<IndexRange> partition_range(std::size_t n, std::size_t parts);

/// Runs fn(worker, range) for every range, one thread per non-empty range.
/// The first exception thrown by any worker is rethrown after all join.
void run_on_ranges(const std::vector<IndexRange>& ranges,
                   const std::function<void(std::size_t, IndexRange)>& fn);

}  // namespace rmx
