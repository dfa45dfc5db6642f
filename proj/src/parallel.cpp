#include "rmx/parallel.hpp"

#include "rmx/core.hpp"

namespace rmx {

std::vector<IndexRange> partition_range(std::size_t n, std::size_t parts) {
  if (parts == 0) throw InvalidArgument("partition_range: need at least one part");
  std::vector<IndexRange> out;
  out.reserve(parts);
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  std::size_t at = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

void run_on_ranges(const std::vector<IndexRange>& ranges,
                   const std::function<void(std::size_t, IndexRange)>& fn) {
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto guarded = [&](std::size_t worker, IndexRange r) {
    try {
      fn(worker, r);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  std::vector<std::size_t> active;
  for (std::size_t w = 0; w < ranges.size(); ++w)
    if (!ranges[w].empty()) active.push_back(w);

  if (active.size() <= 1) {
    for (std::size_t w : active) guarded(w, ranges[w]);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(active.size());
    for (std::size_t w : active) threads.emplace_back(guarded, w, ranges[w]);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rmx
