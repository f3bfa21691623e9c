#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace optodtc {

template <class R>
struct SweepOutcome {
  std::optional<R> value;
  std::string error;

  bool ok() const { return value.has_value(); }
};

/// Run job(point) for every point on a bounded pool of worker threads.
/// Results are stored at the index of their point, so the output does not
/// depend on the worker count; an exception in one point only marks that
/// point as failed.
template <class Point, class Job>
auto sweep(const std::vector<Point>& points, Job&& job, int workers)
    -> std::vector<SweepOutcome<std::invoke_result_t<Job&, const Point&>>> {
  using R = std::invoke_result_t<Job&, const Point&>;
  std::vector<SweepOutcome<R>> out(points.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        out[i].value.emplace(job(points[i]));
      } catch (const std::exception& e) {
        out[i].error = e.what();
      } catch (...) {
        out[i].error = "unknown error";
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), points.size());
  if (n_threads <= 1) {
    worker();
    return out;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace optodtc
