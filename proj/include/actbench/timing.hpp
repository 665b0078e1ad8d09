#pragma once

#include <cstddef>
#include <functional>
#include <mutex>

namespace actbench {

/// Monotonic time source in seconds. Injectable so that tests can replay
/// recorded timings or count clock reads.
using Clock = std::function<double()>;

/// std::chrono::steady_clock in seconds.
double steady_seconds();

/// Holds the process-wide measurement lock for its lifetime. Every timed
/// section (inference runs, training epochs) is taken under one of these, so
/// at most one measurement is in flight at a time.
class MeasurementGuard {
 public:
  MeasurementGuard();
  ~MeasurementGuard();
  MeasurementGuard(const MeasurementGuard&) = delete;
  MeasurementGuard& operator=(const MeasurementGuard&) = delete;

  /// Largest number of guards ever held at once; stays 1 if the lock works.
  static std::size_t peak_concurrency() noexcept;

 private:
  std::unique_lock<std::mutex> lock_;
};

}  // namespace actbench
