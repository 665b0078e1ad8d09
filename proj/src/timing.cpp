#include "actbench/timing.hpp"

#include <atomic>
#include <chrono>

namespace actbench {
namespace {

std::mutex& measurement_mutex() {
  static std::mutex m;
  return m;
}

std::atomic<std::size_t> g_active{0};
std::atomic<std::size_t> g_peak{0};

}  // namespace

double steady_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

MeasurementGuard::MeasurementGuard() : lock_(measurement_mutex()) {
  const std::size_t now = ++g_active;
  std::size_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

MeasurementGuard::~MeasurementGuard() { --g_active; }

std::size_t MeasurementGuard::peak_concurrency() noexcept { return g_peak.load(); }

}  // namespace actbench
