#pragma once

#include "actbench/activations.hpp"
#include "actbench/nncore.hpp"
#include "actbench/timing.hpp"
#include "actbench/workload.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace actbench::harness {

/// One (function, n, run) wall-clock measurement, or an explicit skip marker
/// when the run could not be measured.
struct TimingRecord {
  ActivationKind function = ActivationKind::Identity;
  std::string platform_label;
  std::string device = "cpu";
  int size_exponent = 0;
  std::size_t run_index = 0;
  std::optional<double> elapsed_seconds;       // absent for skip markers
  std::optional<double> per_instance_seconds;  // elapsed / 10^n
  std::string skip_reason;                     // empty for measured records

  bool measured() const noexcept { return elapsed_seconds.has_value(); }
};

struct BenchPlan {
  std::vector<ActivationKind> functions;
  std::vector<int> exponents;
  std::size_t runs = 3;
  /// Per-function wall-clock allowance across its sizes (warm-ups included).
  double time_budget_seconds = 86400.0;
  std::size_t pretrain_epochs = 0;
  std::uint64_t seed = 0;
  /// 0 submits each inference set as one batch, unless the forward buffers
  /// would exceed activation_memory_cap, in which case rows are chunked.
  std::size_t batch_rows = 0;
  std::uint64_t workload_memory_cap = kDefaultMemoryCap;
  std::uint64_t activation_memory_cap = std::uint64_t{2} << 30;
  bool warmup = true;
  std::string platform_label = "unknown";
  std::string device = "cpu";

  void validate() const;
  std::size_t expected_records() const { return functions.size() * exponents.size() * runs; }
};

struct BenchHooks {
  Clock clock = steady_seconds;
  /// Called after each record is produced, in measurement order.
  std::function<void(const TimingRecord&)> on_record;
};

/// Rows per forward call for a given workload and network under the plan.
std::size_t effective_batch_rows(const BenchPlan& plan, std::size_t instances,
                                 std::size_t max_width, std::size_t output_dim);

/// Runs the timing protocol. For every (function, n) a network with that
/// hidden activation is timed over `runs` forward passes of the 10^n-instance
/// workload (Eval mode). Only the forward pass is inside the timed section.
/// Returned records are ordered by (function table order, n, run).
std::vector<TimingRecord> run_inference_bench(const BenchPlan& plan, const NetworkConfig& config,
                                              const BenchHooks& hooks = {});

struct AggregateRow {
  ActivationKind function = ActivationKind::Identity;
  int size_exponent = 0;
  std::size_t runs = 0;
  double mean_elapsed = 0;
  double sd_elapsed = 0;
  double mean_per_instance = 0;
  double sd_per_instance = 0;
};

/// Mean and sample standard deviation (0 for a single run) per
/// (function, n). Skip markers are ignored; keys without any measured record
/// are left out.
std::vector<AggregateRow> aggregate(std::span<const TimingRecord> records);

/// mean = x0 + sum(x - x0)/k, so identical inputs give back that value exactly.
double mean_of(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

inline constexpr std::string_view kRecordsCsvHeader =
    "function,group,platform,device,n,run,elapsed_s,per_instance_s";

void write_records_csv(std::ostream& os, std::span<const TimingRecord> records);
/// Parses the harness CSV schema; absent timings ("NA") become skip markers.
std::vector<TimingRecord> read_records_csv(std::istream& is);

}  // namespace actbench::harness
