#pragma once

#include "actbench/activations.hpp"
#include "actbench/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace actbench::analysis {

/// Mean seconds per (function, n). A cell may exist but be absent (a run that
/// never completed); absent is distinct from zero.
class MeanTable {
 public:
  void set(ActivationKind f, int n, std::optional<double> seconds);
  std::optional<double> get(ActivationKind f, int n) const;
  bool has_cell(ActivationKind f, int n) const;
  bool empty() const noexcept { return cells_.empty(); }
  std::size_t cell_count() const noexcept { return cells_.size(); }

  /// Functions present, in table row order.
  std::vector<ActivationKind> functions() const;
  /// Exponents present, ascending.
  std::vector<int> exponents() const;

  /// Uniformly rescaled copy (absent cells stay absent).
  MeanTable scaled(double factor) const;

  static MeanTable from_aggregates(std::span<const harness::AggregateRow> rows);
  /// Aggregates measured records; keys with only skip markers become absent.
  static MeanTable from_records(std::span<const harness::TimingRecord> records);

  bool operator==(const MeanTable&) const = default;

 private:
  std::map<std::pair<ActivationKind, int>, std::optional<double>> cells_;
};

class UndefinedSpread : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingBaseline : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Appendix fixtures: "table1".."table4".
struct FixtureInfo {
  std::string_view name;
  std::string_view platform;
  std::string_view device;
};
std::span<const FixtureInfo> fixtures() noexcept;
const FixtureInfo& fixture_info(std::string_view name);

/// Shipped fixture directory (overridable with ACTBENCH_FIXTURES).
std::filesystem::path default_fixture_dir();

inline constexpr std::string_view kFixtureCsvHeader = "function,n,mean_s";

MeanTable read_means_csv(std::istream& is);
void write_means_csv(std::ostream& os, const MeanTable& table);
MeanTable load_fixture(std::string_view name,
                       const std::filesystem::path& dir = default_fixture_dir());

struct SpreadSummary {
  int size_exponent = 0;
  FunctionGroup group = FunctionGroup::Activation;
  double max_mean_s = 0;
  double min_mean_s = 0;
  double ratio = 1;
  ActivationKind argmax = ActivationKind::Identity;
  ActivationKind argmin = ActivationKind::Identity;
};

/// Slowest over fastest mean among the group's present members at n. Ties pick
/// the first function in table order. Throws UndefinedSpread for fewer than two
/// members.
SpreadSummary group_spread(const MeanTable& means, FunctionGroup group, int n);

struct IdentityRelativeSummary {
  int size_exponent = 0;
  double mean_ratio = 0;
  double sd_ratio = 0;  // sample standard deviation
  std::vector<std::pair<ActivationKind, double>> ratios;
};

/// Each activation-group mean divided by Identity's mean at n (dropouts
/// excluded). Throws MissingBaseline when Identity is absent or not > 0.
IdentityRelativeSummary relative_to_identity(const MeanTable& means, int n);

struct CurvePoint {
  int size_exponent = 0;
  std::optional<double> per_instance_seconds;  // nullopt: did not complete
};

/// Per-function (n, mean / 10^n) series, sorted by n.
std::map<ActivationKind, std::vector<CurvePoint>> per_instance_curve(const MeanTable& means);

enum class MinimumMarking { None, PerGroup };

/// Monospace grid in the appendix layout: functions in table order split into
/// activations / dropouts / identity, one column per n, values as %.3e. With
/// PerGroup marking the minimum of each column within each group carries a
/// trailing '*'. Absent cells print as "n/a".
std::string emit_table(const MeanTable& means, MinimumMarking marking = MinimumMarking::PerGroup);

/// Inverse of emit_table for numeric content and absences.
MeanTable parse_table(std::string_view text);

void write_curve_csv(std::ostream& os, const std::map<ActivationKind, std::vector<CurvePoint>>& curve);
void write_spread_csv(std::ostream& os, std::span<const SpreadSummary> spreads);
void write_relative_csv(std::ostream& os, std::span<const IdentityRelativeSummary> rows);

/// Detects the harness schema or the fixture schema from the header.
MeanTable read_any_csv(std::istream& is);

}  // namespace actbench::analysis
