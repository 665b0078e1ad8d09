#include "actbench/analysis.hpp"

#include "actbench/csv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace actbench::analysis {
namespace {

constexpr std::array<FixtureInfo, 4> kFixtures = {{
    {"table1", "consumer-gpu (GeForce GTX 1080 Ti)", "cuda"},
    {"table2", "datacentre-gpu (Tesla P100)", "cuda"},
    {"table3", "consumer-cpu (MacBook Pro 2017, i5-7360U)", "cpu"},
    {"table4", "datacentre-cpu (Xeon E5-2660)", "cpu"},
}};

constexpr std::string_view kAbsentCell = "n/a";
constexpr std::size_t kValueWidth = 12;

std::string format_sci(double v) { return fmt::format("{:.3e}", v); }

std::size_t name_width(const std::vector<ActivationKind>& fns) {
  std::size_t w = std::string_view("Function").size();
  for (auto f : fns) w = std::max(w, name_of(f).size());
  return w + 2;
}

}  // namespace

void MeanTable::set(ActivationKind f, int n, std::optional<double> seconds) {
  cells_[{f, n}] = seconds;
}

std::optional<double> MeanTable::get(ActivationKind f, int n) const {
  auto it = cells_.find({f, n});
  return it == cells_.end() ? std::nullopt : it->second;
}

bool MeanTable::has_cell(ActivationKind f, int n) const { return cells_.count({f, n}) > 0; }

std::vector<ActivationKind> MeanTable::functions() const {
  std::vector<ActivationKind> out;
  for (const auto& [key, _] : cells_) {
    if (out.empty() || out.back() != key.first) out.push_back(key.first);
  }
  return out;
}

std::vector<int> MeanTable::exponents() const {
  std::set<int> ns;
  for (const auto& [key, _] : cells_) ns.insert(key.second);
  return {ns.begin(), ns.end()};
}

MeanTable MeanTable::scaled(double factor) const {
  MeanTable out = *this;
  for (auto& [_, v] : out.cells_) {
    if (v) *v *= factor;
  }
  return out;
}

MeanTable MeanTable::from_aggregates(std::span<const harness::AggregateRow> rows) {
  MeanTable t;
  for (const auto& r : rows) t.set(r.function, r.size_exponent, r.mean_elapsed);
  return t;
}

MeanTable MeanTable::from_records(std::span<const harness::TimingRecord> records) {
  MeanTable t;
  for (const auto& r : records) {
    if (!t.has_cell(r.function, r.size_exponent)) t.set(r.function, r.size_exponent, std::nullopt);
  }
  const auto rows = harness::aggregate(records);
  for (const auto& r : rows) t.set(r.function, r.size_exponent, r.mean_elapsed);
  return t;
}

std::span<const FixtureInfo> fixtures() noexcept { return kFixtures; }

const FixtureInfo& fixture_info(std::string_view name) {
  for (const auto& f : kFixtures) {
    if (f.name == name) return f;
  }
  throw std::invalid_argument(fmt::format("unknown fixture '{}'; expected table1..table4", name));
}

std::filesystem::path default_fixture_dir() {
  if (const char* env = std::getenv("ACTBENCH_FIXTURES"); env && *env) return env;
  return ACTBENCH_FIXTURE_DIR;
}

MeanTable read_means_csv(std::istream& is) {
  const csv::Table t = csv::read(is);
  const std::size_t c_fn = t.column("function");
  const std::size_t c_n = t.column("n");
  const std::size_t c_mean = t.column("mean_s");
  MeanTable out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = t.line_numbers[i];
    const auto kind = find_activation(row[c_fn]);
    if (!kind) {
      throw csv::SchemaError(
          fmt::format("line {}: column 'function': unknown function '{}'", line, row[c_fn]));
    }
    const long long n = csv::parse_integer(row[c_n], "n", line);
    if (n < 0 || n > kMaxSizeExponent) {
      throw csv::SchemaError(fmt::format("line {}: column 'n': {} outside 0..8", line, n));
    }
    std::optional<double> v;
    if (!csv::is_absent(row[c_mean])) v = csv::parse_double(row[c_mean], "mean_s", line);
    out.set(*kind, static_cast<int>(n), v);
  }
  return out;
}

void write_means_csv(std::ostream& os, const MeanTable& table) {
  os << kFixtureCsvHeader << '\n';
  for (auto f : table.functions()) {
    for (int n : table.exponents()) {
      if (!table.has_cell(f, n)) continue;
      const auto v = table.get(f, n);
      os << name_of(f) << ',' << n << ',' << (v ? csv::format_double(*v) : std::string(csv::kAbsent))
         << '\n';
    }
  }
}

MeanTable load_fixture(std::string_view name, const std::filesystem::path& dir) {
  fixture_info(name);
  const auto path = dir / (std::string(name) + ".csv");
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open fixture " + path.string());
  return read_means_csv(is);
}

SpreadSummary group_spread(const MeanTable& means, FunctionGroup group, int n) {
  SpreadSummary s;
  s.size_exponent = n;
  s.group = group;
  std::size_t members = 0;
  for (auto f : means.functions()) {
    if (group_of(f) != group) continue;
    const auto v = means.get(f, n);
    if (!v) continue;
    if (members == 0 || *v > s.max_mean_s) {
      s.max_mean_s = *v;
      s.argmax = f;
    }
    if (members == 0 || *v < s.min_mean_s) {
      s.min_mean_s = *v;
      s.argmin = f;
    }
    ++members;
  }
  if (members < 2) {
    throw UndefinedSpread(fmt::format("group '{}' has {} timed member(s) at n={}; need at least 2",
                                      group_name(group), members, n));
  }
  if (!(s.min_mean_s > 0)) {
    throw UndefinedSpread(fmt::format("group '{}' has a non-positive minimum at n={}", group_name(group), n));
  }
  s.ratio = s.max_mean_s / s.min_mean_s;
  return s;
}

IdentityRelativeSummary relative_to_identity(const MeanTable& means, int n) {
  const auto base = means.get(ActivationKind::Identity, n);
  if (!base || !(*base > 0)) {
    throw MissingBaseline(fmt::format("no positive Identity baseline at n={}", n));
  }
  IdentityRelativeSummary out;
  out.size_exponent = n;
  std::vector<double> ratios;
  for (auto f : means.functions()) {
    if (group_of(f) != FunctionGroup::Activation) continue;
    const auto v = means.get(f, n);
    if (!v) continue;
    const double r = *v / *base;
    out.ratios.emplace_back(f, r);
    ratios.push_back(r);
  }
  if (ratios.empty()) {
    throw UndefinedSpread(fmt::format("no activation-group timings at n={}", n));
  }
  out.mean_ratio = harness::mean_of(ratios);
  out.sd_ratio = harness::sample_sd(ratios);
  return out;
}

std::map<ActivationKind, std::vector<CurvePoint>> per_instance_curve(const MeanTable& means) {
  std::map<ActivationKind, std::vector<CurvePoint>> out;
  for (auto f : means.functions()) {
    auto& series = out[f];
    for (int n : means.exponents()) {
      if (!means.has_cell(f, n)) continue;
      CurvePoint p{n, std::nullopt};
      if (const auto v = means.get(f, n)) p.per_instance_seconds = *v / std::pow(10.0, n);
      series.push_back(p);
    }
  }
  return out;
}

std::string emit_table(const MeanTable& means, MinimumMarking marking) {
  const auto fns = means.functions();
  const auto ns = means.exponents();
  const std::size_t first = name_width(fns);

  // Marked minimum per (group, n).
  std::map<std::pair<FunctionGroup, int>, ActivationKind> minimum;
  if (marking == MinimumMarking::PerGroup) {
    for (int n : ns) {
      std::map<FunctionGroup, double> best;
      for (auto f : fns) {  // table order, so strict '<' keeps the first of a tie
        const auto v = means.get(f, n);
        if (!v) continue;
        const auto g = group_of(f);
        auto it = best.find(g);
        if (it == best.end() || *v < it->second) {
          best[g] = *v;
          minimum[{g, n}] = f;
        }
      }
    }
  }

  std::ostringstream os;
  os << fmt::format("{:<{}}", "Function", first);
  for (int n : ns) os << fmt::format("{:<{}}", fmt::format("n={}", n), kValueWidth);
  os << '\n';
  const std::string rule(first + kValueWidth * ns.size(), '-');
  os << rule << '\n';

  std::optional<FunctionGroup> current;
  for (auto f : fns) {
    const auto g = group_of(f);
    if (current && *current != g) os << rule << '\n';
    current = g;
    os << fmt::format("{:<{}}", name_of(f), first);
    for (int n : ns) {
      std::string cell;
      const auto v = means.get(f, n);
      if (!means.has_cell(f, n) || !v) {
        cell = std::string(kAbsentCell);
      } else {
        cell = format_sci(*v);
        auto it = minimum.find({g, n});
        if (it != minimum.end() && it->second == f) cell += '*';
      }
      os << fmt::format("{:<{}}", cell, kValueWidth);
    }
    os << '\n';
  }
  os << rule << '\n';
  // Strip the trailing padding on each line.
  std::string text = os.str();
  std::string out;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    out += line;
    out += '\n';
  }
  return out;
}

MeanTable parse_table(std::string_view text) {
  MeanTable out;
  std::vector<int> ns;
  bool header_seen = false;
  std::istringstream in{std::string(text)};
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    std::istringstream tokens(line);
    std::vector<std::string> tok;
    for (std::string t; tokens >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0].find_first_not_of('-') == std::string::npos) continue;
    if (!header_seen) {
      if (tok[0] != "Function") {
        throw csv::SchemaError(fmt::format("line {}: expected a 'Function n=...' header", lineno));
      }
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (tok[i].rfind("n=", 0) != 0) {
          throw csv::SchemaError(fmt::format("line {}: bad column label '{}'", lineno, tok[i]));
        }
        ns.push_back(static_cast<int>(csv::parse_integer(std::string_view(tok[i]).substr(2), "n", lineno)));
      }
      header_seen = true;
      continue;
    }
    const auto kind = find_activation(tok[0]);
    if (!kind) throw csv::SchemaError(fmt::format("line {}: unknown function '{}'", lineno, tok[0]));
    if (tok.size() != ns.size() + 1) {
      throw csv::SchemaError(fmt::format("line {}: {} cells for {} columns", lineno, tok.size() - 1, ns.size()));
    }
    for (std::size_t i = 0; i < ns.size(); ++i) {
      std::string cell = tok[i + 1];
      if (cell == kAbsentCell) {
        out.set(*kind, ns[i], std::nullopt);
        continue;
      }
      if (!cell.empty() && cell.back() == '*') cell.pop_back();
      out.set(*kind, ns[i], csv::parse_double(cell, fmt::format("n={}", ns[i]), lineno));
    }
  }
  if (!header_seen) throw csv::SchemaError("no data: table text is empty");
  return out;
}

void write_curve_csv(std::ostream& os, const std::map<ActivationKind, std::vector<CurvePoint>>& curve) {
  os << "function,n,per_instance_s\n";
  for (const auto& [f, series] : curve) {
    for (const auto& p : series) {
      os << name_of(f) << ',' << p.size_exponent << ','
         << (p.per_instance_seconds ? csv::format_double(*p.per_instance_seconds)
                                    : std::string(csv::kAbsent))
         << '\n';
    }
  }
}

void write_spread_csv(std::ostream& os, std::span<const SpreadSummary> spreads) {
  os << "n,group,ratio,argmax,argmin\n";
  for (const auto& s : spreads) {
    os << s.size_exponent << ',' << group_name(s.group) << ',' << csv::format_double(s.ratio) << ','
       << name_of(s.argmax) << ',' << name_of(s.argmin) << '\n';
  }
}

void write_relative_csv(std::ostream& os, std::span<const IdentityRelativeSummary> rows) {
  os << "n,mean_ratio,sd_ratio\n";
  for (const auto& r : rows) {
    os << r.size_exponent << ',' << csv::format_double(r.mean_ratio) << ','
       << csv::format_double(r.sd_ratio) << '\n';
  }
}

MeanTable read_any_csv(std::istream& is) {
  std::stringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();
  std::istringstream probe(text);
  const csv::Table t = csv::read(probe);
  if (t.rows.empty()) throw csv::SchemaError("no data: input has a header but no rows");
  std::istringstream again(text);
  if (t.find_column("mean_s")) return read_means_csv(again);
  if (t.find_column("elapsed_s")) {
    const auto records = harness::read_records_csv(again);
    return MeanTable::from_records(records);
  }
  throw csv::SchemaError(fmt::format(
      "unrecognised header '{}': expected '{}' or '{}'", csv::join(t.header), kFixtureCsvHeader,
      harness::kRecordsCsvHeader));
}

}  // namespace actbench::analysis
