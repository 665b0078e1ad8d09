#include "actbench/harness.hpp"

#include "actbench/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <new>
#include <ostream>
#include <tuple>

namespace actbench::harness {
namespace {

std::size_t kind_index(ActivationKind k) { return static_cast<std::size_t>(k); }

struct FunctionState {
  DenseNetwork<float> net;
  double spent_seconds = 0;
  bool exhausted = false;
};

// One full forward sweep over the inference set. Only the forward calls are
// between the two clock reads; streamed chunks are generated outside them.
class PassRunner {
 public:
  PassRunner(const Clock& clock, const Workload& workload, const Matrix<float>* data,
             std::size_t batch_rows)
      : clock_(clock), workload_(workload), data_(data), batch_rows_(batch_rows) {}

  double run(const DenseNetwork<float>& net, ForwardWorkspace<float>& ws, Rng& rng) {
    const std::size_t total = workload_.instances();
    if (data_) {
      MeasurementGuard guard;
      const double t0 = clock_();
      for (std::size_t off = 0; off < total; off += batch_rows_) {
        const auto len = static_cast<Eigen::Index>(std::min(batch_rows_, total - off));
        forward_into<float>(net, data_->middleRows(static_cast<Eigen::Index>(off), len),
                            EvalMode::Eval, rng, ws);
      }
      const double t1 = clock_();
      return t1 - t0;
    }
    WorkloadStream stream(workload_);
    double elapsed = 0;
    while (stream.next(chunk_, batch_rows_) > 0) {
      MeasurementGuard guard;
      const double t0 = clock_();
      forward_into<float>(net, chunk_, EvalMode::Eval, rng, ws);
      const double t1 = clock_();
      elapsed += t1 - t0;
    }
    return elapsed;
  }

 private:
  const Clock& clock_;
  Workload workload_;
  const Matrix<float>* data_;
  std::size_t batch_rows_;
  Matrix<float> chunk_;
};

}  // namespace

void BenchPlan::validate() const {
  if (functions.empty()) throw std::invalid_argument("bench plan has no functions");
  if (exponents.empty()) throw std::invalid_argument("bench plan has no workload sizes");
  for (int n : exponents) {
    if (n < 0 || n > kMaxSizeExponent) {
      throw std::invalid_argument(fmt::format("size exponent {} outside 0..{}", n, kMaxSizeExponent));
    }
  }
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (!(time_budget_seconds > 0)) throw std::invalid_argument("time budget must be > 0");
}

std::size_t effective_batch_rows(const BenchPlan& plan, std::size_t instances,
                                 std::size_t max_width, std::size_t output_dim) {
  if (plan.batch_rows > 0) return std::min(plan.batch_rows, instances);
  const std::uint64_t per_row = (2 * max_width + output_dim) * sizeof(float);
  if (per_row * instances <= plan.activation_memory_cap) return instances;
  return std::max<std::size_t>(1, plan.activation_memory_cap / per_row);
}

std::vector<TimingRecord> run_inference_bench(const BenchPlan& plan, const NetworkConfig& config,
                                              const BenchHooks& hooks) {
  plan.validate();
  const Clock clock = hooks.clock ? hooks.clock : Clock(steady_seconds);

  std::vector<ActivationKind> functions = plan.functions;
  std::sort(functions.begin(), functions.end());
  functions.erase(std::unique(functions.begin(), functions.end()), functions.end());
  std::vector<int> exponents = plan.exponents;
  std::sort(exponents.begin(), exponents.end());
  exponents.erase(std::unique(exponents.begin(), exponents.end()), exponents.end());

  // Model construction and pretraining happen before any timing.
  std::vector<FunctionState> states;
  states.reserve(functions.size());
  for (ActivationKind f : functions) {
    NetworkConfig c = config;
    c.hidden_activation = Activation(f, config.hidden_activation.params);
    DenseNetwork<float> net = init_network<float>(c);
    if (plan.pretrain_epochs > 0) {
      Rng rng(mix_seed(plan.seed, kind_index(f)));
      net = pretrain_random(std::move(net), plan.pretrain_epochs, rng);
    }
    states.push_back({std::move(net)});
  }

  std::vector<TimingRecord> records;
  auto emit = [&](TimingRecord r) {
    if (hooks.on_record) hooks.on_record(r);
    records.push_back(std::move(r));
  };
  auto make_record = [&](ActivationKind f, int n, std::size_t run) {
    TimingRecord r;
    r.function = f;
    r.platform_label = plan.platform_label;
    r.device = plan.device;
    r.size_exponent = n;
    r.run_index = run;
    return r;
  };
  auto skip_from = [&](ActivationKind f, int n, std::size_t first_run, const std::string& why) {
    for (std::size_t run = first_run; run < plan.runs; ++run) {
      TimingRecord r = make_record(f, n, run);
      r.skip_reason = why;
      emit(std::move(r));
    }
  };

  for (int n : exponents) {
    const Workload workload{n, config.input_dim, mix_seed(plan.seed, 1000 + static_cast<unsigned>(n))};
    const bool streaming = workload.bytes() > plan.workload_memory_cap;
    Matrix<float> data;
    std::string alloc_failure;
    if (!streaming) {
      try {
        data = generate(workload, plan.workload_memory_cap);
      } catch (const std::bad_alloc&) {
        alloc_failure = fmt::format("allocation of the 10^{} workload failed", n);
      }
    }
    const std::size_t rows =
        effective_batch_rows(plan, workload.instances(), states.empty() ? 1 : states[0].net.max_width(),
                             config.output_dim);
    PassRunner runner(clock, workload, streaming ? nullptr : &data, rows);
    const double divisor = static_cast<double>(workload.instances());

    for (std::size_t fi = 0; fi < functions.size(); ++fi) {
      const ActivationKind f = functions[fi];
      FunctionState& st = states[fi];
      if (st.exhausted) {
        skip_from(f, n, 0, "time budget exhausted at a smaller size");
        continue;
      }
      if (!alloc_failure.empty()) {
        skip_from(f, n, 0, alloc_failure);
        continue;
      }
      ForwardWorkspace<float> ws;
      Rng rng(mix_seed(plan.seed ^ 0x5eed, kind_index(f)));
      std::size_t run = 0;
      try {
        if (plan.warmup) st.spent_seconds += runner.run(st.net, ws, rng);
        for (; run < plan.runs; ++run) {
          if (st.spent_seconds >= plan.time_budget_seconds) {
            st.exhausted = true;
            skip_from(f, n, run, "time budget exhausted");
            break;
          }
          const double elapsed = runner.run(st.net, ws, rng);
          st.spent_seconds += elapsed;
          TimingRecord r = make_record(f, n, run);
          r.elapsed_seconds = elapsed;
          r.per_instance_seconds = elapsed / divisor;
          emit(std::move(r));
        }
      } catch (const std::bad_alloc&) {
        skip_from(f, n, run, fmt::format("allocation failed during the 10^{} forward pass", n));
      }
      if (st.spent_seconds >= plan.time_budget_seconds) st.exhausted = true;
    }
  }

  std::stable_sort(records.begin(), records.end(), [](const TimingRecord& a, const TimingRecord& b) {
    return std::tuple(a.function, a.size_exponent, a.run_index) <
           std::tuple(b.function, b.size_exponent, b.run_index);
  });
  return records;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0;
  const double x0 = xs.front();
  double acc = 0;
  for (double x : xs) acc += x - x0;
  return x0 + acc / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0;
  const double m = mean_of(xs);
  double acc = 0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

std::vector<AggregateRow> aggregate(std::span<const TimingRecord> records) {
  std::map<std::pair<ActivationKind, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (!r.measured()) continue;
    auto& [elapsed, per] = groups[{r.function, r.size_exponent}];
    elapsed.push_back(*r.elapsed_seconds);
    per.push_back(r.per_instance_seconds ? *r.per_instance_seconds
                                         : *r.elapsed_seconds / std::pow(10.0, r.size_exponent));
  }
  std::vector<AggregateRow> out;
  out.reserve(groups.size());
  for (const auto& [key, series] : groups) {
    AggregateRow row;
    row.function = key.first;
    row.size_exponent = key.second;
    row.runs = series.first.size();
    row.mean_elapsed = mean_of(series.first);
    row.sd_elapsed = sample_sd(series.first);
    row.mean_per_instance = mean_of(series.second);
    row.sd_per_instance = sample_sd(series.second);
    out.push_back(row);
  }
  return out;
}

void write_records_csv(std::ostream& os, std::span<const TimingRecord> records) {
  os << kRecordsCsvHeader << '\n';
  for (const auto& r : records) {
    os << csv::join({std::string(name_of(r.function)), std::string(group_name(group_of(r.function))),
                     r.platform_label, r.device, std::to_string(r.size_exponent),
                     std::to_string(r.run_index),
                     r.elapsed_seconds ? csv::format_double(*r.elapsed_seconds) : std::string(csv::kAbsent),
                     r.per_instance_seconds ? csv::format_double(*r.per_instance_seconds)
                                            : std::string(csv::kAbsent)})
       << '\n';
  }
}

std::vector<TimingRecord> read_records_csv(std::istream& is) {
  const csv::Table t = csv::read(is);
  const std::size_t c_fn = t.column("function");
  const std::size_t c_platform = t.column("platform");
  const std::size_t c_device = t.column("device");
  const std::size_t c_n = t.column("n");
  const std::size_t c_run = t.column("run");
  const std::size_t c_elapsed = t.column("elapsed_s");
  const auto c_per = t.find_column("per_instance_s");

  std::vector<TimingRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t line = t.line_numbers[i];
    TimingRecord r;
    const auto kind = find_activation(row[c_fn]);
    if (!kind) {
      throw csv::SchemaError(fmt::format("line {}: column 'function': unknown function '{}'", line, row[c_fn]));
    }
    r.function = *kind;
    r.platform_label = row[c_platform];
    r.device = row[c_device];
    const long long n = csv::parse_integer(row[c_n], "n", line);
    if (n < 0 || n > kMaxSizeExponent) {
      throw csv::SchemaError(fmt::format("line {}: column 'n': {} outside 0..{}", line, n, kMaxSizeExponent));
    }
    r.size_exponent = static_cast<int>(n);
    const long long run = csv::parse_integer(row[c_run], "run", line);
    if (run < 0) throw csv::SchemaError(fmt::format("line {}: column 'run': negative", line));
    r.run_index = static_cast<std::size_t>(run);
    if (csv::is_absent(row[c_elapsed])) {
      r.skip_reason = "absent in input";
    } else {
      r.elapsed_seconds = csv::parse_double(row[c_elapsed], "elapsed_s", line);
      if (c_per && !csv::is_absent(row[*c_per])) {
        r.per_instance_seconds = csv::parse_double(row[*c_per], "per_instance_s", line);
      } else {
        r.per_instance_seconds = *r.elapsed_seconds / std::pow(10.0, r.size_exponent);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace actbench::harness
