#include "actbench/analysis.hpp"
#include "actbench/csv.hpp"
#include "actbench/harness.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

using namespace actbench;
using namespace actbench::harness;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.input_dim = 4;
  c.hidden_layers = 2;
  c.hidden_width = 6;
  c.output_dim = 2;
  return c;
}

BenchPlan tiny_plan(std::vector<ActivationKind> fns, std::vector<int> ns, std::size_t runs) {
  BenchPlan p;
  p.functions = std::move(fns);
  p.exponents = std::move(ns);
  p.runs = runs;
  p.platform_label = "test-host";
  return p;
}

// Returns the scripted values in order, then fails the test if read again.
struct ScriptedClock {
  std::shared_ptr<std::vector<double>> values = std::make_shared<std::vector<double>>();
  std::shared_ptr<std::size_t> next = std::make_shared<std::size_t>(0);

  Clock clock() const {
    auto v = values;
    auto i = next;
    return [v, i]() {
      if (*i >= v->size()) {
        ADD_FAILURE() << "clock read more often than scripted";
        return 0.0;
      }
      return (*v)[(*i)++];
    };
  }
};

}  // namespace

TEST(Plan, ValidationErrors) {
  EXPECT_THROW(tiny_plan({}, {0}, 1).validate(), std::invalid_argument);
  EXPECT_THROW(tiny_plan({ActivationKind::ReLU}, {}, 1).validate(), std::invalid_argument);
  EXPECT_THROW(tiny_plan({ActivationKind::ReLU}, {9}, 1).validate(), std::invalid_argument);
  EXPECT_THROW(tiny_plan({ActivationKind::ReLU}, {0}, 0).validate(), std::invalid_argument);
  auto p = tiny_plan({ActivationKind::ReLU}, {0}, 1);
  p.time_budget_seconds = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Bench, TwoFunctionsTwoSizesThreeRunsGiveTwelveRecords) {
  const auto plan = tiny_plan({ActivationKind::ReLU, ActivationKind::Tanh}, {0, 1}, 3);
  const auto records = run_inference_bench(plan, tiny_config());
  ASSERT_EQ(records.size(), 12u);
  EXPECT_EQ(plan.expected_records(), 12u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    EXPECT_TRUE(r.measured());
    EXPECT_GE(*r.elapsed_seconds, 0.0);
    EXPECT_EQ(*r.per_instance_seconds, *r.elapsed_seconds / std::pow(10.0, r.size_exponent));
    EXPECT_LT(r.run_index, 3u);
    EXPECT_EQ(r.platform_label, "test-host");
    EXPECT_EQ(r.device, "cpu");
  }
  // Ordered by (function, n, run).
  EXPECT_EQ(records.front().function, ActivationKind::ReLU);
  EXPECT_EQ(records.back().function, ActivationKind::Tanh);
  EXPECT_EQ(records[3].size_exponent, 1);
  EXPECT_EQ(records[4].run_index, 1u);
}

TEST(Bench, ClockIsReadTwicePerTimedPass) {
  std::size_t reads = 0;
  double t = 0;
  BenchHooks hooks;
  hooks.clock = [&] {
    ++reads;
    return t += 1e-3;
  };
  const auto plan = tiny_plan({ActivationKind::ReLU, ActivationKind::Sigmoid, ActivationKind::Dropout}, {0, 1, 2}, 3);
  run_inference_bench(plan, tiny_config(), hooks);
  EXPECT_EQ(reads, 2u * 3 * 3 * (3 + 1));
  auto no_warm = plan;
  no_warm.warmup = false;
  reads = 0;
  run_inference_bench(no_warm, tiny_config(), hooks);
  EXPECT_EQ(reads, 2u * 3 * 3 * 3);
}

TEST(Bench, StreamedWorkloadReadsClockAroundEachChunk) {
  std::size_t reads = 0;
  BenchHooks hooks;
  hooks.clock = [&] { return static_cast<double>(++reads); };
  auto plan = tiny_plan({ActivationKind::ReLU}, {3}, 2);
  plan.warmup = false;
  plan.workload_memory_cap = 100;  // forces streaming
  plan.batch_rows = 300;           // 1000 rows -> 4 chunks
  const auto records = run_inference_bench(plan, tiny_config(), hooks);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(reads, 2u * 4 * 2);
  // Each chunk contributes exactly one clock tick.
  EXPECT_EQ(*records[0].elapsed_seconds, 4.0);
}

TEST(Bench, BatchRowsFollowActivationMemoryCap) {
  BenchPlan p = tiny_plan({ActivationKind::ReLU}, {0}, 1);
  EXPECT_EQ(effective_batch_rows(p, 1000, 1024, 16), 1000u);
  p.activation_memory_cap = (2 * 1024 + 16) * 4 * 100;
  EXPECT_EQ(effective_batch_rows(p, 1000, 1024, 16), 100u);
  p.activation_memory_cap = 1;
  EXPECT_EQ(effective_batch_rows(p, 1000, 1024, 16), 1u);
  p.batch_rows = 64;
  EXPECT_EQ(effective_batch_rows(p, 1000, 1024, 16), 64u);
  EXPECT_EQ(effective_batch_rows(p, 10, 1024, 16), 10u);
}

TEST(Bench, BudgetExhaustionLeavesExplicitSkipMarkers) {
  // Every pass takes 10 s; the 25 s allowance covers warm-up and two runs.
  bool odd = false;
  BenchHooks hooks;
  hooks.clock = [&] {
    odd = !odd;
    return odd ? 0.0 : 10.0;
  };
  std::vector<TimingRecord> seen;
  hooks.on_record = [&](const TimingRecord& r) { seen.push_back(r); };
  auto plan = tiny_plan({ActivationKind::ReLU, ActivationKind::Tanh}, {0, 1, 2}, 3);
  plan.time_budget_seconds = 25;
  const auto records = run_inference_bench(plan, tiny_config(), hooks);
  ASSERT_EQ(records.size(), plan.expected_records());
  EXPECT_EQ(seen.size(), records.size());
  std::size_t measured = 0;
  for (const auto& r : records) {
    if (r.measured()) {
      ++measured;
      EXPECT_EQ(r.size_exponent, 0);
      EXPECT_LT(r.run_index, 2u);
      EXPECT_TRUE(r.skip_reason.empty());
    } else {
      EXPECT_FALSE(r.skip_reason.empty());
      EXPECT_FALSE(r.per_instance_seconds.has_value());
    }
  }
  EXPECT_EQ(measured, 4u);
}

TEST(Bench, FakeClockReplayReproducesFixtureMeansExactly) {
  const auto fixture = analysis::load_fixture("table1");
  const std::vector<int> ns = {0, 1, 2};
  std::vector<ActivationKind> fns(all_activation_kinds().begin(), all_activation_kinds().end());
  ScriptedClock script;
  for (int n : ns)
    for (auto f : fns)
      for (int run = 0; run < 3; ++run) {
        script.values->push_back(0.0);
        script.values->push_back(*fixture.get(f, n));
      }
  auto plan = tiny_plan(fns, ns, 3);
  plan.warmup = false;
  BenchHooks hooks;
  hooks.clock = script.clock();
  const auto records = run_inference_bench(plan, tiny_config(), hooks);
  EXPECT_EQ(*script.next, script.values->size());
  const auto rows = aggregate(records);
  ASSERT_EQ(rows.size(), fns.size() * ns.size());
  for (const auto& r : rows) {
    const double v = *fixture.get(r.function, r.size_exponent);
    EXPECT_EQ(r.mean_elapsed, v) << name_of(r.function) << " n=" << r.size_exponent;
    EXPECT_EQ(r.sd_elapsed, 0.0);
    EXPECT_EQ(r.mean_per_instance, v / std::pow(10.0, r.size_exponent));
  }
}

TEST(Bench, RecordReplayOfWholeFixtureAggregatesExactly) {
  for (const auto& info : analysis::fixtures()) {
    const auto fixture = analysis::load_fixture(info.name);
    std::vector<TimingRecord> records;
    for (auto f : fixture.functions())
      for (int n : fixture.exponents())
        for (std::size_t run = 0; run < 3; ++run) {
          TimingRecord r;
          r.function = f;
          r.size_exponent = n;
          r.run_index = run;
          if (const auto v = fixture.get(f, n)) {
            r.elapsed_seconds = *v;
            r.per_instance_seconds = *v / std::pow(10.0, n);
          } else {
            r.skip_reason = "did not complete";
          }
          records.push_back(r);
        }
    EXPECT_EQ(analysis::MeanTable::from_records(records), fixture) << info.name;
  }
}

TEST(Bench, MeasuredSectionsNeverOverlapAcrossThreads) {
  auto worker = [] {
    BenchHooks hooks;
    hooks.clock = [] {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
      return steady_seconds();
    };
    run_inference_bench(tiny_plan({ActivationKind::ReLU, ActivationKind::GELU}, {0, 1, 2}, 3), tiny_config(), hooks);
  };
  std::thread a(worker), b(worker), c(worker);
  a.join();
  b.join();
  c.join();
  EXPECT_EQ(MeasurementGuard::peak_concurrency(), 1u);
}

TEST(Bench, PretrainingRunsBeforeTiming) {
  std::size_t reads = 0;
  BenchHooks hooks;
  hooks.clock = [&] {
    ++reads;
    return 0.0;
  };
  auto plan = tiny_plan({ActivationKind::SELU}, {0}, 1);
  plan.pretrain_epochs = 20;
  plan.warmup = false;
  const auto records = run_inference_bench(plan, tiny_config(), hooks);
  EXPECT_EQ(records.size(), 1u);
  EXPECT_EQ(reads, 2u);
}

TEST(Aggregate, HandArithmetic) {
  auto rec = [](double s, std::size_t run) {
    TimingRecord r;
    r.function = ActivationKind::ReLU;
    r.size_exponent = 1;
    r.run_index = run;
    r.elapsed_seconds = s;
    r.per_instance_seconds = s / 10;
    return r;
  };
  const std::vector<TimingRecord> three = {rec(1.0, 0), rec(2.0, 1), rec(3.0, 2)};
  const auto rows = aggregate(three);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].mean_elapsed, 2.0);
  EXPECT_DOUBLE_EQ(rows[0].sd_elapsed, 1.0);
  EXPECT_EQ(rows[0].runs, 3u);

  const std::vector<TimingRecord> same = {rec(0.1, 0), rec(0.1, 1), rec(0.1, 2)};
  EXPECT_EQ(aggregate(same)[0].sd_elapsed, 0.0);
  EXPECT_EQ(aggregate(same)[0].mean_elapsed, 0.1);
  const std::vector<TimingRecord> one = {rec(4.0, 0)};
  EXPECT_EQ(aggregate(one)[0].sd_elapsed, 0.0);

  TimingRecord skipped;
  skipped.function = ActivationKind::Tanh;
  skipped.skip_reason = "budget";
  const std::vector<TimingRecord> only_skip = {skipped};
  EXPECT_TRUE(aggregate(only_skip).empty());
}

TEST(Aggregate, IdenticalValuesComeBackExactly) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> d(1e-6, 1e3);
  for (int trial = 0; trial < 1000; ++trial) {
    const double v = d(g);
    std::vector<double> xs(1 + trial % 7, v);
    EXPECT_EQ(mean_of(xs), v);
    EXPECT_EQ(sample_sd(xs), 0.0);
  }
}

TEST(RecordsCsv, RoundTripKeepsSkipMarkersAbsent) {
  std::vector<TimingRecord> records;
  TimingRecord a;
  a.function = ActivationKind::Softsign;
  a.platform_label = "host, with comma";
  a.size_exponent = 3;
  a.run_index = 2;
  a.elapsed_seconds = 0.1 + 0.2;
  a.per_instance_seconds = (0.1 + 0.2) / 1000;
  records.push_back(a);
  TimingRecord b = a;
  b.function = ActivationKind::Dropout;
  b.elapsed_seconds.reset();
  b.per_instance_seconds.reset();
  b.skip_reason = "budget";
  records.push_back(b);

  std::stringstream ss;
  write_records_csv(ss, records);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kRecordsCsvHeader);
  EXPECT_NE(text.find(",NA,NA"), std::string::npos);
  EXPECT_NE(text.find("Dropout,dropout"), std::string::npos);

  const auto back = read_records_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].function, ActivationKind::Softsign);
  EXPECT_EQ(back[0].platform_label, "host, with comma");
  EXPECT_EQ(*back[0].elapsed_seconds, 0.1 + 0.2);
  EXPECT_EQ(*back[0].per_instance_seconds, (0.1 + 0.2) / 1000);
  EXPECT_FALSE(back[1].measured());
}

TEST(RecordsCsv, SchemaErrorsNameLineAndColumn) {
  std::stringstream missing("function,group,platform,device,n,run\nReLU,activation,x,cpu,1,0\n");
  try {
    read_records_csv(missing);
    FAIL();
  } catch (const csv::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("elapsed_s"), std::string::npos);
  }
  std::stringstream bad_fn(std::string(kRecordsCsvHeader) + "\nReLU,activation,x,cpu,1,0,1,0.1\nSwish,activation,x,cpu,1,0,1,0.1\n");
  try {
    read_records_csv(bad_fn);
    FAIL();
  } catch (const csv::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("function"), std::string::npos);
  }
  std::stringstream bad_num(std::string(kRecordsCsvHeader) + "\nReLU,activation,x,cpu,1,0,fast,0.1\n");
  EXPECT_THROW(read_records_csv(bad_num), csv::SchemaError);
}
