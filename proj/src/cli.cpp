#include "actbench/cli.hpp"

#include "actbench/analysis.hpp"
#include "actbench/costmodel.hpp"
#include "actbench/csv.hpp"
#include "actbench/harness.hpp"
#include "actbench/mnist.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef ACTBENCH_VERSION
#define ACTBENCH_VERSION "dev"
#endif
#ifndef ACTBENCH_LISTING_DIR
#define ACTBENCH_LISTING_DIR "listings"
#endif

namespace actbench::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<ActivationKind> parse_function_list(const std::string& spec) {
  std::vector<ActivationKind> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (item == "all") {
      const auto all = all_activation_kinds();
      out.insert(out.end(), all.begin(), all.end());
      continue;
    }
    const auto kind = find_activation(item);
    if (!kind) {
      throw UsageError(fmt::format("unknown function '{}'; valid names (or 'all'): {}", item,
                                   valid_activation_names()));
    }
    out.push_back(*kind);
  }
  if (out.empty()) throw UsageError("--functions is empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string platform_from_env(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ACTBENCH_PLATFORM"); env && *env) return env;
  return "unknown";
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::uint64_t seed = 0;
  std::string platform_label = "unknown";
  std::string started = utc_now();
  std::vector<std::string> outputs;

  json to_json(const std::string& finished) const {
    return {{"command", command},       {"argv", argv},       {"config", config},
            {"seed", seed},             {"platform_label", platform_label},
            {"started_utc", started},   {"finished_utc", finished},
            {"tool_version", ACTBENCH_VERSION}, {"outputs", outputs}};
  }
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_manifest(const fs::path& dir, const Manifest& m, const std::string& finished) {
  auto os = open_output(dir / "manifest.json");
  os << m.to_json(finished).dump(2) << '\n';
}

std::vector<int> exponent_range(int lo, int hi) {
  std::vector<int> out;
  for (int n = lo; n <= hi; ++n) out.push_back(n);
  return out;
}

// ---- bench-infer -----------------------------------------------------------

struct InferArgs {
  std::string functions = "all";
  int min_exponent = 0;
  int max_exponent = 6;
  std::size_t runs = 3;
  std::size_t pretrain_epochs = 0;
  double budget_seconds = 86400.0;
  std::uint64_t seed = 0;
  std::string out = "results";
  std::string platform;
  std::size_t batch_rows = 0;
  std::size_t hidden_width = 1024;
  std::size_t hidden_layers = 4;
  bool no_warmup = false;
};

int bench_infer(const InferArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.min_exponent > a.max_exponent) throw UsageError("--min-exponent exceeds --max-exponent");
  harness::BenchPlan plan;
  plan.functions = parse_function_list(a.functions);
  plan.exponents = exponent_range(a.min_exponent, a.max_exponent);
  plan.runs = a.runs;
  plan.pretrain_epochs = a.pretrain_epochs;
  plan.time_budget_seconds = a.budget_seconds;
  plan.seed = a.seed;
  plan.batch_rows = a.batch_rows;
  plan.warmup = !a.no_warmup;
  plan.platform_label = platform_from_env(a.platform);
  plan.validate();

  NetworkConfig config = NetworkConfig::benchmark_preset(ActivationKind::ReLU, a.seed);
  config.hidden_width = a.hidden_width;
  config.hidden_layers = a.hidden_layers;

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m;
  m.command = "bench-infer";
  m.argv = argv;
  m.seed = a.seed;
  m.platform_label = plan.platform_label;
  json functions = json::array();
  for (auto f : plan.functions) functions.push_back(name_of(f));
  m.config = {{"functions", functions},
              {"exponents", plan.exponents},
              {"runs", plan.runs},
              {"pretrain_epochs", plan.pretrain_epochs},
              {"budget_seconds", plan.time_budget_seconds},
              {"batch_rows", plan.batch_rows},
              {"warmup", plan.warmup},
              {"network",
               {{"input_dim", config.input_dim},
                {"hidden_layers", config.hidden_layers},
                {"hidden_width", config.hidden_width},
                {"output_dim", config.output_dim}}}};
  m.outputs = {"records.csv", "aggregate.json"};

  harness::BenchHooks hooks;
  hooks.on_record = [&](const harness::TimingRecord& r) {
    if (r.measured()) {
      out << fmt::format("{:<12} n={} run={} {:.6e} s\n", name_of(r.function), r.size_exponent, r.run_index,
                         *r.elapsed_seconds);
    } else {
      out << fmt::format("{:<12} n={} run={} skipped: {}\n", name_of(r.function), r.size_exponent, r.run_index,
                         r.skip_reason);
    }
  };
  const auto records = harness::run_inference_bench(plan, config, hooks);
  const auto rows = harness::aggregate(records);
  const std::string finished = utc_now();

  {
    auto os = open_output(dir / "records.csv");
    harness::write_records_csv(os, records);
  }
  std::size_t skipped = 0;
  for (const auto& r : records) skipped += r.measured() ? 0 : 1;
  json agg = json::array();
  for (const auto& r : rows) {
    agg.push_back({{"function", name_of(r.function)},
                   {"group", group_name(group_of(r.function))},
                   {"n", r.size_exponent},
                   {"runs", r.runs},
                   {"mean_elapsed_s", r.mean_elapsed},
                   {"sd_elapsed_s", r.sd_elapsed},
                   {"mean_per_instance_s", r.mean_per_instance},
                   {"sd_per_instance_s", r.sd_per_instance}});
  }
  {
    auto os = open_output(dir / "aggregate.json");
    os << json{{"manifest", m.to_json(finished)}, {"skipped_records", skipped}, {"rows", agg}}.dump(2) << '\n';
  }
  write_manifest(dir, m, finished);

  out << fmt::format("{} records ({} skipped) written to {}\n", records.size(), skipped, dir.string());
  return skipped == 0 ? kExitOk : kExitSkipped;
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string fixture;
  std::string fixture_dir;
  std::string input;
  bool spread = false;
  bool relative = false;
  bool curve = false;
  bool table = false;
  std::optional<int> n;
  std::string group = "activation";
  std::string out;
};

FunctionGroup parse_group(const std::string& g) {
  if (g == "activation" || g == "activations") return FunctionGroup::Activation;
  if (g == "dropout" || g == "dropouts") return FunctionGroup::Dropout;
  throw UsageError(fmt::format("unknown group '{}'; expected activation or dropout", g));
}

int analyze(AnalyzeArgs a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  if (a.fixture.empty() == a.input.empty()) throw UsageError("give exactly one of --fixture or --input");
  const FunctionGroup group = parse_group(a.group);
  if (!a.spread && !a.relative && !a.curve && !a.table) a.table = true;

  analysis::MeanTable means;
  if (!a.fixture.empty()) {
    analysis::fixture_info(a.fixture);
    means = a.fixture_dir.empty() ? analysis::load_fixture(a.fixture)
                                  : analysis::load_fixture(a.fixture, a.fixture_dir);
  } else {
    std::ifstream is(a.input);
    if (!is) throw std::runtime_error("cannot open " + a.input);
    means = analysis::read_any_csv(is);
  }

  const std::vector<int> ns = a.n ? std::vector<int>{*a.n} : means.exponents();
  std::vector<analysis::SpreadSummary> spreads;
  std::vector<analysis::IdentityRelativeSummary> relatives;
  int status = kExitOk;

  if (a.spread) {
    for (int n : ns) {
      try {
        const auto s = analysis::group_spread(means, group, n);
        spreads.push_back(s);
        out << fmt::format("spread n={} {}: {:.2f} ({} / {})\n", n, group_name(group), s.ratio,
                           name_of(s.argmax), name_of(s.argmin));
      } catch (const analysis::UndefinedSpread& e) {
        if (a.n) throw;
        err << fmt::format("spread n={}: {}\n", n, e.what());
      }
    }
  }
  if (a.relative) {
    for (int n : ns) {
      try {
        const auto r = analysis::relative_to_identity(means, n);
        relatives.push_back(r);
        out << fmt::format("relative n={}: mean {:.2f} sd {:.2f}\n", n, r.mean_ratio, r.sd_ratio);
        for (const auto& [f, ratio] : r.ratios) out << fmt::format("  {:<12} {:.2f}\n", name_of(f), ratio);
      } catch (const analysis::MissingBaseline& e) {
        if (a.n) throw;
        err << fmt::format("relative n={}: {}\n", n, e.what());
      }
    }
  }
  const auto curve = analysis::per_instance_curve(means);
  if (a.curve && a.out.empty()) analysis::write_curve_csv(out, curve);
  const std::string table_text = analysis::emit_table(means);
  if (a.table && a.out.empty()) out << table_text;

  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    Manifest m;
    m.command = "analyze";
    m.argv = argv;
    m.config = {{"source", a.fixture.empty() ? a.input : "fixture:" + a.fixture}, {"group", a.group}};
    if (a.spread) {
      auto os = open_output(dir / "spread.csv");
      analysis::write_spread_csv(os, spreads);
      m.outputs.push_back("spread.csv");
    }
    if (a.relative) {
      auto os = open_output(dir / "relative.csv");
      analysis::write_relative_csv(os, relatives);
      m.outputs.push_back("relative.csv");
    }
    if (a.curve) {
      auto os = open_output(dir / "curve.csv");
      analysis::write_curve_csv(os, curve);
      m.outputs.push_back("curve.csv");
    }
    if (a.table) {
      auto os = open_output(dir / "table.txt");
      os << table_text;
      m.outputs.push_back("table.txt");
    }
    write_manifest(dir, m, utc_now());
  }
  return status;
}

// ---- bench-train -----------------------------------------------------------

struct TrainArgs {
  std::string mnist_dir;
  std::string functions = "relu";
  double threshold = 0.90;
  std::size_t max_epochs = 100;
  std::size_t runs = 3;
  std::optional<std::size_t> train_limit;
  std::size_t validation_size = 10000;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  std::size_t hidden_width = 1024;
  std::uint64_t seed = 0;
  std::string out = "results";
};

int bench_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto functions = parse_function_list(a.functions);
  const auto data = mnist::load_training_set(a.mnist_dir);
  const auto split = mnist::split(data, a.validation_size, a.seed, a.train_limit);

  mnist::TrainOptions opts;
  opts.threshold = a.threshold;
  opts.max_epochs = a.max_epochs;
  opts.runs = a.runs;
  opts.batch_size = a.batch_size;
  opts.learning_rate = a.learning_rate;
  opts.seed = a.seed;

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m;
  m.command = "bench-train";
  m.argv = argv;
  m.seed = a.seed;
  json fn = json::array();
  for (auto f : functions) fn.push_back(name_of(f));
  m.config = {{"functions", fn},
              {"threshold", a.threshold},
              {"max_epochs", a.max_epochs},
              {"runs", a.runs},
              {"train_examples", split.train.size()},
              {"validation_examples", split.validation.size()},
              {"batch_size", a.batch_size},
              {"learning_rate", a.learning_rate},
              {"hidden_width", a.hidden_width}};
  m.outputs = {"train_runs.csv", "train_summary.csv"};

  std::vector<mnist::TrainResult> results;
  for (ActivationKind f : functions) {
    NetworkConfig config = NetworkConfig::mnist_preset(f, a.seed);
    config.hidden_width = a.hidden_width;
    results.push_back(mnist::train_to_threshold(config, split, opts));
    const auto& r = results.back();
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      const auto& run = r.runs[i];
      out << fmt::format("{:<12} run={} epochs={} accuracy={:.4f} {} {:.3f} s{}\n", name_of(f), i,
                         run.epochs_used, run.final_accuracy, run.reached_target ? "reached" : "not-reached",
                         run.train_seconds, run.failure_reason.empty() ? "" : " (" + run.failure_reason + ")");
    }
    out << fmt::format("{:<12} mean {:.3f} s sd {:.3f} s{}\n", name_of(f), r.mean_seconds, r.sd_seconds,
                       r.any_run_failed ? " [failed run]" : "");
  }
  const std::string finished = utc_now();
  {
    auto os = open_output(dir / "train_runs.csv");
    mnist::write_runs_csv(os, results);
  }
  {
    auto os = open_output(dir / "train_summary.csv");
    mnist::write_summary_csv(os, results);
  }
  write_manifest(dir, m, finished);
  return kExitOk;
}

// ---- costmodel -------------------------------------------------------------

struct CostArgs {
  std::vector<std::string> listings;
  std::string cost_table;
};

int cost_report(const CostArgs& a, std::ostream& out) {
  std::vector<std::string> paths = a.listings;
  if (paths.empty()) {
    paths = {(fs::path(ACTBENCH_LISTING_DIR) / "relu.lst").string(),
             (fs::path(ACTBENCH_LISTING_DIR) / "tanh.lst").string()};
  }
  costmodel::CostTable table = costmodel::default_cost_table();
  if (!a.cost_table.empty()) {
    std::ifstream is(a.cost_table);
    if (!is) throw std::runtime_error("file not found: " + a.cost_table);
    table = costmodel::read_cost_table(is);
  }

  std::vector<costmodel::Listing> all;
  std::vector<std::string> entries;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw std::runtime_error("file not found: " + p);
    auto listings = costmodel::load_listing_file(p);
    if (listings.empty()) throw std::runtime_error(p + ": no listings");
    entries.push_back(listings.front().label);
    for (auto& l : listings) all.push_back(std::move(l));
  }
  const auto symbols = costmodel::symbol_map(all);
  std::vector<std::pair<std::string, std::uint64_t>> totals;
  out << "listing,micro_ops,instructions\n";
  for (const auto& l : all) {
    const auto total = costmodel::micro_op_total(l, table, symbols);
    out << fmt::format("{},{},{}\n", l.label, total, costmodel::inlined_instruction_count(l, symbols));
    if (std::find(entries.begin(), entries.end(), l.label) != entries.end()) totals.emplace_back(l.label, total);
  }
  for (std::size_t i = 0; i < totals.size(); ++i) {
    for (std::size_t j = 0; j < totals.size(); ++j) {
      if (i == j) continue;
      out << fmt::format("ratio {}/{} = {:.2f}\n", totals[i].first, totals[j].first,
                         static_cast<double>(totals[i].second) / static_cast<double>(totals[j].second));
    }
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Activation function benchmarking toolkit", "actbench"};
  app.set_version_flag("--version", std::string(ACTBENCH_VERSION));
  app.require_subcommand(1);

  InferArgs infer;
  auto* c_infer = app.add_subcommand("bench-infer", "Time forward passes per hidden activation");
  c_infer->add_option("--functions", infer.functions, "Comma-separated names or 'all'")->capture_default_str();
  c_infer->add_option("--min-exponent", infer.min_exponent, "Smallest n")
      ->check(CLI::Range(0, kMaxSizeExponent))
      ->capture_default_str();
  c_infer->add_option("--max-exponent", infer.max_exponent, "Largest n (workload 10^n)")
      ->check(CLI::Range(0, kMaxSizeExponent))
      ->capture_default_str();
  c_infer->add_option("--runs", infer.runs)->check(CLI::PositiveNumber)->capture_default_str();
  c_infer->add_option("--pretrain-epochs", infer.pretrain_epochs)->capture_default_str();
  c_infer->add_option("--budget-seconds", infer.budget_seconds, "Per-function time allowance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_infer->add_option("--seed", infer.seed)->capture_default_str();
  c_infer->add_option("--out", infer.out, "Output directory")->capture_default_str();
  c_infer->add_option("--platform", infer.platform, "Platform label (default $ACTBENCH_PLATFORM)");
  c_infer->add_option("--batch-rows", infer.batch_rows, "Rows per forward call, 0 = whole set")
      ->capture_default_str();
  c_infer->add_option("--hidden-width", infer.hidden_width)->check(CLI::PositiveNumber)->capture_default_str();
  c_infer->add_option("--hidden-layers", infer.hidden_layers)->check(CLI::PositiveNumber)->capture_default_str();
  c_infer->add_flag("--no-warmup", infer.no_warmup);

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Spread, identity-relative ratios, curves and tables");
  c_an->add_option("--fixture", an.fixture, "table1..table4");
  c_an->add_option("--fixture-dir", an.fixture_dir);
  c_an->add_option("--input", an.input, "Harness or fixture CSV");
  c_an->add_flag("--spread", an.spread);
  c_an->add_flag("--relative", an.relative);
  c_an->add_flag("--curve", an.curve);
  c_an->add_flag("--table", an.table);
  c_an->add_option("--n", an.n)->check(CLI::Range(0, kMaxSizeExponent));
  c_an->add_option("--group", an.group)->capture_default_str();
  c_an->add_option("--out", an.out, "Write CSV outputs here instead of stdout");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("bench-train", "Train-to-threshold timing on MNIST");
  c_tr->add_option("--mnist-dir", tr.mnist_dir, "Directory holding the IDX training files")->required();
  c_tr->add_option("--functions", tr.functions)->capture_default_str();
  c_tr->add_option("--threshold", tr.threshold)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_tr->add_option("--max-epochs", tr.max_epochs)->capture_default_str();
  c_tr->add_option("--runs", tr.runs)->check(CLI::PositiveNumber)->capture_default_str();
  c_tr->add_option("--train-limit", tr.train_limit, "Use at most this many training examples");
  c_tr->add_option("--validation-size", tr.validation_size)->check(CLI::PositiveNumber)->capture_default_str();
  c_tr->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  c_tr->add_option("--lr", tr.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  c_tr->add_option("--hidden-width", tr.hidden_width)->check(CLI::PositiveNumber)->capture_default_str();
  c_tr->add_option("--seed", tr.seed)->capture_default_str();
  c_tr->add_option("--out", tr.out)->capture_default_str();

  CostArgs cost;
  auto* c_cost = app.add_subcommand("costmodel", "Micro-op totals for toy assembly listings");
  c_cost->add_option("listings", cost.listings, "Listing files (default: shipped relu.lst, tanh.lst)");
  c_cost->add_option("--cost-table", cost.cost_table, "mnemonic,count CSV overlaying the defaults");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << ACTBENCH_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::vector<std::string> argv{"actbench"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    if (c_infer->parsed()) return bench_infer(infer, argv, out);
    if (c_an->parsed()) return analyze(an, argv, out, err);
    if (c_tr->parsed()) return bench_train(tr, argv, out);
    if (c_cost->parsed()) return cost_report(cost, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace actbench::cli
