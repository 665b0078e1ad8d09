#include "actbench/analysis.hpp"
#include "actbench/csv.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace actbench;
using namespace actbench::analysis;

namespace {

MeanTable random_table(std::mt19937_64& g, std::vector<int> ns) {
  std::uniform_real_distribution<double> logv(-6, 3);
  MeanTable t;
  for (auto f : all_activation_kinds())
    for (int n : ns) t.set(f, n, std::pow(10.0, logv(g)));
  return t;
}

std::size_t count_marks(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '*')); }

}  // namespace

TEST(Fixtures, ShippedTablesHaveEveryCell) {
  for (const auto& info : fixtures()) {
    const auto t = load_fixture(info.name);
    EXPECT_EQ(t.functions().size(), 26u) << info.name;
    EXPECT_EQ(t.exponents(), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8})) << info.name;
    EXPECT_EQ(t.cell_count(), 26u * 9) << info.name;
  }
  EXPECT_THROW(load_fixture("table5"), std::invalid_argument);
}

TEST(Fixtures, SpotValues) {
  const auto t1 = load_fixture("table1");
  EXPECT_EQ(*t1.get(ActivationKind::GELU, 4), 2.322e-4);
  EXPECT_EQ(*t1.get(ActivationKind::RReLU, 4), 2.532e-3);
  const auto t2 = load_fixture("table2");
  EXPECT_EQ(*t2.get(ActivationKind::Softsign, 5), 1.061e-3);
  EXPECT_EQ(*t2.get(ActivationKind::Softshrink, 5), 1.537e-4);
  EXPECT_EQ(*t2.get(ActivationKind::Identity, 1), 8.792e-5);
  const auto t4 = load_fixture("table4");
  EXPECT_EQ(*t4.get(ActivationKind::Softsign, 8), 1.089e3);
  EXPECT_EQ(*t4.get(ActivationKind::Identity, 8), 2.387e2);
}

TEST(Fixtures, LaptopLargestSizeIsAbsentNotZero) {
  const auto t3 = load_fixture("table3");
  for (auto f : all_activation_kinds()) {
    EXPECT_TRUE(t3.has_cell(f, 8));
    EXPECT_FALSE(t3.get(f, 8).has_value()) << name_of(f);
    EXPECT_TRUE(t3.get(f, 7).has_value());
  }
}

TEST(Spread, ConsumerGpuFactorOfEleven) {
  const auto s = group_spread(load_fixture("table1"), FunctionGroup::Activation, 4);
  EXPECT_NEAR(s.ratio, 2.532e-3 / 2.322e-4, 1e-12);
  EXPECT_NEAR(s.ratio, 10.90, 0.01);
  EXPECT_EQ(s.argmax, ActivationKind::RReLU);
  EXPECT_EQ(s.argmin, ActivationKind::GELU);
}

TEST(Spread, DatacentreGpuFactorOfSeven) {
  const auto s = group_spread(load_fixture("table2"), FunctionGroup::Activation, 5);
  EXPECT_NEAR(s.ratio, 6.90, 0.01);
  EXPECT_EQ(s.argmax, ActivationKind::Softsign);
  EXPECT_EQ(s.argmin, ActivationKind::Softshrink);
}

TEST(Spread, DatacentreCpuRoughlyTwo) {
  const auto s = group_spread(load_fixture("table4"), FunctionGroup::Activation, 8);
  EXPECT_NEAR(s.ratio, 2.12, 0.01);
  EXPECT_EQ(s.argmax, ActivationKind::Softsign);
  EXPECT_EQ(group_of(s.argmin), FunctionGroup::Activation);
}

TEST(Spread, PaddedSingleMemberAndTooFewMembers) {
  MeanTable t;
  t.set(ActivationKind::Dropout, 2, 0.5);
  EXPECT_THROW(group_spread(t, FunctionGroup::Dropout, 2), UndefinedSpread);
  t.set(ActivationKind::Dropout2d, 2, 0.5);
  const auto s = group_spread(t, FunctionGroup::Dropout, 2);
  EXPECT_EQ(s.ratio, 1.0);
  EXPECT_EQ(s.argmax, ActivationKind::Dropout);
  EXPECT_EQ(s.argmin, ActivationKind::Dropout);
  EXPECT_THROW(group_spread(t, FunctionGroup::Activation, 2), UndefinedSpread);
  EXPECT_THROW(group_spread(load_fixture("table3"), FunctionGroup::Activation, 8), UndefinedSpread);
}

TEST(Spread, PropertiesUnderScaling) {
  std::mt19937_64 g(71);
  std::uniform_real_distribution<double> logc(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = random_table(g, {0, 3});
    const double c = std::pow(10.0, logc(g));
    const auto scaled = t.scaled(c);
    for (auto group : {FunctionGroup::Activation, FunctionGroup::Dropout}) {
      const auto a = group_spread(t, group, 3);
      const auto b = group_spread(scaled, group, 3);
      EXPECT_GE(a.ratio, 1.0);
      EXPECT_NEAR(a.ratio, b.ratio, 1e-12 * a.ratio);
      EXPECT_EQ(a.argmax, b.argmax);
      EXPECT_EQ(a.argmin, b.argmin);
      EXPECT_EQ(group_of(a.argmax), group);
      EXPECT_EQ(group_of(a.argmin), group);
    }
    const auto r1 = relative_to_identity(t, 0);
    const auto r2 = relative_to_identity(scaled, 0);
    ASSERT_EQ(r1.ratios.size(), r2.ratios.size());
    for (std::size_t i = 0; i < r1.ratios.size(); ++i) EXPECT_NEAR(r1.ratios[i].second, r2.ratios[i].second, 1e-12 * r1.ratios[i].second);
  }
}

TEST(Relative, SoftsignOnDatacentreCpu) {
  const auto r = relative_to_identity(load_fixture("table4"), 8);
  ASSERT_EQ(r.ratios.size(), 21u);
  bool found = false;
  for (const auto& [f, ratio] : r.ratios) {
    EXPECT_EQ(group_of(f), FunctionGroup::Activation);
    if (f == ActivationKind::Softsign) {
      found = true;
      EXPECT_NEAR(ratio, 1.089e3 / 2.387e2, 1e-12);
      EXPECT_NEAR(ratio, 4.56, 0.01);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Relative, AllEqualToIdentity) {
  MeanTable t;
  for (auto f : all_activation_kinds()) t.set(f, 5, 0.25);
  const auto r = relative_to_identity(t, 5);
  EXPECT_EQ(r.mean_ratio, 1.0);
  EXPECT_EQ(r.sd_ratio, 0.0);
  EXPECT_EQ(r.ratios.size(), 21u);
}

TEST(Relative, MissingBaseline) {
  MeanTable t;
  t.set(ActivationKind::ReLU, 1, 1.0);
  EXPECT_THROW(relative_to_identity(t, 1), MissingBaseline);
  t.set(ActivationKind::Identity, 1, 0.0);
  EXPECT_THROW(relative_to_identity(t, 1), MissingBaseline);
  EXPECT_THROW(relative_to_identity(load_fixture("table3"), 8), MissingBaseline);
}

TEST(Curve, IdentityAtTenInstances) {
  const auto curve = per_instance_curve(load_fixture("table2"));
  const auto& id = curve.at(ActivationKind::Identity);
  ASSERT_EQ(id.size(), 9u);
  EXPECT_EQ(id[1].size_exponent, 1);
  EXPECT_DOUBLE_EQ(*id[1].per_instance_seconds, 8.792e-5 / 10);
}

TEST(Curve, ConstantTimingsGiveStrictlyDecreasingCurve) {
  MeanTable t;
  for (int n = 0; n <= 8; ++n) t.set(ActivationKind::Tanh, n, 3.0);
  const auto curve = per_instance_curve(t);
  const auto& s = curve.at(ActivationKind::Tanh);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(*s[i].per_instance_seconds, *s[i - 1].per_instance_seconds);
}

TEST(Curve, LaptopLargestSizeIsMarkedAbsent) {
  const auto curve = per_instance_curve(load_fixture("table3"));
  for (const auto& [f, series] : curve) {
    ASSERT_EQ(series.back().size_exponent, 8);
    EXPECT_FALSE(series.back().per_instance_seconds.has_value()) << name_of(f);
  }
  std::ostringstream os;
  write_curve_csv(os, curve);
  EXPECT_NE(os.str().find("Identity,8,NA"), std::string::npos);
}

TEST(Curve, PerInstanceTimesPowerReconstructsWithinOneUlp) {
  for (const auto& info : fixtures()) {
    const auto t = load_fixture(info.name);
    for (const auto& [f, series] : per_instance_curve(t)) {
      for (const auto& p : series) {
        if (!p.per_instance_seconds) continue;
        const double back = *p.per_instance_seconds * std::pow(10.0, p.size_exponent);
        const double orig = *t.get(f, p.size_exponent);
        EXPECT_LE(std::fabs(back - orig), std::nextafter(orig, INFINITY) - orig) << info.name;
      }
    }
  }
}

TEST(Table, FixturesRoundTripExactly) {
  for (const auto& info : fixtures()) {
    const auto t = load_fixture(info.name);
    const std::string text = emit_table(t);
    const auto back = parse_table(text);
    EXPECT_EQ(back, t) << info.name;
    EXPECT_EQ(emit_table(back), text);
  }
}

TEST(Table, LayoutGroupsAndMarks) {
  const std::string text = emit_table(load_fixture("table1"));
  // Header, rules around three groups, 26 rows.
  EXPECT_EQ(text.rfind("Function", 0), 0u);
  EXPECT_NE(text.find("2.322e-04*"), std::string::npos);
  EXPECT_NE(text.find("2.532e-03"), std::string::npos);
  // One mark per group per column: 3 groups x 9 sizes.
  EXPECT_EQ(count_marks(text), 27u);
  EXPECT_EQ(count_marks(emit_table(load_fixture("table1"), MinimumMarking::None)), 0u);
  // Laptop table: the n=8 column is absent in every group, so 3 x 8 marks.
  const std::string laptop = emit_table(load_fixture("table3"));
  EXPECT_EQ(count_marks(laptop), 24u);
  EXPECT_NE(laptop.find("n/a"), std::string::npos);
  const auto pos_celu = text.find("CELU");
  const auto pos_alpha = text.find("AlphaDropout");
  const auto pos_identity = text.find("Identity");
  EXPECT_LT(pos_celu, pos_alpha);
  EXPECT_LT(pos_alpha, pos_identity);
}

TEST(Table, SingleCellIsItsOwnMinimum) {
  MeanTable t;
  t.set(ActivationKind::ReLU, 3, 1.5e-3);
  const std::string text = emit_table(t);
  EXPECT_NE(text.find("1.500e-03*"), std::string::npos);
  EXPECT_EQ(count_marks(text), 1u);
  EXPECT_EQ(parse_table(text), t);
}

TEST(Table, TieMarksFirstInRowOrder) {
  MeanTable t;
  t.set(ActivationKind::ELU, 0, 2.0);
  t.set(ActivationKind::CELU, 0, 1.0);
  t.set(ActivationKind::Tanh, 0, 1.0);
  const std::string text = emit_table(t);
  EXPECT_EQ(count_marks(text), 1u);
  const auto mark = text.find('*');
  EXPECT_LT(text.find("CELU"), mark);
  EXPECT_LT(mark, text.find("ELU", text.find("CELU") + 4));
}

TEST(Table, ParseErrors) {
  EXPECT_THROW(parse_table(""), csv::SchemaError);
  EXPECT_THROW(parse_table("Function n=0\nSwish 1.0e+00\n"), csv::SchemaError);
  EXPECT_THROW(parse_table("Function n=0 n=1\nReLU 1.0e+00\n"), csv::SchemaError);
}

TEST(Csv, MeansRoundTripAndAnySchemaDetection) {
  const auto t = load_fixture("table3");
  std::stringstream ss;
  write_means_csv(ss, t);
  EXPECT_EQ(read_means_csv(ss), t);
  std::stringstream again;
  write_means_csv(again, t);
  EXPECT_EQ(read_any_csv(again), t);

  std::stringstream harness_csv(std::string(harness::kRecordsCsvHeader) +
                                "\nReLU,activation,h,cpu,2,0,1.0,0.01\nReLU,activation,h,cpu,2,1,3.0,0.03\n"
                                "Tanh,activation,h,cpu,2,0,NA,NA\n");
  const auto m = read_any_csv(harness_csv);
  EXPECT_EQ(*m.get(ActivationKind::ReLU, 2), 2.0);
  EXPECT_TRUE(m.has_cell(ActivationKind::Tanh, 2));
  EXPECT_FALSE(m.get(ActivationKind::Tanh, 2).has_value());
}

TEST(Csv, EmptyAndMismatchedInputs) {
  std::stringstream empty;
  try {
    read_any_csv(empty);
    FAIL();
  } catch (const csv::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("no data"), std::string::npos);
  }
  std::stringstream header_only("function,n,mean_s\n");
  EXPECT_THROW(read_any_csv(header_only), csv::SchemaError);
  std::stringstream wrong("fn,size,secs\nReLU,1,2\n");
  try {
    read_any_csv(wrong);
    FAIL();
  } catch (const csv::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("function,n,mean_s"), std::string::npos);
  }
  std::stringstream bad_value("function,n,mean_s\nReLU,1,fast\n");
  try {
    read_any_csv(bad_value);
    FAIL();
  } catch (const csv::SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("mean_s"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::stringstream ragged("function,n,mean_s\nReLU,1\n");
  EXPECT_THROW(read_any_csv(ragged), csv::SchemaError);
}

TEST(Csv, SpreadAndRelativeWriters) {
  const auto t = load_fixture("table1");
  const std::vector<SpreadSummary> spreads = {group_spread(t, FunctionGroup::Activation, 4)};
  std::ostringstream os;
  write_spread_csv(os, spreads);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "n,group,ratio,argmax,argmin");
  EXPECT_NE(os.str().find(",RReLU,GELU"), std::string::npos);
  const std::vector<IdentityRelativeSummary> rel = {relative_to_identity(t, 4)};
  std::ostringstream r;
  write_relative_csv(r, rel);
  EXPECT_EQ(r.str().rfind("n,mean_ratio,sd_ratio\n4,", 0), 0u);
}

TEST(CsvPrimitives, FormatDoubleRoundTrips) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> d(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::pow(10.0, d(g) / 10) * (i % 2 ? -1 : 1);
    EXPECT_EQ(csv::parse_double(csv::format_double(v), "x", 1), v);
  }
  EXPECT_EQ(csv::split_line("a,\"b,c\",d"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(csv::escape("x\"y"), "\"x\"\"y\"");
  EXPECT_TRUE(csv::is_absent("NA"));
  EXPECT_TRUE(csv::is_absent(""));
  EXPECT_THROW(csv::parse_integer("1.5", "n", 3), csv::SchemaError);
}
