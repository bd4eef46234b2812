#include <algorithm>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "groomrisk/evaluation.hpp"
#include "groomrisk/random.hpp"

namespace groomrisk {
namespace {

std::vector<EvalRecord> records_for(std::vector<EvalInput> in) {
  return bucket(in, FuzzyConfig{});
}

std::vector<EvalInput> random_inputs(Rng& rng, std::size_t n) {
  std::vector<EvalInput> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.5 * static_cast<double>(rng.below(13));
    out.push_back({"ctx-" + std::to_string(i), kGroups[rng.below(3)], y, y + rng.uniform() * 4.0 - 2.0});
  }
  return out;
}

TEST(Bucket, CategoriesFromActualScore) {
  const auto r = records_for({{"a", Group::LEO, 0.0, 5.0}, {"b", Group::LEO, 1.0, 0.0},
                              {"c", Group::LEO, 2.0, 0.0}});
  EXPECT_EQ(r[0].category, RiskCategory::Moderate);
  EXPECT_EQ(r[1].category, RiskCategory::Significant);
  EXPECT_EQ(r[2].category, RiskCategory::Severe);
}

TEST(PerCategoryMse, PerfectPredictions) {
  Rng rng(1);
  auto inputs = random_inputs(rng, 60);
  for (auto& in : inputs) in.r_pred = in.r_groom;
  const auto report = make_report(records_for(inputs), {});
  for (auto g : kGroups) {
    EXPECT_EQ(report.group(g).mse.value(), 0.0);
    for (auto c : kCategories) {
      if (report.cell(g, c).count > 0) {
        EXPECT_EQ(report.cell(g, c).mse.value(), 0.0);
      }
    }
  }
}

TEST(PerCategoryMse, HandComputed) {
  const auto report =
      make_report(records_for({{"a", Group::Victim, 0.0, 0.5}, {"b", Group::Victim, 2.0, 3.0}}), {});
  const auto& mod = report.cell(Group::Victim, RiskCategory::Moderate);
  const auto& sev = report.cell(Group::Victim, RiskCategory::Severe);
  EXPECT_EQ(mod.count, 1u);
  EXPECT_DOUBLE_EQ(mod.mse.value(), 0.25);
  EXPECT_EQ(sev.count, 1u);
  EXPECT_DOUBLE_EQ(sev.mse.value(), 1.0);
  EXPECT_DOUBLE_EQ(report.group(Group::Victim).mse.value(), 0.625);
  const auto& sig = report.cell(Group::Victim, RiskCategory::Significant);
  EXPECT_EQ(sig.count, 0u);
  EXPECT_FALSE(sig.mse.has_value());
  EXPECT_FALSE(sig.distribution.has_value());
  EXPECT_EQ(report.group(Group::LEO).count, 0u);
  EXPECT_FALSE(report.group(Group::LEO).mse.has_value());
}

TEST(PerCategoryMse, GroupsAreIndependent) {
  std::vector<EvalInput> in = {{"a", Group::LEO, 0.0, 0.4}, {"b", Group::LEO, 1.5, 2.0},
                               {"c", Group::LEO, 3.0, 1.0}};
  auto both = in;
  for (auto x : in) {
    x.context_id += "-d";
    x.group = Group::Decoy;
    both.push_back(x);
  }
  const auto report = make_report(records_for(both), {});
  for (auto c : kCategories) {
    EXPECT_EQ(report.cell(Group::LEO, c), report.cell(Group::Decoy, c));
  }
  EXPECT_EQ(report.group(Group::LEO), report.group(Group::Decoy));
}

TEST(PerCategoryMse, PartitionProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const auto report = make_report(records_for(random_inputs(rng, 1 + rng.below(300))), {});
    for (auto g : kGroups) {
      std::size_t n = 0;
      double weighted = 0.0;
      for (auto c : kCategories) {
        const auto& cell = report.cell(g, c);
        n += cell.count;
        if (cell.mse) {
          EXPECT_GE(*cell.mse, 0.0);
          weighted += static_cast<double>(cell.count) * *cell.mse;
        }
      }
      EXPECT_EQ(n, report.group(g).count);
      if (n > 0) {
        EXPECT_NEAR(weighted / static_cast<double>(n), *report.group(g).mse, 1e-9);
      }
    }
  }
}

TEST(Report, OrderInsensitive) {
  Rng rng(5);
  auto inputs = random_inputs(rng, 200);
  const auto a = make_report(records_for(inputs), {{"k", 1}});
  rng.shuffle(inputs);
  const auto b = make_report(records_for(inputs), {{"k", 1}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(emit_report(a, ReportFormat::Csv), emit_report(b, ReportFormat::Csv));
}

TEST(Report, InputHashTracksContent) {
  Rng rng(6);
  auto inputs = random_inputs(rng, 20);
  const auto h1 = records_hash(records_for(inputs));
  inputs[3].r_pred += 1e-12;
  EXPECT_NE(records_hash(records_for(inputs)), h1);
  EXPECT_EQ(h1.size(), 16u);
}

TEST(DistributionStats, Examples) {
  auto single = describe({1.5});
  ASSERT_TRUE(single);
  EXPECT_EQ(single->variance, 0.0);
  for (double v : {single->mean, single->min, single->p25, single->median, single->p75, single->max}) {
    EXPECT_EQ(v, 1.5);
  }
  auto three = describe({3.0, 1.0, 2.0});
  EXPECT_DOUBLE_EQ(three->mean, 2.0);
  EXPECT_DOUBLE_EQ(three->variance, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(three->median, 2.0);
  EXPECT_DOUBLE_EQ(three->p25, 1.5);
  EXPECT_DOUBLE_EQ(three->p75, 2.5);
  EXPECT_FALSE(describe({}).has_value());
}

TEST(DistributionStats, LinearInterpolationQuantiles) {
  const std::vector<double> v = {1.0, 2.0, 4.0, 8.0};
  // h = 3q
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.75), 5.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 8.0);
}

TEST(EmitReport, Deterministic) {
  Rng rng(7);
  const auto report = make_report(records_for(random_inputs(rng, 50)), {{"seed", 7}});
  for (auto f : {ReportFormat::TableText, ReportFormat::Csv, ReportFormat::Json}) {
    EXPECT_EQ(emit_report(report, f), emit_report(report, f));
  }
}

TEST(EmitReport, CsvRowCount) {
  Rng rng(8);
  const auto report = make_report(records_for(random_inputs(rng, 500)), {});
  const auto csv = emit_report(report, "csv");
  std::size_t data_rows = 0;
  std::istringstream lines(csv);
  for (std::string line; std::getline(lines, line);) {
    if (line.empty() || line[0] == '#' || line.rfind("group,", 0) == 0) continue;
    ++data_rows;
  }
  EXPECT_EQ(data_rows, 12u);
}

TEST(EmitReport, JsonRoundTrip) {
  Rng rng(9);
  auto inputs = random_inputs(rng, 40);
  inputs.erase(std::remove_if(inputs.begin(), inputs.end(),
                              [](const EvalInput& x) { return x.group == Group::Decoy; }),
               inputs.end());
  const auto report = make_report(records_for(inputs), {{"fuzzy", FuzzyConfig{}}});
  const auto text = emit_report(report, ReportFormat::Json);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(text)), report);
}

TEST(EmitReport, TableLayout) {
  Rng rng(10);
  const auto report = make_report(records_for(random_inputs(rng, 300)), {});
  const auto text = emit_report(report, ReportFormat::TableText);
  std::istringstream lines(text);
  std::vector<std::string> all;
  for (std::string line; std::getline(lines, line);) all.push_back(line);
  auto it = std::find(all.begin(), all.end(), "Mean squared error");
  ASSERT_NE(it, all.end());
  EXPECT_EQ(it[1].rfind("Grooming Risk", 0), 0u);
  EXPECT_NE(it[1].find("LEO"), std::string::npos);
  EXPECT_LT(it[1].find("LEO"), it[1].find("Victim"));
  EXPECT_LT(it[1].find("Victim"), it[1].find("Decoy"));
  EXPECT_EQ(it[2].rfind("Moderate", 0), 0u);
  EXPECT_EQ(it[3].rfind("Significant", 0), 0u);
  EXPECT_EQ(it[4].rfind("Severe", 0), 0u);
  EXPECT_EQ(it[5].rfind("Overall", 0), 0u);
  EXPECT_THROW(emit_report(report, "xml"), ParameterError);
}

TEST(RSquared, Basics) {
  const std::vector<double> y = {1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(r_squared(y, y), 1.0);
  const std::vector<double> mean = {2.0, 2.0, 2.0};
  EXPECT_DOUBLE_EQ(r_squared(y, mean), 0.0);
  EXPECT_THROW(r_squared(mean, y), ParameterError);
}

}  // namespace
}  // namespace groomrisk
