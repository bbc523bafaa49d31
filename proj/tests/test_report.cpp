#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "pfpose/errors.hpp"
#include "pfpose/report.hpp"

using namespace pfpose;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(PFPOSE_GOLDEN) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MetricReport report(const std::map<int, std::pair<double, double>>& add_acc) {
  MetricReport r;
  for (const auto& [id, v] : add_acc) r.per_object[id] = MetricRow{v.first, v.first, v.second, v.second};
  r.recompute_overall();
  return r;
}

std::vector<MetricReport> three_reports() {
  return {report({{1, {0.0052, 0.95}}, {2, {0.0100, 0.90}}}),
          report({{1, {0.0062, 0.80}}, {2, {0.0100, 0.90}}}),
          report({{1, {0.0049, 0.95}}, {2, {0.0123, 0.70}}})};
}

const std::vector<std::string> kLabels{"full", "ablation1", "ablation2"};

MetricReport single(double accuracy_percent) {
  return report({{1, {0.0, accuracy_percent / 100.0}}});
}

}  // namespace

TEST(Table, MatchesGoldenText) {
  EXPECT_EQ(render_table(three_reports(), kLabels, TableMetric::accuracy), slurp("accuracy_table.txt"));
  EXPECT_EQ(render_table(three_reports(), kLabels, TableMetric::add), slurp("add_table.txt"));
}

TEST(Table, FlagsEveryTiedBest) {
  const auto t = build_table(three_reports(), kLabels, TableMetric::accuracy);
  ASSERT_EQ(t.rows, (std::vector<std::string>{"1", "2", "Average"}));
  EXPECT_EQ(t.best[0], (std::vector<bool>{true, false, true}));
  EXPECT_EQ(t.best[1], (std::vector<bool>{true, true, false}));
  EXPECT_EQ(t.best[2], (std::vector<bool>{true, false, false}));
  const auto a = build_table(three_reports(), kLabels, TableMetric::add);
  EXPECT_EQ(a.best[0], (std::vector<bool>{false, false, true}));
  EXPECT_EQ(a.best[1], (std::vector<bool>{true, true, false}));
}

TEST(Table, CsvKeepsFullPrecision) {
  const auto csv = render_table_csv(three_reports(), kLabels, TableMetric::add);
  std::istringstream in(csv);
  std::string header, row1;
  std::getline(in, header);
  std::getline(in, row1);
  EXPECT_EQ(header, "object,full,ablation1,ablation2,full_best,ablation1_best,ablation2_best");
  std::istringstream cells(row1);
  std::string cell;
  std::vector<std::string> parts;
  while (std::getline(cells, cell, ',')) parts.push_back(cell);
  ASSERT_EQ(parts.size(), 7u);
  EXPECT_EQ(std::stod(parts[1]), 0.0052);
  EXPECT_EQ(std::stod(parts[3]), 0.0049);
  EXPECT_EQ(parts[6], "1");
}

TEST(Table, RejectsMisalignedInput) {
  auto reports = three_reports();
  reports[1] = report({{1, {0.1, 0.5}}, {3, {0.1, 0.5}}});
  EXPECT_THROW(build_table(reports, kLabels, TableMetric::accuracy), AlignmentError);
  reports[1] = report({{1, {0.1, 0.5}}});
  EXPECT_THROW(render_table(reports, kLabels, TableMetric::accuracy), AlignmentError);
  EXPECT_THROW(build_table(three_reports(), {"full"}, TableMetric::accuracy), InvalidArgument);
}

TEST(Labels, RoundTrip) {
  for (auto a : {Ablation::none, Ablation::no_pyramid_backbone, Ablation::shallow_fusion, Ablation::no_pyramid_fusion}) {
    EXPECT_EQ(ablation_for_label(ablation_label(a)), a);
  }
  EXPECT_THROW(ablation_for_label("ablation9"), InvalidArgument);
  EXPECT_EQ(table_metric_from_string("adds"), TableMetric::adds);
  EXPECT_THROW(table_metric_from_string("f1"), InvalidArgument);
}

TEST(Ablation, PublishedAveragesGiveExpectedDeltas) {
  const std::vector<AblationRun> runs{{"full", single(92.4), ""},
                                      {"ablation1", single(78.1), ""},
                                      {"ablation2", single(82.4), ""},
                                      {"ablation3", single(79.0), ""}};
  const auto cmp = compare_ablations(runs);
  ASSERT_EQ(cmp.deltas.size(), 3u);
  const double expected[] = {-14.3, -10.0, -13.4};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(cmp.deltas[i].average * 100.0, expected[i], 1e-9);
  }
  EXPECT_NE(cmp.text.find("-14.3"), std::string::npos);
  EXPECT_NE(cmp.text.find("-10.0"), std::string::npos);
  EXPECT_NE(cmp.text.find("-13.4"), std::string::npos);
  EXPECT_EQ(cmp.baseline, "full");
}

TEST(Ablation, DeltasAreAntisymmetric) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = report({{1, {u(rng), u(rng)}}, {4, {u(rng), u(rng)}}});
    const auto b = report({{1, {u(rng), u(rng)}}, {4, {u(rng), u(rng)}}});
    for (auto m : {TableMetric::add, TableMetric::accuracy}) {
      const auto ab = compare_ablations({{"full", a, ""}, {"ablation2", b, ""}}, m, "full");
      const auto ba = compare_ablations({{"full", b, ""}, {"ablation2", a, ""}}, m, "full");
      EXPECT_EQ(ab.deltas[0].average, -ba.deltas[0].average);
      for (int id : {1, 4}) EXPECT_EQ(ab.deltas[0].per_object.at(id), -ba.deltas[0].per_object.at(id));
    }
  }
}

TEST(Ablation, ZeroDeltaPrintsWithoutSign) {
  const auto r = single(50.0);
  const auto cmp = compare_ablations({{"full", r, ""}, {"ablation3", r, ""}});
  EXPECT_EQ(cmp.text.find("-0.0"), std::string::npos);
  EXPECT_NE(cmp.text.find("+0.0"), std::string::npos);
}

TEST(Ablation, RejectsBadRunSets) {
  const auto r = single(50.0);
  EXPECT_THROW(compare_ablations({{"full", r, ""}}), InvalidArgument);
  EXPECT_THROW(compare_ablations({{"ablation1", r, ""}, {"ablation2", r, ""}}), InvalidArgument);
  EXPECT_THROW(compare_ablations({{"full", r, ""}, {"full", r, ""}}), InvalidArgument);
  EXPECT_THROW(compare_ablations({{"full", r, ""}, {"mystery", r, ""}}), InvalidArgument);
  const auto other = report({{2, {0.0, 0.5}}});
  EXPECT_THROW(compare_ablations({{"full", r, ""}, {"ablation1", other, ""}}), AlignmentError);
}
