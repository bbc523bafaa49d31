#pragma once

#include <map>
#include <string>
#include <vector>

#include "pfpose/metrics.hpp"
#include "pfpose/network.hpp"

namespace pfpose {

enum class TableMetric { add, adds, accuracy, auc };
std::string to_string(TableMetric m);
TableMetric table_metric_from_string(const std::string& s);
bool higher_is_better(TableMetric m);

// Rows are objects in class-id order followed by "Average"; columns follow
// the report order. Every value equal to the row's best is flagged.
struct MetricTable {
  TableMetric metric = TableMetric::accuracy;
  std::vector<std::string> labels;
  std::vector<std::string> rows;
  std::vector<std::vector<double>> values;  // [row][report]
  std::vector<std::vector<bool>> best;
};

// Throws AlignmentError if the reports cover different class sets and
// InvalidArgument if labels and reports differ in count.
MetricTable build_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& labels,
                        TableMetric metric);

// Fixed-width text; best values carry a trailing '*'. ADD/ADD-S print in
// millimeters, accuracy and AUC in percent.
std::string render_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& labels,
                         TableMetric metric);
// Comma-separated: header "object,<labels...>", full-precision values, and a
// trailing best-flag column per report.
std::string render_table_csv(const std::vector<MetricReport>& reports, const std::vector<std::string>& labels,
                             TableMetric metric);

// ---------------------------------------------------------------------------

// Labels: full, ablation1 (no pyramid backbone), ablation2 (shallow fusion),
// ablation3 (no pyramid fusion).
std::string ablation_label(Ablation a);
Ablation ablation_for_label(const std::string& label);

struct AblationRun {
  std::string label;
  MetricReport report;
  std::string config_echo;
};

struct AblationDelta {
  std::string label;
  std::map<int, double> per_object;  // run - baseline, native units
  double average = 0.0;
};

struct AblationComparison {
  TableMetric metric = TableMetric::accuracy;
  std::string baseline;
  std::vector<AblationDelta> deltas;  // every run but the baseline, input order
  std::string text;
  std::string csv;
};

// Throws InvalidArgument with fewer than two runs, a missing baseline,
// unknown or duplicate labels, and AlignmentError on class-set mismatch.
AblationComparison compare_ablations(const std::vector<AblationRun>& runs,
                                     TableMetric metric = TableMetric::accuracy,
                                     const std::string& baseline = "full");

}  // namespace pfpose
