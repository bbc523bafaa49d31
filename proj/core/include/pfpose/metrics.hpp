#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "pfpose/geometry.hpp"

namespace pfpose {

// Mean distance between index-matched model points under the two poses.
double add(const Pose& gt, const Pose& est, const ObjectModel& model);

// Mean distance from every ground-truth-posed point to its closest
// estimate-posed point. Exact O(m^2) search.
double adds(const Pose& gt, const Pose& est, const ObjectModel& model);

// Same quantity as adds() with a uniform-grid nearest neighbour search.
double adds_grid(const Pose& gt, const Pose& est, const ObjectModel& model);

// One evaluated object instance. `detected == false` marks an object the
// pipeline failed to find; its metric is +inf and it always counts as a miss.
struct EvalResult {
  Pose gt;
  Pose est;
  std::shared_ptr<const ObjectModel> model;
  bool detected = true;
};

// ADD-S for symmetric models, ADD otherwise.
double pose_error(const EvalResult& r);
double adds_value(const EvalResult& r);

struct MetricOptions {
  double threshold_fraction = 0.10;  // of model diameter, strict <
  double auc_max_threshold = 0.10;   // meters
};

// Fraction of results whose pose_error is strictly below
// threshold_fraction * diameter.
double pose_accuracy(const std::vector<EvalResult>& results, double threshold_fraction);

// Normalized area under the ADD-S accuracy curve on [0, max_threshold]. The
// curve acc(tau) = #{adds <= tau} / n is a right-continuous step function, so
// the area is exactly mean(max(0, 1 - adds / max_threshold)).
double adds_auc(const std::vector<EvalResult>& results, double max_threshold);
double adds_auc_from_values(const std::vector<double>& adds_values, double max_threshold);

struct MetricRow {
  double add_mean = 0.0;
  double adds_mean = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;

  bool operator==(const MetricRow&) const = default;
};

struct MetricReport {
  std::map<int, MetricRow> per_object;  // ordered by class id
  MetricRow overall;                    // unweighted mean of per_object rows
  MetricOptions options;

  // Recomputes `overall` from per_object.
  void recompute_overall();
};

MetricReport build_report(const std::map<int, std::vector<EvalResult>>& results,
                          const MetricOptions& options = {});

// Plain-text table, one row per class plus an average row.
void write_report_text(const MetricReport& report, std::ostream& out);

// One metric per line: "<class_id> <metric> <value>", the average row using
// class id "overall". Lines starting with '#' carry the thresholds used.
void write_report_kv(const MetricReport& report, std::ostream& out);

}  // namespace pfpose
