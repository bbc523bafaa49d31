#include "pfpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>

#include "pfpose/errors.hpp"

namespace pfpose {
namespace {

void require_nonempty(const ObjectModel& model) {
  if (model.points.rows() == 0) throw InvalidArgument("metric on empty model");
}

// Cells keyed by integer coordinates; nearest neighbour expands shell by
// shell until no unvisited cell can hold a closer point.
class PointGrid {
 public:
  PointGrid(const Points& pts, double cell) : pts_(pts), cell_(cell) {
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      cells_[key(coord(pts.row(i).transpose()))].push_back(i);
    }
    lo_ = pts.colwise().minCoeff().transpose();
    hi_ = pts.colwise().maxCoeff().transpose();
  }

  double nearest(const Eigen::Vector3d& q) const {
    const Eigen::Vector3i c = coord(q);
    // Shells beyond this radius cannot contain points.
    const Eigen::Vector3d far = (q - lo_).cwiseAbs().cwiseMax((q - hi_).cwiseAbs());
    const int max_shell = static_cast<int>(std::ceil(far.maxCoeff() / cell_)) + 1;
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= max_shell; ++s) {
      // Points in shell s are at least (s - 1) * cell away.
      if (s >= 1 && (s - 1) * cell_ > best) break;
      for (int dx = -s; dx <= s; ++dx) {
        for (int dy = -s; dy <= s; ++dy) {
          for (int dz = -s; dz <= s; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != s) continue;
            auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
            if (it == cells_.end()) continue;
            for (Eigen::Index i : it->second) {
              best = std::min(best, (pts_.row(i).transpose() - q).norm());
            }
          }
        }
      }
    }
    return best;
  }

 private:
  Eigen::Vector3i coord(const Eigen::Vector3d& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const Eigen::Vector3i& c) {
    auto u = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v) & 0x1FFFFFu); };
    return (u(c.x()) << 42) | (u(c.y()) << 21) | u(c.z());
  }

  const Points& pts_;
  double cell_;
  Eigen::Vector3d lo_, hi_;
  std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> cells_;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double add(const Pose& gt, const Pose& est, const ObjectModel& model) {
  require_nonempty(model);
  const Points a = transform_points(gt, model.points);
  const Points b = transform_points(est, model.points);
  return (a - b).rowwise().norm().mean();
}

double adds(const Pose& gt, const Pose& est, const ObjectModel& model) {
  require_nonempty(model);
  const Points a = transform_points(gt, model.points);
  const Points b = transform_points(est, model.points);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(a.rows());
}

double adds_grid(const Pose& gt, const Pose& est, const ObjectModel& model) {
  require_nonempty(model);
  const Points a = transform_points(gt, model.points);
  const Points b = transform_points(est, model.points);
  // Roughly a few points per occupied cell for surface-like point sets.
  const double cell = std::max(model.diameter / std::cbrt(static_cast<double>(b.rows())), 1e-9);
  const PointGrid grid(b, cell);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += grid.nearest(a.row(i).transpose());
  return total / static_cast<double>(a.rows());
}

double pose_error(const EvalResult& r) {
  if (!r.detected) return std::numeric_limits<double>::infinity();
  return r.model->symmetric ? adds(r.gt, r.est, *r.model) : add(r.gt, r.est, *r.model);
}

double adds_value(const EvalResult& r) {
  if (!r.detected) return std::numeric_limits<double>::infinity();
  return adds(r.gt, r.est, *r.model);
}

double pose_accuracy(const std::vector<EvalResult>& results, double threshold_fraction) {
  if (results.empty()) throw InvalidArgument("pose_accuracy: no results");
  if (!(threshold_fraction > 0.0)) throw InvalidArgument("pose_accuracy: threshold must be > 0");
  std::size_t hits = 0;
  for (const auto& r : results) {
    if (pose_error(r) < threshold_fraction * r.model->diameter) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double adds_auc_from_values(const std::vector<double>& values, double max_threshold) {
  if (values.empty()) throw InvalidArgument("adds_auc: no results");
  if (!(max_threshold > 0.0)) throw InvalidArgument("adds_auc: max_threshold must be > 0");
  // Each value v contributes the interval [v, max_threshold] to the area under
  // the step curve.
  double area = 0.0;
  for (double v : values) {
    if (v < max_threshold) area += (max_threshold - v) / max_threshold;
  }
  return area / static_cast<double>(values.size());
}

double adds_auc(const std::vector<EvalResult>& results, double max_threshold) {
  if (results.empty()) throw InvalidArgument("adds_auc: no results");
  std::vector<double> values;
  values.reserve(results.size());
  for (const auto& r : results) values.push_back(adds_value(r));
  return adds_auc_from_values(values, max_threshold);
}

void MetricReport::recompute_overall() {
  overall = {};
  if (per_object.empty()) return;
  for (const auto& [id, row] : per_object) {
    overall.add_mean += row.add_mean;
    overall.adds_mean += row.adds_mean;
    overall.accuracy += row.accuracy;
    overall.auc += row.auc;
  }
  const auto n = static_cast<double>(per_object.size());
  overall.add_mean /= n;
  overall.adds_mean /= n;
  overall.accuracy /= n;
  overall.auc /= n;
}

MetricReport build_report(const std::map<int, std::vector<EvalResult>>& results,
                          const MetricOptions& options) {
  MetricReport report;
  report.options = options;
  for (const auto& [class_id, rows] : results) {
    if (rows.empty()) continue;
    std::vector<double> add_values, adds_values;
    for (const auto& r : rows) {
      add_values.push_back(r.detected ? add(r.gt, r.est, *r.model)
                                      : std::numeric_limits<double>::infinity());
      adds_values.push_back(adds_value(r));
    }
    MetricRow row;
    row.add_mean = mean_of(add_values);
    row.adds_mean = mean_of(adds_values);
    row.accuracy = pose_accuracy(rows, options.threshold_fraction);
    row.auc = adds_auc_from_values(adds_values, options.auc_max_threshold);
    report.per_object[class_id] = row;
  }
  if (report.per_object.empty()) throw InvalidArgument("build_report: no results");
  report.recompute_overall();
  return report;
}

namespace {

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text_row(std::ostream& out, const std::string& label, const MetricRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %12.6f %12.6f %10.2f %10.2f\n", label.c_str(),
                row.add_mean, row.adds_mean, 100.0 * row.accuracy, 100.0 * row.auc);
  out << buf;
}

}  // namespace

void write_report_text(const MetricReport& report, std::ostream& out) {
  out << "# accuracy: metric < " << fmt(report.options.threshold_fraction, "%g")
      << " x diameter (ADD, ADD-S for symmetric objects)\n"
      << "# auc: ADD-S curve on [0, " << fmt(report.options.auc_max_threshold, "%g") << "] m\n";
  char header[160];
  std::snprintf(header, sizeof header, "%-10s %12s %12s %10s %10s\n", "object", "ADD[m]",
                "ADD-S[m]", "acc[%]", "AUC[%]");
  out << header;
  for (const auto& [id, row] : report.per_object) write_text_row(out, std::to_string(id), row);
  write_text_row(out, "Average", report.overall);
}

void write_report_kv(const MetricReport& report, std::ostream& out) {
  out << "# threshold_fraction " << fmt(report.options.threshold_fraction, "%.17g") << '\n'
      << "# auc_max_threshold " << fmt(report.options.auc_max_threshold, "%.17g") << '\n';
  auto emit = [&out](const std::string& id, const MetricRow& row) {
    out << id << " add " << fmt(row.add_mean, "%.17g") << '\n'
        << id << " adds " << fmt(row.adds_mean, "%.17g") << '\n'
        << id << " accuracy " << fmt(row.accuracy, "%.17g") << '\n'
        << id << " auc " << fmt(row.auc, "%.17g") << '\n';
  };
  for (const auto& [id, row] : report.per_object) emit(std::to_string(id), row);
  emit("overall", report.overall);
}

}  // namespace pfpose
