#include "pfpose/report.hpp"

#include <cstdio>
#include <set>

#include "pfpose/errors.hpp"

namespace pfpose {
namespace {

double pick(const MetricRow& row, TableMetric m) {
  switch (m) {
    case TableMetric::add: return row.add_mean;
    case TableMetric::adds: return row.adds_mean;
    case TableMetric::accuracy: return row.accuracy;
    case TableMetric::auc: return row.auc;
  }
  return 0.0;
}

// Display scale and unit: meters -> mm, fractions -> percent.
double display_scale(TableMetric m) { return higher_is_better(m) ? 100.0 : 1000.0; }

const char* display_unit(TableMetric m) { return higher_is_better(m) ? "%" : "mm"; }

std::string format(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

void check_aligned(const std::vector<const MetricReport*>& reports) {
  for (const auto* r : reports) {
    if (r->per_object.size() != reports.front()->per_object.size()) {
      throw AlignmentError("reports cover different object sets");
    }
    auto a = r->per_object.begin();
    for (auto b = reports.front()->per_object.begin(); b != reports.front()->per_object.end(); ++a, ++b) {
      if (a->first != b->first) throw AlignmentError("reports cover different object sets");
    }
  }
}

}  // namespace

std::string to_string(TableMetric m) {
  switch (m) {
    case TableMetric::add: return "add";
    case TableMetric::adds: return "adds";
    case TableMetric::accuracy: return "accuracy";
    case TableMetric::auc: return "auc";
  }
  return "accuracy";
}

TableMetric table_metric_from_string(const std::string& s) {
  for (auto m : {TableMetric::add, TableMetric::adds, TableMetric::accuracy, TableMetric::auc}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown metric '" + s + "'");
}

bool higher_is_better(TableMetric m) { return m == TableMetric::accuracy || m == TableMetric::auc; }

MetricTable build_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& labels,
                        TableMetric metric) {
  if (reports.empty()) throw InvalidArgument("render_table: no reports");
  if (reports.size() != labels.size()) throw InvalidArgument("render_table: one label per report");
  std::vector<const MetricReport*> ptrs;
  for (const auto& r : reports) ptrs.push_back(&r);
  check_aligned(ptrs);

  MetricTable t;
  t.metric = metric;
  t.labels = labels;
  auto add_row = [&](const std::string& name, auto&& get) {
    std::vector<double> vals;
    for (const auto& r : reports) vals.push_back(pick(get(r), metric));
    double best = vals.front();
    for (double v : vals) best = higher_is_better(metric) ? std::max(best, v) : std::min(best, v);
    std::vector<bool> flags;
    for (double v : vals) flags.push_back(v == best);
    t.rows.push_back(name);
    t.values.push_back(std::move(vals));
    t.best.push_back(std::move(flags));
  };
  for (const auto& [id, row] : reports.front().per_object) {
    const int key = id;
    add_row(std::to_string(id), [key](const MetricReport& r) -> const MetricRow& { return r.per_object.at(key); });
  }
  add_row("Average", [](const MetricReport& r) -> const MetricRow& { return r.overall; });
  return t;
}

std::string render_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& labels,
                         TableMetric metric) {
  const auto t = build_table(reports, labels, metric);
  const double scale = display_scale(metric);
  std::size_t width = 10;
  for (const auto& l : labels) width = std::max(width, l.size() + 2);

  std::string out = "# " + to_string(metric) + " [" + display_unit(metric) + "], * marks the best value in a row (" +
                    (higher_is_better(metric) ? "highest" : "lowest") + ")\n";
  out += pad_right("object", 10);
  for (const auto& l : labels) out += pad_left(l, width + 1);
  out += "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out += pad_right(t.rows[r], 10);
    for (std::size_t c = 0; c < labels.size(); ++c) {
      out += pad_left(format("%.2f", t.values[r][c] * scale) + (t.best[r][c] ? "*" : " "), width + 1);
    }
    out += "\n";
  }
  return out;
}

std::string render_table_csv(const std::vector<MetricReport>& reports, const std::vector<std::string>& labels,
                             TableMetric metric) {
  const auto t = build_table(reports, labels, metric);
  std::string out = "object";
  for (const auto& l : labels) out += "," + l;
  for (const auto& l : labels) out += "," + l + "_best";
  out += "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out += t.rows[r];
    for (double v : t.values[r]) out += "," + format("%.17g", v);
    for (bool b : t.best[r]) out += b ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string ablation_label(Ablation a) {
  switch (a) {
    case Ablation::none: return "full";
    case Ablation::no_pyramid_backbone: return "ablation1";
    case Ablation::shallow_fusion: return "ablation2";
    case Ablation::no_pyramid_fusion: return "ablation3";
  }
  return "full";
}

Ablation ablation_for_label(const std::string& label) {
  for (auto a : {Ablation::none, Ablation::no_pyramid_backbone, Ablation::shallow_fusion,
                 Ablation::no_pyramid_fusion}) {
    if (ablation_label(a) == label) return a;
  }
  throw InvalidArgument("unknown ablation label '" + label + "'");
}

AblationComparison compare_ablations(const std::vector<AblationRun>& runs, TableMetric metric,
                                     const std::string& baseline) {
  if (runs.size() < 2) throw InvalidArgument("compare_ablations: need at least two runs");
  std::set<std::string> seen;
  const AblationRun* base = nullptr;
  std::vector<const MetricReport*> reports;
  for (const auto& r : runs) {
    ablation_for_label(r.label);
    if (!seen.insert(r.label).second) throw InvalidArgument("compare_ablations: duplicate label " + r.label);
    if (r.label == baseline) base = &r;
    reports.push_back(&r.report);
  }
  if (!base) throw InvalidArgument("compare_ablations: no '" + baseline + "' run");
  check_aligned(reports);

  AblationComparison cmp;
  cmp.metric = metric;
  cmp.baseline = baseline;
  for (const auto& r : runs) {
    if (&r == base) continue;
    AblationDelta d;
    d.label = r.label;
    for (const auto& [id, row] : r.report.per_object) {
      d.per_object[id] = pick(row, metric) - pick(base->report.per_object.at(id), metric);
    }
    d.average = pick(r.report.overall, metric) - pick(base->report.overall, metric);
    cmp.deltas.push_back(std::move(d));
  }

  const double scale = display_scale(metric);
  const char* spec = higher_is_better(metric) ? "%+.1f" : "%+.2f";
  cmp.text = "# " + to_string(metric) + " change vs " + baseline + " [" + display_unit(metric) +
             (higher_is_better(metric) ? " points" : "") + "]\n";
  cmp.text += pad_right("object", 10);
  for (const auto& d : cmp.deltas) cmp.text += pad_left(d.label, 12);
  cmp.text += "\n";
  cmp.csv = "object";
  for (const auto& d : cmp.deltas) cmp.csv += "," + d.label;
  cmp.csv += "\n";
  auto emit = [&](const std::string& name, auto&& get) {
    cmp.text += pad_right(name, 10);
    cmp.csv += name;
    for (const auto& d : cmp.deltas) {
      const double v = get(d);
      // Avoid "-0.0" for deltas that round to zero.
      std::string s = format(spec, v * scale);
      if (s == format(spec, -0.0)) s = format(spec, 0.0);
      cmp.text += pad_left(s, 12);
      cmp.csv += "," + format("%.17g", v);
    }
    cmp.text += "\n";
    cmp.csv += "\n";
  };
  for (const auto& [id, row] : base->report.per_object) {
    const int key = id;
    emit(std::to_string(id), [key](const AblationDelta& d) { return d.per_object.at(key); });
  }
  emit("Average", [](const AblationDelta& d) { return d.average; });
  return cmp;
}

}  // namespace pfpose
