#include "pfpose/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "pfpose/errors.hpp"

namespace pfpose {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, trim(item)));
  return out;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// "2:1,3:0" -> {2: true, 3: false}
std::map<int, bool> parse_symmetry(const std::string& key, const std::string& v) {
  std::map<int, bool> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ParseError("config: '" + key + "' entries are id:0|1");
    out[parse_int<int>(key, trim(item.substr(0, colon)))] = parse_bool(key, trim(item.substr(colon + 1)));
  }
  return out;
}

std::string fmt_symmetry(const std::map<int, bool>& m) {
  if (m.empty()) return "none";
  std::string s;
  for (const auto& [id, sym] : m) s += (s.empty() ? "" : ",") + std::to_string(id) + ":" + (sym ? "1" : "0");
  return s;
}

struct Field {
  const char* key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define PF_DOUBLE(KEY, MEMBER)                                                          \
  Field {                                                                               \
    KEY, [](PipelineConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); }, \
        [](const PipelineConfig& c) { return fmt_double(c.MEMBER); }                    \
  }
#define PF_INT(KEY, MEMBER)                                                                             \
  Field {                                                                                               \
    KEY, [](PipelineConfig& c, const std::string& v) { c.MEMBER = parse_int<decltype(c.MEMBER)>(KEY, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.MEMBER); }                               \
  }
#define PF_BOOL(KEY, MEMBER)                                                          \
  Field {                                                                             \
    KEY, [](PipelineConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); }, \
        [](const PipelineConfig& c) { return std::string(c.MEMBER ? "true" : "false"); } \
  }
#define PF_INTS(KEY, MEMBER)                                                              \
  Field {                                                                                 \
    KEY, [](PipelineConfig& c, const std::string& v) { c.MEMBER = parse_int_list(KEY, v); }, \
        [](const PipelineConfig& c) { return fmt_int_list(c.MEMBER); }                    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      PF_DOUBLE("network.width_multiplier", network.backbone_width_multiplier),
      PF_INTS("network.backbone_blocks", network.backbone_blocks),
      PF_INT("network.upscale_channels", network.upscale_channels),
      PF_INT("network.fusion_channels", network.fusion_channels),
      PF_INT("network.fusion_levels", network.fusion_levels),
      PF_INTS("network.point_feature_dims", network.point_feature_dims),
      PF_INTS("network.head_hidden_dims", network.head_hidden_dims),
      PF_INT("network.seg_channels", network.seg_channels),
      Field{"network.ablation",
            [](PipelineConfig& c, const std::string& v) {
              try {
                c.network.ablation = ablation_from_string(v);
              } catch (const InvalidArgument& e) {
                throw ParseError(std::string("config: ") + e.what());
              }
            },
            [](const PipelineConfig& c) { return to_string(c.network.ablation); }},
      PF_INT("network.num_classes", network.num_classes),
      PF_INT("network.crop_size", network.crop_size),
      PF_INT("network.refine_iterations", network.refine_iterations),
      PF_DOUBLE("network.point_input_scale", network.point_input_scale),
      PF_INT("loss.num_points", loss.num_points),
      Field{"loss.symmetric",
            [](PipelineConfig& c, const std::string& v) {
              c.loss.symmetric_variant = parse_symmetry("loss.symmetric", v);
            },
            [](const PipelineConfig& c) { return fmt_symmetry(c.loss.symmetric_variant); }},
      PF_DOUBLE("loss.seg_weight", loss.seg_weight),
      PF_DOUBLE("loss.pose_weight", loss.pose_weight),
      PF_INT("loss.seed", loss.seed),
      PF_INT("train.epochs", train.epochs),
      PF_DOUBLE("train.learning_rate", train.learning_rate),
      Field{"train.optimizer", [](PipelineConfig& c, const std::string& v) { c.train.optimizer = v; },
            [](const PipelineConfig& c) { return c.train.optimizer; }},
      PF_DOUBLE("train.weight_decay", train.weight_decay),
      PF_INT("train.checkpoint_every", train.checkpoint_every),
      PF_BOOL("train.staged_refinement", train.staged_refinement),
      PF_INT("train.refine_start_epoch", train.refine_start_epoch),
      PF_INT("train.seed", train.seed),
      PF_INT("train.threads", train.threads),
      PF_INT("train.min_mask_pixels", train.min_mask_pixels),
      PF_INT("warmup.window", warmup.window),
      PF_DOUBLE("warmup.rel_delta", warmup.rel_delta),
      PF_DOUBLE("warmup.abs_ceiling", warmup.abs_ceiling),
      PF_DOUBLE("metrics.threshold_fraction", metrics.threshold_fraction),
      PF_DOUBLE("metrics.auc_max_threshold", metrics.auc_max_threshold),
  };
  return table;
}

}  // namespace

void WarmupPolicy::validate() const {
  if (window < 2) throw InvalidArgument("warmup: window must be >= 2");
  if (!(rel_delta > 0.0)) throw InvalidArgument("warmup: rel_delta must be > 0");
  if (std::isnan(abs_ceiling)) throw InvalidArgument("warmup: abs_ceiling is required");
}

void TrainSettings::validate() const {
  if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning_rate must be > 0");
  if (optimizer != "adam" && optimizer != "adamw") throw InvalidArgument("train: optimizer must be adam or adamw");
  if (weight_decay < 0.0) throw InvalidArgument("train: weight_decay must be >= 0");
  if (checkpoint_every < 0) throw InvalidArgument("train: checkpoint_every must be >= 0");
  if (refine_start_epoch < 0) throw InvalidArgument("train: refine_start_epoch must be >= 0");
  if (threads < 1) throw InvalidArgument("train: threads must be >= 1");
  if (min_mask_pixels < 1) throw InvalidArgument("train: min_mask_pixels must be >= 1");
}

void PipelineConfig::validate() const {
  network.validate();
  loss.validate();
  train.validate();
  warmup.validate();
  if (!(metrics.threshold_fraction > 0.0) || !(metrics.auc_max_threshold > 0.0)) {
    throw InvalidArgument("metrics: thresholds must be > 0");
  }
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError("config: duplicate key '" + key + "'");
    bool found = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        f.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("config not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

}  // namespace pfpose
