#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>

#include "pfpose/losses.hpp"
#include "pfpose/metrics.hpp"
#include "pfpose/network.hpp"

namespace pfpose {

// Segmentation validation-loss detector settings. abs_ceiling has no default
// and must be given explicitly.
struct WarmupPolicy {
  int window = 5;
  double rel_delta = 0.05;
  double abs_ceiling = std::numeric_limits<double>::quiet_NaN();

  void validate() const;
};

struct TrainSettings {
  int epochs = 200;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // adam | adamw
  double weight_decay = 0.0;
  int checkpoint_every = 0;        // epochs; 0 keeps only the final checkpoint
  bool staged_refinement = false;  // refiner loss off before refine_start_epoch
  int refine_start_epoch = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  int min_mask_pixels = 20;  // smaller cleaned masks are treated as not detected

  void validate() const;
};

struct PipelineConfig {
  NetworkConfig network;
  LossConfig loss;
  TrainSettings train;
  WarmupPolicy warmup;
  MetricOptions metrics;

  void validate() const;

  // Flat "key = value" text, '#' starts a comment. Unknown keys and malformed
  // values throw ParseError; the result is validated.
  static PipelineConfig parse(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
  // Every key with its value, one per line, in a fixed order.
  std::string to_text() const;
};

}  // namespace pfpose
