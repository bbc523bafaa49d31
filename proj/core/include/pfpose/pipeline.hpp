#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pfpose/config.hpp"
#include "pfpose/data.hpp"
#include "pfpose/metrics.hpp"
#include "pfpose/network.hpp"

namespace pfpose {

enum class MaskSource { ground_truth, predicted };
std::string to_string(MaskSource s);

// Windowed-mean stabilization detector over the segmentation validation loss.
// After each epoch's loss is observed, mean_now averages the last `window`
// values and mean_prev the window ending one epoch earlier (shorter at the
// start of the trace). It fires once, the first time
// |mean_now - mean_prev| / mean_prev < rel_delta and mean_now < abs_ceiling.
class WarmupDetector {
 public:
  explicit WarmupDetector(WarmupPolicy policy);

  // Returns true only on the epoch the detector fires.
  bool observe(double val_loss);
  bool fired() const { return fired_at_.has_value(); }
  std::optional<int> fired_at() const { return fired_at_; }  // 1-based epoch
  const std::vector<double>& history() const { return history_; }

 private:
  WarmupPolicy policy_;
  std::vector<double> history_;
  std::optional<int> fired_at_;
};

class TrainState {
 public:
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
  std::vector<double> seg_loss;
  std::vector<double> pose_loss;
  std::vector<double> refine_loss;
  std::vector<double> val_seg_loss;
  std::vector<std::filesystem::path> checkpoints;

  MaskSource mask_source() const { return mask_source_; }
  std::optional<int> switch_epoch() const { return switch_epoch_; }
  // ground_truth -> predicted once; anything else throws StateError.
  void switch_to_predicted(int at_epoch);

 private:
  MaskSource mask_source_ = MaskSource::ground_truth;
  std::optional<int> switch_epoch_;
};

struct EpochRecord {
  int epoch = 0;
  double seg_loss = 0.0;
  double pose_loss = 0.0;    // initial estimate
  double refine_loss = 0.0;  // mean over refinement passes, 0 when none ran
  double val_seg_loss = 0.0;
  MaskSource mask_source = MaskSource::ground_truth;  // used during this epoch
  bool switched = false;                              // detector fired after this epoch
  int objects = 0;                                    // object crops trained on
  int skipped = 0;                                    // objects dropped for empty or tiny masks
};
std::string to_json(const EpochRecord& r);

struct TrainOptions {
  std::filesystem::path out_dir;  // checkpoints and train_log.jsonl; empty = no files
  // Replaces the measured validation loss fed to the warmup detector.
  std::function<double(int epoch, double measured)> val_loss_override;
  std::function<void(const EpochRecord&)> on_epoch;
  // Forces a non-finite loss in this epoch; used to exercise divergence handling.
  std::optional<int> fault_epoch;
};

struct TrainResult {
  PoseNetwork network{nullptr};
  TrainState state;
  std::vector<EpochRecord> log;
  std::filesystem::path checkpoint;  // final checkpoint, empty without out_dir
};

// Trains every block jointly on `train_set`; `val_set` drives the warmup
// detector (the training set is used when it is empty). Throws
// DivergenceError carrying the last checkpoint written before the failure.
TrainResult train(const PipelineConfig& cfg, const std::vector<SceneSample>& train_set,
                  const std::vector<SceneSample>& val_set, const ModelSet& models,
                  const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::int64_t kCheckpointVersion = 1;

struct Checkpoint {
  PipelineConfig config;
  PoseNetwork network{nullptr};
  std::int64_t step = 0;
  int epoch = 0;
  std::string optimizer;
};

void save_checkpoint(const std::filesystem::path& path, PoseNetwork& net, const PipelineConfig& cfg,
                     std::int64_t step, int epoch);
// Throws VersionError for a missing or unknown version or parameters that do
// not match the stored config, MissingFile if absent.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Inference and evaluation

struct StageTimings {
  double segmentation = 0.0;  // seconds
  double pose = 0.0;
  double refinement = 0.0;
  double overall = 0.0;
};

struct InferResult {
  std::vector<PoseEstimate> estimates;  // ordered by class id
  StageTimings timings;
};

// Predicted-mask inference on one frame. Classes whose cleaned mask has fewer
// than min_mask_pixels pixels, or no valid depth, are not reported.
InferResult infer(PoseNetwork& net, const PipelineConfig& cfg, const RgbImage& rgb, const DepthImage& depth,
                  const CameraIntrinsics& intrinsics, int refine_iterations);

// Throws InvalidArgument on an empty dataset and VersionError if the dataset
// holds classes the network was not configured for.
MetricReport evaluate(PoseNetwork& net, const PipelineConfig& cfg, const std::vector<SceneSample>& samples,
                      const ModelSet& models);
MetricReport evaluate(const std::filesystem::path& checkpoint, const SampleSource& dataset);

}  // namespace pfpose
