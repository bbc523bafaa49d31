#include "pfpose/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "pfpose/errors.hpp"
#include "pfpose/losses.hpp"
#include "pfpose/maskops.hpp"
#include "pfpose/preprocess.hpp"

namespace F = torch::nn::functional;

namespace pfpose {

std::string to_string(MaskSource s) { return s == MaskSource::ground_truth ? "ground_truth" : "predicted"; }

WarmupDetector::WarmupDetector(WarmupPolicy policy) : policy_(policy) { policy_.validate(); }

bool WarmupDetector::observe(double val_loss) {
  history_.push_back(val_loss);
  const auto e = history_.size();
  const auto w = static_cast<std::size_t>(policy_.window);
  if (fired_at_ || e < w) return false;

  const double mean_now = std::accumulate(history_.end() - static_cast<std::ptrdiff_t>(w), history_.end(), 0.0) /
                          static_cast<double>(w);
  const auto prev_end = e - 1;
  const auto prev_begin = prev_end >= w ? prev_end - w : 0;
  const double mean_prev =
      std::accumulate(history_.begin() + static_cast<std::ptrdiff_t>(prev_begin),
                      history_.begin() + static_cast<std::ptrdiff_t>(prev_end), 0.0) /
      static_cast<double>(prev_end - prev_begin);

  double rel;
  if (mean_prev == 0.0) {
    rel = mean_now == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    rel = std::abs(mean_now - mean_prev) / mean_prev;
  }
  if (rel < policy_.rel_delta && mean_now < policy_.abs_ceiling) {
    fired_at_ = static_cast<int>(e);
    return true;
  }
  return false;
}

void TrainState::switch_to_predicted(int at_epoch) {
  if (mask_source_ != MaskSource::ground_truth) throw StateError("mask source already switched to predicted");
  mask_source_ = MaskSource::predicted;
  switch_epoch_ = at_epoch;
}

std::string to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["seg_loss"] = r.seg_loss;
  j["pose_loss"] = r.pose_loss;
  j["refine_loss"] = r.refine_loss;
  j["val_seg_loss"] = r.val_seg_loss;
  j["mask_source"] = to_string(r.mask_source);
  j["switched"] = r.switched;
  j["objects"] = r.objects;
  j["skipped"] = r.skipped;
  return j.dump();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration<double>(t1 - t0).count();
}

torch::Tensor label_tensor(const LabelImage& labels) {
  return torch::from_blob(const_cast<std::uint8_t*>(labels.data().data()), {1, labels.rows(), labels.cols()},
                          torch::kUInt8)
      .to(torch::kInt64);
}

LabelImage argmax_labels(const torch::Tensor& logits) {
  auto idx = logits.argmax(1)[0].to(torch::kUInt8).contiguous();
  LabelImage out(static_cast<int>(idx.size(0)), static_cast<int>(idx.size(1)));
  std::memcpy(out.data().data(), idx.data_ptr<std::uint8_t>(), out.data().size());
  return out;
}

torch::Tensor to_tensor(const Points& pts) {
  return torch::from_blob(const_cast<double*>(pts.data()), {pts.rows(), 3}, torch::kFloat64).to(torch::kFloat32);
}

void check_classes(const std::vector<SceneSample>& samples, const ModelSet& models, int num_classes) {
  for (const auto& s : samples) {
    for (const auto& gt : s.gt) {
      if (gt.class_id < 1 || gt.class_id >= num_classes) {
        throw VersionError("sample " + s.id + ": class " + std::to_string(gt.class_id) +
                           " is outside the configured " + std::to_string(num_classes) + " classes");
      }
      if (!models.count(gt.class_id)) {
        throw InvalidArgument("sample " + s.id + ": no model for class " + std::to_string(gt.class_id));
      }
    }
    for (auto v : s.mask.data()) {
      if (v >= num_classes) throw InvalidLabel("sample " + s.id + ": mask label " + std::to_string(v));
    }
  }
}

struct StepLosses {
  torch::Tensor seg;
  torch::Tensor pose;
  torch::Tensor refine;
  int objects = 0;
  int skipped = 0;
  int passes = 0;
};

StepLosses forward_sample(PoseNetwork& net, const PipelineConfig& cfg, const SceneSample& sample,
                          const ModelSet& models, MaskSource source, std::int64_t step, int refine_iterations) {
  StepLosses out;
  auto logits = net->segment(frame_tensor(sample.rgb));
  out.seg = F::cross_entropy(logits, label_tensor(sample.mask));
  out.pose = torch::zeros({});
  out.refine = torch::zeros({});

  LabelImage predicted;
  if (source == MaskSource::predicted) predicted = argmax_labels(logits.detach());
  const LabelImage& mask_labels = source == MaskSource::predicted ? predicted : sample.mask;

  std::vector<PreparedCrop> crops;
  std::vector<const GroundTruth*> objects;
  for (const auto& gt : sample.gt) {
    auto mask = clean_mask(mask_for_label(mask_labels, static_cast<std::uint8_t>(gt.class_id)));
    if (count_nonzero(mask) < static_cast<std::size_t>(cfg.train.min_mask_pixels)) continue;
    auto crop = masked_crop(sample.rgb, sample.depth, mask, gt.class_id);
    try {
      crops.push_back(prepare_crop(crop, sample.intrinsics, cfg.network.crop_size));
    } catch (const EmptyCloud&) {
      continue;
    }
    objects.push_back(&gt);
  }
  if (crops.empty()) {
    out.skipped = static_cast<int>(sample.gt.size());
    return out;
  }

  auto batch = make_object_batch(crops);
  auto result = net->forward(batch, refine_iterations);
  std::vector<torch::Tensor> pose_terms, refine_terms;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& gt = *objects[i];
    const auto& model = *models.at(gt.class_id);
    const bool sym = cfg.loss.use_symmetric(model);
    auto pts = to_tensor(sample_model_points(model, cfg.loss.num_points,
                                             derive_seed(cfg.loss.seed, static_cast<std::uint64_t>(step), i)));
    const Eigen::Matrix3d r = gt.pose.rotation;
    auto gt_r = torch::from_blob(const_cast<double*>(r.data()), {3, 3}, torch::kFloat64).t().to(torch::kFloat32);
    auto gt_t = torch::tensor({gt.pose.translation.x(), gt.pose.translation.y(), gt.pose.translation.z()},
                              torch::kFloat64)
                    .to(torch::kFloat32);
    const auto row = static_cast<std::int64_t>(i);
    pose_terms.push_back(pose_loss_tensor(gt_r, gt_t, result.initial.quaternion[row],
                                          result.initial.translation[row], pts, sym));
    for (const auto& refined : result.refined) {
      refine_terms.push_back(
          pose_loss_tensor(gt_r, gt_t, refined.quaternion[row], refined.translation[row], pts, sym));
    }
  }
  out.objects = static_cast<int>(objects.size());
  out.skipped = static_cast<int>(sample.gt.size() - objects.size());
  out.passes = static_cast<int>(result.refined.size());
  out.pose = torch::stack(pose_terms).mean();
  if (!refine_terms.empty()) out.refine = torch::stack(refine_terms).mean();
  return out;
}

double validation_seg_loss(PoseNetwork& net, const std::vector<SceneSample>& samples) {
  torch::NoGradGuard guard;
  net->eval();
  double sum = 0.0;
  for (const auto& s : samples) {
    sum += F::cross_entropy(net->segment(frame_tensor(s.rgb)), label_tensor(s.mask)).item<double>();
  }
  net->train();
  return sum / static_cast<double>(samples.size());
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(PoseNetwork& net, const TrainSettings& t) {
  if (t.optimizer == "adamw") {
    return std::make_unique<torch::optim::AdamW>(
        net->parameters(), torch::optim::AdamWOptions(t.learning_rate).weight_decay(t.weight_decay));
  }
  return std::make_unique<torch::optim::Adam>(
      net->parameters(), torch::optim::AdamOptions(t.learning_rate).weight_decay(t.weight_decay));
}

}  // namespace

TrainResult train(const PipelineConfig& cfg, const std::vector<SceneSample>& train_set,
                  const std::vector<SceneSample>& val_set, const ModelSet& models, const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("train: empty dataset");
  const auto& val = val_set.empty() ? train_set : val_set;
  for (const auto* set : {&train_set, &val}) {
    for (const auto& s : *set) s.validate();
    check_classes(*set, models, cfg.network.num_classes);
  }

  torch::set_num_threads(cfg.train.threads);
  torch::manual_seed(cfg.train.seed);

  TrainResult result;
  result.network = PoseNetwork(cfg.network);
  auto& net = result.network;
  net->train();
  auto optimizer = make_optimizer(net, cfg.train);
  WarmupDetector detector(cfg.warmup);
  auto& state = result.state;

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "config.txt") << cfg.to_text();
    log.open(options.out_dir / "train_log.jsonl");
    nlohmann::ordered_json header;
    header["config"] = cfg.to_text();
    log << header.dump() << "\n";
  }
  std::filesystem::path last_good;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.train.seed, static_cast<std::uint64_t>(epoch), 0));
    std::shuffle(order.begin(), order.end(), rng);
    const bool refine_on = !cfg.train.staged_refinement || epoch >= cfg.train.refine_start_epoch;
    const int k = refine_on ? cfg.network.refine_iterations : 0;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mask_source = state.mask_source();
    int pose_samples = 0, refine_samples = 0;
    for (auto idx : order) {
      auto losses = forward_sample(net, cfg, train_set[idx], models, state.mask_source(), state.step, k);
      auto total = cfg.loss.seg_weight * losses.seg + cfg.loss.pose_weight * (losses.pose + losses.refine);
      if (options.fault_epoch && *options.fault_epoch == epoch) {
        total = total * std::numeric_limits<float>::quiet_NaN();
      }
      const double total_value = total.item<double>();
      if (!std::isfinite(total_value)) {
        if (log.is_open()) log.flush();
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(state.step),
                              last_good);
      }
      optimizer->zero_grad();
      total.backward();
      optimizer->step();
      ++state.step;

      rec.seg_loss += losses.seg.item<double>();
      if (losses.objects > 0) {
        rec.pose_loss += losses.pose.item<double>();
        ++pose_samples;
      }
      if (losses.passes > 0) {
        rec.refine_loss += losses.refine.item<double>();
        ++refine_samples;
      }
      rec.objects += losses.objects;
      rec.skipped += losses.skipped;
    }
    if (rec.skipped > 0) {
      std::fprintf(stderr, "warning: epoch %d skipped %d object(s) with empty or too small masks\n", epoch,
                   rec.skipped);
    }
    rec.seg_loss /= static_cast<double>(train_set.size());
    if (pose_samples) rec.pose_loss /= pose_samples;
    if (refine_samples) rec.refine_loss /= refine_samples;

    rec.val_seg_loss = validation_seg_loss(net, val);
    const double observed =
        options.val_loss_override ? options.val_loss_override(epoch, rec.val_seg_loss) : rec.val_seg_loss;
    if (detector.observe(observed)) {
      state.switch_to_predicted(epoch);
      rec.switched = true;
    }

    state.epoch = epoch;
    state.seg_loss.push_back(rec.seg_loss);
    state.pose_loss.push_back(rec.pose_loss);
    state.refine_loss.push_back(rec.refine_loss);
    state.val_seg_loss.push_back(observed);
    result.log.push_back(rec);
    if (log.is_open()) log << to_json(rec) << "\n" << std::flush;
    if (options.on_epoch) options.on_epoch(rec);

    if (!options.out_dir.empty() && cfg.train.checkpoint_every > 0 && epoch % cfg.train.checkpoint_every == 0 &&
        epoch != cfg.train.epochs) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_epoch%04d.pt", epoch);
      save_checkpoint(options.out_dir / name, net, cfg, state.step, epoch);
      last_good = options.out_dir / name;
      state.checkpoints.push_back(last_good);
    }
  }

  if (!options.out_dir.empty()) {
    result.checkpoint = options.out_dir / "checkpoint.pt";
    save_checkpoint(result.checkpoint, net, cfg, state.step, state.epoch);
    state.checkpoints.push_back(result.checkpoint);
  }
  net->eval();
  return result;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, PoseNetwork& net, const PipelineConfig& cfg,
                     std::int64_t step, int epoch) {
  torch::serialize::OutputArchive archive;
  archive.write("version", c10::IValue(kCheckpointVersion));
  archive.write("config", c10::IValue(cfg.to_text()));
  archive.write("step", c10::IValue(step));
  archive.write("epoch", c10::IValue(static_cast<std::int64_t>(epoch)));
  archive.write("optimizer", c10::IValue(cfg.train.optimizer));
  torch::serialize::OutputArchive params;
  net->save(params);
  archive.write("model", params);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  archive.save_to(tmp.string());
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFile("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error&) {
    throw VersionError(path.string() + ": not a checkpoint archive");
  }
  c10::IValue value;
  if (!archive.try_read("version", value) || !value.isInt()) {
    throw VersionError(path.string() + ": checkpoint has no version field");
  }
  if (value.toInt() != kCheckpointVersion) {
    throw VersionError(path.string() + ": checkpoint version " + std::to_string(value.toInt()) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  try {
    archive.read("config", value);
    ck.config = PipelineConfig::parse(value.toStringRef());
    archive.read("step", value);
    ck.step = value.toInt();
    archive.read("epoch", value);
    ck.epoch = static_cast<int>(value.toInt());
    archive.read("optimizer", value);
    ck.optimizer = value.toStringRef();
  } catch (const c10::Error&) {
    throw VersionError(path.string() + ": checkpoint header incomplete");
  } catch (const Error& e) {
    throw VersionError(path.string() + ": stored config rejected: " + e.what());
  }

  ck.network = PoseNetwork(ck.config.network);
  std::vector<std::vector<std::int64_t>> shapes;
  for (const auto& p : ck.network->parameters()) shapes.push_back(p.sizes().vec());
  torch::serialize::InputArchive params;
  try {
    archive.read("model", params);
    ck.network->load(params);
  } catch (const c10::Error&) {
    throw VersionError(path.string() + ": parameters do not match the stored config");
  }
  const auto loaded = ck.network->parameters();
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (loaded[i].sizes().vec() != shapes[i]) {
      throw VersionError(path.string() + ": parameter shapes do not match the stored config");
    }
  }
  ck.network->eval();
  return ck;
}

// ---------------------------------------------------------------------------

InferResult infer(PoseNetwork& net, const PipelineConfig& cfg, const RgbImage& rgb, const DepthImage& depth,
                  const CameraIntrinsics& intrinsics, int refine_iterations) {
  if (rgb.empty() || !rgb.same_size(depth)) throw InvalidArgument("infer: rgb and depth must be aligned");
  if (refine_iterations < 0) throw InvalidArgument("infer: refine iterations must be >= 0");
  intrinsics.validate();
  torch::NoGradGuard guard;
  net->eval();
  InferResult result;

  const auto t0 = Clock::now();
  auto logits = net->segment(frame_tensor(rgb));
  auto probs = torch::softmax(logits, 1)[0];
  const auto predicted = argmax_labels(logits);
  const auto t1 = Clock::now();

  std::vector<PreparedCrop> crops;
  std::vector<double> confidence;
  for (int c = 1; c < cfg.network.num_classes; ++c) {
    const auto raw = mask_for_label(predicted, static_cast<std::uint8_t>(c));
    const auto raw_count = count_nonzero(raw);
    if (raw_count == 0) continue;
    auto mask = clean_mask(raw);
    if (count_nonzero(mask) < static_cast<std::size_t>(cfg.train.min_mask_pixels)) continue;
    try {
      crops.push_back(prepare_crop(masked_crop(rgb, depth, mask, c), intrinsics, cfg.network.crop_size));
    } catch (const EmptyCloud&) {
      continue;
    }
    auto sel = torch::from_blob(const_cast<std::uint8_t*>(raw.data().data()), {rgb.rows(), rgb.cols()},
                                torch::kUInt8)
                   .to(torch::kBool);
    confidence.push_back(probs[c].masked_select(sel).mean().item<double>());
  }
  std::optional<ObjectBatch> batch;
  std::optional<PoseNetworkImpl::Output> out;
  if (!crops.empty()) {
    batch = make_object_batch(crops);
    out = net->forward(*batch, 0);
  }
  const auto t2 = Clock::now();

  PoseOutput current;
  if (out) {
    current = out->initial;
    for (int k = 0; k < refine_iterations; ++k) current = net->refine_forward(current, out->fused, *batch);
  }
  const auto t3 = Clock::now();

  for (std::size_t i = 0; i < crops.size(); ++i) {
    auto est = to_estimate(current, static_cast<std::int64_t>(i), crops[i].class_id, refine_iterations > 0);
    est.confidence = confidence[i];
    result.estimates.push_back(est);
  }
  const double refine_time = out && refine_iterations > 0 ? seconds_since(t2, t3) : 0.0;
  result.timings = {seconds_since(t0, t1), seconds_since(t1, t2), refine_time, seconds_since(t0, t3)};
  return result;
}

MetricReport evaluate(PoseNetwork& net, const PipelineConfig& cfg, const std::vector<SceneSample>& samples,
                      const ModelSet& models) {
  if (samples.empty()) throw InvalidArgument("evaluate: empty dataset");
  check_classes(samples, models, cfg.network.num_classes);
  std::map<int, std::vector<EvalResult>> results;
  for (const auto& s : samples) {
    const auto inferred = infer(net, cfg, s.rgb, s.depth, s.intrinsics, cfg.network.refine_iterations);
    for (const auto& gt : s.gt) {
      EvalResult r{gt.pose, gt.pose, models.at(gt.class_id), false};
      for (const auto& est : inferred.estimates) {
        if (est.class_id == gt.class_id) {
          r.est = est.pose();
          r.detected = true;
          break;
        }
      }
      results[gt.class_id].push_back(r);
    }
  }
  return build_report(results, cfg.metrics);
}

MetricReport evaluate(const std::filesystem::path& checkpoint, const SampleSource& dataset) {
  auto ck = load_checkpoint(checkpoint);
  if (dataset.size() == 0) throw InvalidArgument("evaluate: empty dataset");
  return evaluate(ck.network, ck.config, dataset.load_all(), dataset.models());
}

}  // namespace pfpose
