#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "pfpose/config.hpp"
#include "pfpose/data.hpp"
#include "pfpose/errors.hpp"
#include "pfpose/io.hpp"
#include "pfpose/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pfpose;

namespace {

// image_sets/ marks the video layout; anything else is read as per-object folders.
std::unique_ptr<SampleSource> open_dataset(const fs::path& root, const std::string& split) {
  if (fs::exists(root / "image_sets")) return std::make_unique<YcbvDataset>(root, split);
  return std::make_unique<LinemodDataset>(root, split);
}

int run_train(const fs::path& config_path, const fs::path& data, const fs::path& out, const std::string& split,
              const std::string& val_split) {
  auto cfg = PipelineConfig::load(config_path);
  std::cout << "# config\n" << cfg.to_text();
  auto train_src = open_dataset(data, split);
  std::vector<SceneSample> val;
  try {
    val = open_dataset(data, val_split)->load_all();
  } catch (const EmptyDataset&) {
    std::cout << "# no '" << val_split << "' split, validating on the training set\n";
  }
  TrainOptions opts;
  opts.out_dir = out;
  opts.on_epoch = [](const EpochRecord& r) { std::cout << to_json(r) << std::endl; };
  auto result = train(cfg, train_src->load_all(), val, train_src->models(), opts);
  std::cout << "checkpoint " << result.checkpoint.string() << "\n";
  return 0;
}

int run_eval(const fs::path& checkpoint, const fs::path& data, const fs::path& report, const std::string& split,
             const std::string& format) {
  auto src = open_dataset(data, split);
  auto rep = evaluate(checkpoint, *src);
  if (report.has_parent_path()) fs::create_directories(report.parent_path());
  std::ofstream out(report);
  if (!out) throw Error("cannot write " + report.string());
  if (format == "kv") {
    write_report_kv(rep, out);
  } else {
    write_report_text(rep, out);
  }
  write_report_text(rep, std::cout);
  return 0;
}

int run_infer(const fs::path& checkpoint, const fs::path& rgb_path, const fs::path& depth_path,
              const fs::path& intr_path, std::optional<int> refine, bool timing) {
  auto ck = load_checkpoint(checkpoint);
  const auto rgb = io::read_rgb(rgb_path);
  const auto depth = io::read_depth(depth_path);
  const auto intr = io::read_intrinsics(intr_path);
  const int k = refine.value_or(ck.config.network.refine_iterations);
  const auto res = infer(ck.network, ck.config, rgb, depth, intr, k);
  std::printf("# class  qw qx qy qz  tx ty tz [m]  confidence  refined\n");
  for (const auto& e : res.estimates) {
    std::printf("%d  %.6f %.6f %.6f %.6f  %.6f %.6f %.6f  %.4f  %s\n", e.class_id, e.quaternion.w, e.quaternion.x,
                e.quaternion.y, e.quaternion.z, e.translation.x(), e.translation.y(), e.translation.z(),
                e.confidence, e.refined ? "yes" : "no");
  }
  if (res.estimates.empty()) std::printf("# no object detected\n");
  if (timing) {
    std::printf("# timing [s]\n%-16s %10s\n", "stage", "seconds");
    std::printf("%-16s %10.6f\n", "Segmentation", res.timings.segmentation);
    std::printf("%-16s %10.6f\n", "6D Pose", res.timings.pose);
    std::printf("%-16s %10.6f\n", "Pose Refinement", res.timings.refinement);
    std::printf("%-16s %10.6f\n", "Overall", res.timings.overall);
  }
  return 0;
}

int run_generate(const fs::path& out, std::size_t count, std::uint64_t seed, double val_fraction, double noise) {
  auto spec = SyntheticSpec::desk_default();
  spec.seed = seed;
  spec.depth_noise_sigma = noise;
  auto samples = generate_synthetic(spec, count);
  const auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(count));
  for (std::size_t i = count - n_val; i < count; ++i) samples[i].split = "val";
  export_linemod_layout(samples, build_models(spec), out);
  io::write_intrinsics(out / "intrinsics.txt", spec.intrinsics);
  std::cout << "wrote " << count << " samples (" << n_val << " val) to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pyramid-fusion 6D object pose estimation"};
  app.require_subcommand(1);

  fs::path config, data, out, checkpoint, report, rgb, depth, intr;
  std::string split = "train", val_split = "val", eval_split = "test", format = "text";
  std::optional<int> refine;
  bool timing = false;
  std::size_t count = 16;
  std::uint64_t seed = 1;
  double val_fraction = 0.25, noise = 0.0;

  auto* tr = app.add_subcommand("train", "Train on a dataset directory");
  tr->add_option("--config", config, "key = value config file")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data, "dataset root")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "output directory")->required();
  tr->add_option("--split", split, "training split")->capture_default_str();
  tr->add_option("--val-split", val_split, "validation split")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "dataset root")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--report", report, "report output path")->required();
  ev->add_option("--split", eval_split, "evaluation split")->capture_default_str();
  ev->add_option("--format", format, "text or kv")->check(CLI::IsMember({"text", "kv"}))->capture_default_str();

  auto* in = app.add_subcommand("infer", "Estimate poses on one RGB-D frame");
  in->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  in->add_option("--rgb", rgb)->required()->check(CLI::ExistingFile);
  in->add_option("--depth", depth)->required()->check(CLI::ExistingFile);
  in->add_option("--intrinsics", intr, "fx/fy/cx/cy/depth_scale lines")->required()->check(CLI::ExistingFile);
  in->add_option("--refine", refine, "refinement iterations (default: checkpoint config)")
      ->check(CLI::NonNegativeNumber);
  in->add_flag("--time", timing, "print per-stage timings");

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset in the per-object layout");
  gen->add_option("--out", out)->required();
  gen->add_option("--count", count)->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--val-fraction", val_fraction)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen->add_option("--depth-noise", noise, "depth noise sigma [m]")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*tr) return run_train(config, data, out, split, val_split);
    if (*ev) return run_eval(checkpoint, data, report, eval_split, format);
    if (*in) return run_infer(checkpoint, rgb, depth, intr, refine, timing);
    if (*gen) return run_generate(out, count, seed, val_fraction, noise);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.last_good_checkpoint().empty()) std::cerr << "last good checkpoint: " << e.last_good_checkpoint() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
