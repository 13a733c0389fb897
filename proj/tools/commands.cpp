#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tissueseg/augmentation.hpp"
#include "tissueseg/config.hpp"
#include "tissueseg/dataset.hpp"
#include "tissueseg/errors.hpp"
#include "tissueseg/io.hpp"
#include "tissueseg/metrics.hpp"
#include "tissueseg/runtime.hpp"
#include "tissueseg/synthetic.hpp"
#include "tissueseg/trainer.hpp"
#include "tissueseg/weights.hpp"

namespace tissueseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string provenance_line(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

void write_run_record(const fs::path& dir, const std::string& command, const std::string& hash,
                      std::uint64_t seed, json extra = json::object()) {
  extra["command"] = command;
  extra["config_hash"] = hash;
  extra["seed"] = seed;
  write_file_atomic(dir / "run.json", extra.dump(2) + "\n");
}

// Shared flags of the commands driven by an experiment config.
struct ConfigFlags {
  std::string config_path;
  std::string dataset;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> patience;
  std::optional<double> lr;
  std::optional<std::string> model;
  std::optional<int> rounds;
  std::optional<int> runs;
  std::optional<int> pick;

  void add_to(CLI::App* cmd, bool training) {
    cmd->add_option("-c,--config", config_path, "Experiment config (JSON)");
    cmd->add_option("--dataset", dataset, "Prepared dataset directory");
    cmd->add_option("-o,--out", out, "Output directory");
    cmd->add_option("--seed", seed, "Override the master seed");
    cmd->add_option("--model", model, "Model preset: b3 or tiny");
    if (training) {
      cmd->add_option("--epochs", epochs);
      cmd->add_option("--batch-size", batch_size);
      cmd->add_option("--patience", patience);
      cmd->add_option("--lr", lr);
    }
  }

  ExperimentConfig resolve() const {
    json j = config_path.empty() ? json::object() : ExperimentConfig::load(config_path).to_json();
    if (!dataset.empty()) j["dataset_dir"] = dataset;
    if (!out.empty()) j["output_dir"] = out;
    if (seed) j["seed"] = *seed;
    if (model) j["model"] = *model;
    if (epochs) j["train"]["epochs"] = *epochs;
    if (batch_size) j["train"]["batch_size"] = *batch_size;
    if (patience) j["train"]["patience"] = *patience;
    if (lr) j["train"]["learning_rate"] = *lr;
    if (rounds) j["ssl"]["rounds"] = *rounds;
    if (runs) j["ssl"]["runs"] = *runs;
    if (pick) j["ssl"]["pick"] = *pick;
    if (epochs && !patience) {
      const int current = j["train"].value("patience", TrainConfig{}.patience);
      j["train"]["patience"] = std::min(current, *epochs);
    }
    return ExperimentConfig::from_json(j);
  }
};

fs::path require_dir(const std::string& value, const char* what) {
  if (value.empty()) throw UsageError(std::string("missing ") + what);
  return value;
}

HybridSegmenter build_model(const ExperimentConfig& cfg, std::ostream& out) {
  torch::manual_seed(cfg.seed);
  HybridSegmenter model(cfg.model);
  if (!cfg.pretrained_encoder.empty()) {
    auto report = load_matching_weights(*model->encoder(), cfg.pretrained_encoder);
    out << "pretrained encoder: " << report.loaded.size() << " tensors loaded, "
        << report.missing.size() << " missing, " << report.mismatched.size() << " mismatched\n";
  }
  return model;
}

HybridSegmenter load_model(const fs::path& checkpoint_dir, std::optional<ModelConfig> expected,
                           CheckpointInfo* info = nullptr) {
  if (!fs::exists(checkpoint_dir / "model.pt")) {
    throw UsageError("no checkpoint at " + checkpoint_dir.string());
  }
  auto stored = read_checkpoint_model_config(checkpoint_dir);
  if (expected && expected->to_json() != stored.to_json()) {
    throw CheckpointError("checkpoint model config does not match the experiment config");
  }
  HybridSegmenter model(stored);
  auto ci = read_checkpoint(checkpoint_dir, model);
  if (info) *info = ci;
  model->eval();
  return model;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string in, out;
  int side = kCanvasSide;
  std::uint64_t seed = 0;
  bool resize = false;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const fs::path in = require_dir(a.in, "--in");
  const fs::path dst = require_dir(a.out, "--out");
  if (!fs::is_directory(in)) throw Error("input directory " + in.string() + " does not exist");
  const auto image_paths = list_pngs(in / "images");
  if (image_paths.empty()) throw EmptyDatasetError("no labeled images under " + (in / "images").string());

  const auto palette = ClassPalette::tissue_default();
  const json params = {{"side", a.side}, {"seed", a.seed}, {"resize", a.resize}};
  Manifest manifest;
  manifest.canvas_side = a.side;
  manifest.seed = a.seed;
  manifest.config_hash = to_hex(fnv1a64(params.dump()));

  auto fit = [&](RgbImage img) {
    if (a.resize) return downscale_to_fit(img, a.side);
    return img;
  };

  std::vector<std::string> names;
  std::map<std::string, CanvasPlacement> placements;
  for (const auto& p : image_paths) {
    auto image = fit(read_rgb_png(p));
    const auto name = image.name();
    const auto mask_path = in / "masks" / p.filename();
    if (!fs::exists(mask_path)) throw Error("missing mask " + mask_path.string());
    TissueMask mask;
    try {
      mask = encode_mask(read_rgb_png(mask_path), palette);
    } catch (const UnknownColorError& e) {
      throw UnknownColorError(mask_path.string() + ": " + e.what());
    }
    if (a.resize) mask = downscale_to_fit(mask, a.side);
    if (mask.height() != image.height() || mask.width() != image.width()) {
      throw ShapeError(name + ": mask and image differ in size");
    }
    PaddedSample padded;
    try {
      padded = pad_to_canvas(image, mask, a.side);
    } catch (const DimensionError& e) {
      throw DimensionError(p.string() + ": " + e.what() + " (use --resize to downscale)");
    }
    write_rgb_png(dst / "images" / (name + ".png"), padded.image);
    write_indexed_mask(dst / "masks" / (name + ".png"), *padded.mask);
    write_rgb_png(dst / "masks_rgb" / (name + ".png"), decode_mask(*padded.mask, palette));
    names.push_back(name);
    placements[name] = padded.placement;
  }

  const auto splits = make_splits(names, SplitSpec::from_default_ratio(static_cast<int>(names.size()), a.seed));
  auto add = [&](const std::vector<std::string>& part, SplitName s) {
    for (const auto& n : part) manifest.labeled.push_back({n, s, placements.at(n)});
  };
  add(splits.train, SplitName::train);
  add(splits.val, SplitName::val);
  add(splits.test, SplitName::test);
  std::sort(manifest.labeled.begin(), manifest.labeled.end(),
            [](const ManifestEntry& x, const ManifestEntry& y) { return x.name < y.name; });

  for (const auto& p : list_pngs(in / "unlabeled")) {
    auto image = fit(read_rgb_png(p));
    auto padded = pad_to_canvas(image, std::nullopt, a.side);
    write_rgb_png(dst / "unlabeled" / (image.name() + ".png"), padded.image);
    manifest.unlabeled.push_back({image.name(), std::nullopt, padded.placement});
  }

  write_file_atomic(dst / "manifest.json", manifest.to_json().dump(2) + "\n");
  out << "prepared " << names.size() << " labeled (" << splits.train.size() << "/"
      << splits.val.size() << "/" << splits.test.size() << ") and " << manifest.unlabeled.size()
      << " unlabeled images\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const ConfigFlags& flags, bool grid, std::ostream& out) {
  const auto cfg = flags.resolve();
  const fs::path dst = require_dir(cfg.output_dir, "--out");
  const auto hash = cfg.hash();
  configure_runtime(cfg.seed, deterministic_requested());
  PreparedDataset data{Manifest::load(require_dir(cfg.dataset_dir, "--dataset")), cfg.dataset_dir};
  const auto train_set = data.load_split(SplitName::train);
  const auto val_set = data.load_split(SplitName::val);
  fs::create_directories(dst);
  write_file_atomic(dst / "config.json", cfg.to_json().dump(2) + "\n");

  auto train_cfg = cfg.train;
  if (grid) {
    auto candidates = make_grid(train_cfg, TrainConfig::weight_decay_grid(),
                                {SchedulerKind::reduce_on_plateau, SchedulerKind::polynomial},
                                {OptimizerKind::adam, OptimizerKind::sgd});
    TrainOptions opts;
    opts.pipeline = cfg.augmentation;
    auto search = hyperparameter_search(candidates, [&](const TrainConfig& c) {
      auto model = build_model(cfg, out);
      return train_supervised(model, train_set, val_set, c, cfg.loss, opts).best_val_loss;
    });
    write_file_atomic(dst / "search.csv", provenance_line(hash, cfg.seed) + search.to_csv());
    train_cfg = search.best;
    out << "grid search best: weight_decay=" << train_cfg.weight_decay
        << " scheduler=" << scheduler_name(train_cfg.scheduler)
        << " optimizer=" << optimizer_name(train_cfg.optimizer) << "\n";
  }

  std::ofstream log(dst / "epoch_log.csv", std::ios::trunc);
  log << provenance_line(hash, cfg.seed) << "epoch,train_loss,val_loss,val_iou,lr\n";
  TrainOptions opts;
  opts.pipeline = cfg.augmentation;
  opts.checkpoint_dir = dst / "checkpoint";
  opts.config_hash = hash;
  opts.on_epoch = [&](const EpochStats& s) {
    log << s.epoch << ',' << fmt(s.train_loss) << ',' << fmt(s.val_loss) << ',' << fmt(s.val_iou)
        << ',' << fmt(s.learning_rate) << '\n';
    log.flush();
  };
  auto model = build_model(cfg, out);
  const auto result = train_supervised(model, train_set, val_set, train_cfg, cfg.loss, opts);
  write_run_record(dst, "train", hash, cfg.seed,
                   {{"best_epoch", result.checkpoint.epoch},
                    {"best_val_loss", result.checkpoint.best_val_loss},
                    {"best_val_iou", result.checkpoint.best_val_iou},
                    {"epochs_run", result.history.size()}});
  out << "trained " << result.history.size() << " epochs; best checkpoint at epoch "
      << result.checkpoint.epoch << " (val loss " << fmt(result.checkpoint.best_val_loss) << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ssl-train

int cmd_ssl_train(const ConfigFlags& flags, const std::string& checkpoint, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("ssl-train needs --checkpoint from a supervised run");
  const auto cfg = flags.resolve();
  const fs::path dst = require_dir(cfg.output_dir, "--out");
  const auto hash = cfg.hash();
  configure_runtime(cfg.seed, deterministic_requested());
  auto model = load_model(checkpoint, cfg.model);
  PreparedDataset data{Manifest::load(require_dir(cfg.dataset_dir, "--dataset")), cfg.dataset_dir};

  DatasetPools pools;
  pools.labeled = data.load_split(SplitName::train);
  pools.unlabeled = data.load_unlabeled();
  fs::create_directories(dst);
  write_file_atomic(dst / "config.json", cfg.to_json().dump(2) + "\n");

  SegmenterSelfTraining backend(model, data.load_split(SplitName::val), cfg.train, cfg.loss,
                                cfg.augmentation);
  std::ofstream log(dst / "round_log.csv", std::ios::trunc);
  log << provenance_line(hash, cfg.seed) << "round,run,training_size,best_val_loss,picked\n";
  auto outcome = train_semi_supervised(pools, cfg.ssl, backend, cfg.seed, [&](const SslRunRecord& r) {
    log << r.round << ',' << r.run << ',' << r.training_size << ',' << fmt(r.best_val_loss) << ',';
    for (std::size_t i = 0; i < r.picked.size(); ++i) log << (i ? ";" : "") << r.picked[i];
    log << '\n';
    log.flush();
    out << "round " << r.round << " run " << r.run << ": " << r.training_size
        << " training images, best val loss " << fmt(r.best_val_loss) << "\n";
  });

  json picked = json::array();
  for (const auto& r : outcome.runs) picked.push_back({{"round", r.round}, {"run", r.run}, {"names", r.picked}});
  json rounds = json::array();
  for (const auto& r : outcome.rounds) {
    rounds.push_back({{"round", r.round},
                      {"best_run", r.best_run},
                      {"min_val_loss", r.min_val_loss},
                      {"improved", r.improved},
                      {"labeled_after", r.labeled_after},
                      {"unlabeled_after", r.unlabeled_after}});
  }
  write_file_atomic(dst / "picked.json",
                    json{{"config_hash", hash}, {"seed", cfg.seed}, {"records", picked}}.dump(2) + "\n");

  CheckpointInfo info;
  int adopted = 0;
  for (const auto& r : outcome.rounds) adopted += r.improved ? 1 : 0;
  info.epoch = adopted;
  info.best_val_loss = outcome.tracked_val_loss;
  info.best_val_iou = backend.adopted_val_iou();
  info.config_hash = hash;
  write_checkpoint(dst / "checkpoint", backend.model(), info);
  write_run_record(dst, "ssl-train", hash, cfg.seed,
                   {{"stop", ssl_stop_name(outcome.stop)},
                    {"rounds", rounds},
                    {"tracked_val_loss", outcome.tracked_val_loss},
                    {"final_labeled", pools.labeled.size()}});
  out << "self-training stopped (" << ssl_stop_name(outcome.stop) << ") with "
      << pools.labeled.size() << " labeled images\n";
  return kExitOk;
}

// ---------------------------------------------------------------- infer

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& s : inputs) {
    if (fs::is_directory(s)) {
      for (auto& p : list_pngs(s)) out.push_back(p);
    } else {
      if (!fs::exists(s)) throw Error("no such image " + s);
      out.emplace_back(s);
    }
  }
  return out;
}

int cmd_infer(const std::string& checkpoint, const std::vector<std::string>& inputs,
              const std::string& out_dir, double opacity, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("infer needs --checkpoint");
  const fs::path dst = require_dir(out_dir, "--out");
  CheckpointInfo info;
  auto model = load_model(checkpoint, std::nullopt, &info);
  configure_runtime(0, deterministic_requested());
  const auto palette = ClassPalette::tissue_default();
  const auto paths = expand_inputs(inputs);
  for (const auto& p : paths) {
    const auto image = read_rgb_png(p);
    int side = kCanvasSide;
    while (side < std::max(image.height(), image.width())) side += 32;
    auto padded = pad_to_canvas(image, std::nullopt, side);
    auto pred = crop_from_canvas(predict_masks(model, {padded.image}, 1).front(), padded.placement);
    write_indexed_mask(dst / "masks" / (image.name() + ".png"), pred);
    write_rgb_png(dst / "overlays" / (image.name() + ".png"), overlay_mask(image, pred, palette, opacity));
  }
  fs::create_directories(dst);
  write_run_record(dst, "infer", info.config_hash, 0, {{"images", paths.size()}, {"opacity", opacity}});
  out << "wrote " << paths.size() << " predictions to " << dst.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& split,
             const std::string& out_dir, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint");
  const fs::path root = require_dir(dataset, "--dataset");
  const fs::path dst = require_dir(out_dir, "--out");
  CheckpointInfo info;
  auto model = load_model(checkpoint, std::nullopt, &info);
  configure_runtime(0, deterministic_requested());
  PreparedDataset data{Manifest::load(root), root};
  const auto which = parse_split_name(split);
  const auto samples = data.load_split(which);
  if (samples.empty()) throw EmptyDatasetError("split '" + split + "' is empty");
  std::map<std::string, CanvasPlacement> placement;
  for (const auto& e : data.manifest.labeled) placement[e.name] = e.placement;

  std::vector<ConfusionCounts> per_image;
  for (const auto& s : samples) {
    const auto& pl = placement.at(s.image.name());
    auto pred = crop_from_canvas(predict_masks(model, {s.image}, 1).front(), pl);
    per_image.push_back(confusion_counts(pred, crop_from_canvas(s.mask, pl), kNumTissueClasses));
  }
  const auto report = aggregate_report(per_image);
  auto j = report.to_json();
  j["config_hash"] = info.config_hash;
  j["seed"] = data.manifest.seed;
  j["split"] = split;
  fs::create_directories(dst);
  write_file_atomic(dst / "report.json", j.dump(2) + "\n");
  write_file_atomic(dst / "report.csv", provenance_line(info.config_hash, data.manifest.seed) + report.to_csv());
  out << "overall DSC " << fmt(report.overall_micro.dsc) << ", IoU " << fmt(report.overall_micro.iou)
      << " over " << report.image_count << " images\n";
  return kExitOk;
}

// ---------------------------------------------------------------- augment-preview

struct PreviewArgs {
  std::string config, image, mask, out;
  int count = 8;
  std::uint64_t seed = 0;
  bool indexed = false;
};

int cmd_augment_preview(const PreviewArgs& a, std::ostream& out) {
  if (a.count < 0) throw UsageError("--count must be >= 0");
  const auto pipeline = a.config.empty() ? AugmentationPipeline::make_default()
                                         : ExperimentConfig::load(a.config).augmentation;
  const auto palette = ClassPalette::tissue_default();
  const auto image = read_rgb_png(a.image);
  const auto mask = a.indexed ? read_indexed_mask(a.mask) : encode_mask(read_rgb_png(a.mask), palette);
  if (a.count == 0) {
    out << "nothing to do\n";
    return kExitOk;
  }
  const fs::path dst = require_dir(a.out, "--out");
  const auto hash = to_hex(fnv1a64(pipeline.to_json().dump()));
  for (int i = 0; i < a.count; ++i) {
    std::mt19937_64 rng(derive_seed(a.seed, static_cast<std::uint64_t>(i)));
    auto s = apply(pipeline, image, mask, rng);
    char stem[32];
    std::snprintf(stem, sizeof stem, "aug_%03d", i);
    write_rgb_png(dst / (std::string(stem) + ".png"), s.image);
    write_rgb_png(dst / (std::string(stem) + "_overlay.png"), overlay_mask(s.image, s.mask, palette, 0.5));
  }
  write_run_record(dst, "augment-preview", hash, a.seed, {{"count", a.count}});
  out << "wrote " << a.count << " augmented samples\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  int count = 20;
  int unlabeled = 0;
  int height = 64, width = 64;
  std::uint64_t seed = 0;
  double noise = 4.0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path dst = require_dir(a.out, "--out");
  SyntheticSpec spec;
  spec.height = a.height;
  spec.width = a.width;
  spec.noise_std = a.noise;
  const auto labeled = synthetic_set(a.count, a.seed, spec, "img");
  std::vector<RgbImage> pool;
  for (auto& s : synthetic_set(a.unlabeled, derive_seed(a.seed, 0x0f00ULL), spec, "unl")) {
    pool.push_back(std::move(s.image));
  }
  write_raw_dataset(dst, labeled, pool);
  out << "wrote " << labeled.size() << " labeled and " << pool.size() << " unlabeled images\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wound tissue segmentation toolkit"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Pad, encode and split a raw labeled dataset");
  prepare->add_option("--in", prep.in, "Raw dataset (images/, masks/, optional unlabeled/)")->required();
  prepare->add_option("--out", prep.out, "Prepared dataset directory")->required();
  prepare->add_option("--side", prep.side, "Canvas side")->check(CLI::PositiveNumber);
  prepare->add_option("--seed", prep.seed, "Split seed");
  prepare->add_flag("--resize", prep.resize, "Downscale images larger than the canvas");

  ConfigFlags train_flags;
  bool grid = false;
  auto* train = app.add_subcommand("train", "Supervised training");
  train_flags.add_to(train, true);
  train->add_flag("--grid", grid, "Run the weight-decay/scheduler/optimizer grid first");

  ConfigFlags ssl_flags;
  std::string ssl_checkpoint;
  auto* ssl = app.add_subcommand("ssl-train", "Pseudo-label self-training from a supervised checkpoint");
  ssl_flags.add_to(ssl, true);
  ssl->add_option("--checkpoint", ssl_checkpoint, "Supervised checkpoint directory");
  ssl->add_option("--rounds", ssl_flags.rounds);
  ssl->add_option("--runs", ssl_flags.runs);
  ssl->add_option("--pick", ssl_flags.pick);

  std::string infer_ckpt, infer_out;
  std::vector<std::string> infer_inputs;
  double opacity = 0.5;
  auto* infer = app.add_subcommand("infer", "Predict masks and overlays");
  infer->add_option("--checkpoint", infer_ckpt)->required();
  infer->add_option("--images", infer_inputs, "PNG files or directories")->required();
  infer->add_option("-o,--out", infer_out)->required();
  infer->add_option("--opacity", opacity)->check(CLI::Range(0.0, 1.0));

  std::string eval_ckpt, eval_dataset, eval_split = "test", eval_out;
  auto* eval = app.add_subcommand("eval", "Metrics report on a prepared split");
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--dataset", eval_dataset)->required();
  eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("-o,--out", eval_out)->required();

  PreviewArgs prev;
  auto* preview = app.add_subcommand("augment-preview", "Write augmented copies of one pair");
  preview->add_option("-c,--config", prev.config, "Experiment config supplying the pipeline");
  preview->add_option("--image", prev.image)->required();
  preview->add_option("--mask", prev.mask)->required();
  preview->add_flag("--indexed", prev.indexed, "Mask is an indexed label PNG");
  preview->add_option("--count", prev.count);
  preview->add_option("--seed", prev.seed);
  preview->add_option("-o,--out", prev.out);

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic raw dataset");
  synth->add_option("-o,--out", syn.out)->required();
  synth->add_option("--count", syn.count)->check(CLI::NonNegativeNumber);
  synth->add_option("--unlabeled", syn.unlabeled)->check(CLI::NonNegativeNumber);
  synth->add_option("--height", syn.height)->check(CLI::PositiveNumber);
  synth->add_option("--width", syn.width)->check(CLI::PositiveNumber);
  synth->add_option("--seed", syn.seed);
  synth->add_option("--noise", syn.noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*prepare) return cmd_prepare(prep, out);
    if (*train) return cmd_train(train_flags, grid, out);
    if (*ssl) return cmd_ssl_train(ssl_flags, ssl_checkpoint, out);
    if (*infer) return cmd_infer(infer_ckpt, infer_inputs, infer_out, opacity, out);
    if (*eval) return cmd_eval(eval_ckpt, eval_dataset, eval_split, eval_out, out);
    if (*preview) return cmd_augment_preview(prev, out);
    if (*synth) return cmd_synth(syn, out);
  } catch (const NonFiniteLossError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNonFinite;
  } catch (const PoolUnderflowError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPoolUnderflow;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace tissueseg::cli
