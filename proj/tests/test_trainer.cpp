#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "tissueseg/config.hpp"
#include "tissueseg/errors.hpp"
#include "tissueseg/synthetic.hpp"
#include "tissueseg/tensors.hpp"
#include "tissueseg/trainer.hpp"
#include "tissueseg/weights.hpp"

using namespace tissueseg;
namespace fs = std::filesystem;

namespace {

// Replays scripted validation numbers.
class ScriptedRunner : public EpochRunner {
 public:
  ScriptedRunner(std::vector<double> losses, std::vector<double> ious)
      : losses_(std::move(losses)), ious_(std::move(ious)) {}

  EpochStats run_epoch(int epoch) override {
    const auto i = static_cast<std::size_t>(epoch - 1);
    return {epoch, 1.0, losses_.at(i), ious_.at(i), 1e-4};
  }
  void save_checkpoint(const CheckpointInfo& info) override { saved.push_back(info.epoch); }

  std::vector<int> saved;

 private:
  std::vector<double> losses_;
  std::vector<double> ious_;
};

TrainConfig small_cfg(int epochs, int patience) {
  TrainConfig c;
  c.epochs = epochs;
  c.patience = patience;
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tissueseg_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<RgbImage> named_images(int count, const std::string& prefix, int side = 4) {
  std::vector<RgbImage> out;
  for (int i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04d", prefix.c_str(), i);
    out.emplace_back(side, side, buf);
  }
  return out;
}

std::vector<LabeledSample> named_pairs(int count, const std::string& prefix) {
  std::vector<LabeledSample> out;
  for (auto& img : named_images(count, prefix)) out.push_back({img, TissueMask(4, 4)});
  return out;
}

// Backend with injected validation losses, indexed [round-1][run].
class StubBackend : public SelfTrainingBackend {
 public:
  explicit StubBackend(std::function<double(int, int)> loss) : loss_(std::move(loss)) {}

  std::map<std::string, TissueMask> pseudo_label(const std::vector<RgbImage>& images) override {
    std::map<std::string, TissueMask> out;
    for (const auto& img : images) {
      // label encodes the name's last digit so transfers are traceable
      const int v = (img.name().back() - '0') % 4;
      out.emplace(img.name(), TissueMask(img.height(), img.width(),
                                         std::vector<std::uint8_t>(static_cast<std::size_t>(img.height()) * img.width(),
                                                                   static_cast<std::uint8_t>(v))));
    }
    return out;
  }
  void begin_round(int round) override { rounds_begun.push_back(round); }
  double train_run(const std::vector<LabeledSample>& set, int round, int run) override {
    std::set<std::string> names;
    for (const auto& s : set) names.insert(s.image.name());
    EXPECT_EQ(names.size(), set.size()) << "duplicate names in training set";
    training_sizes.push_back(static_cast<int>(set.size()));
    return loss_(round, run);
  }
  void adopt_run(int run) override { adopted.push_back(run); }
  void finish() override { finished = true; }

  std::vector<int> rounds_begun;
  std::vector<int> training_sizes;
  std::vector<int> adopted;
  bool finished = false;

 private:
  std::function<double(int, int)> loss_;
};

DatasetPools make_pools(int labeled, int unlabeled) {
  DatasetPools p;
  p.labeled = named_pairs(labeled, "lab");
  p.unlabeled = named_images(unlabeled, "unl");
  return p;
}

std::vector<LabeledSample> tiny_set(int count, std::uint64_t seed) {
  return synthetic_set(count, seed, {64, 64, 8, 4.0, 0.8});
}

}  // namespace

// ---- early stopping ------------------------------------------------------------

TEST(EarlyStop, ConstantLossStopsAfterPatience) {
  ScriptedRunner r(std::vector<double>(10, 0.7), std::vector<double>(10, 0.3));
  auto res = fit(r, small_cfg(10, 2));
  ASSERT_EQ(res.history.size(), 3u);
  EXPECT_TRUE(res.early_stopped);
  EXPECT_EQ(r.saved, std::vector<int>{1});
  EXPECT_EQ(res.checkpoint.epoch, 1);
}

TEST(EarlyStop, DecreasingLossCheckpointsLastEpoch) {
  std::vector<double> losses;
  for (int i = 0; i < 8; ++i) losses.push_back(1.0 - 0.1 * i);
  ScriptedRunner r(losses, std::vector<double>(8, 0.5));
  auto res = fit(r, small_cfg(8, 3));
  EXPECT_EQ(res.history.size(), 8u);
  EXPECT_FALSE(res.early_stopped);
  EXPECT_EQ(res.checkpoint.epoch, 8);
  EXPECT_DOUBLE_EQ(res.checkpoint.best_val_loss, losses.back());
}

TEST(EarlyStop, IouGainAloneCheckpoints) {
  // loss flat after epoch 1, IoU rises at epochs 3 and 5
  ScriptedRunner r({0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
                   {0.1, 0.1, 0.2, 0.2, 0.3, 0.3, 0.3, 0.3, 0.3});
  auto res = fit(r, small_cfg(9, 2));
  EXPECT_EQ(r.saved, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(res.history.size(), 7u);
  EXPECT_DOUBLE_EQ(res.checkpoint.best_val_iou, 0.3);
}

TEST(EarlyStop, StateMachineTrace) {
  EarlyStopping s(2);
  EXPECT_TRUE(s.update(1.0, 0.0).improved());
  EXPECT_FALSE(s.update(1.0, 0.0).improved());
  EXPECT_FALSE(s.should_stop());
  auto d = s.update(0.9, 0.0);
  EXPECT_TRUE(d.loss_improved);
  EXPECT_FALSE(d.iou_improved);
  EXPECT_FALSE(s.update(0.95, -1.0).improved());
  EXPECT_FALSE(s.update(0.95, -1.0).improved());
  EXPECT_TRUE(s.should_stop());
  EXPECT_DOUBLE_EQ(s.best_loss(), 0.9);
}

TEST(EarlyStop, NonFiniteLossAborts) {
  ScriptedRunner r({0.5, std::nan(""), 0.4}, {0.1, 0.1, 0.1});
  EXPECT_THROW(fit(r, small_cfg(3, 3)), NonFiniteLossError);
}

TEST(TrainConfigTest, DefaultsAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.epochs, 500);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_EQ(c.patience, 50);
  EXPECT_EQ(c.weight_decay, 1e-5);
  EXPECT_EQ(TrainConfig::weight_decay_grid(), (std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5}));
  EXPECT_NO_THROW(c.validate());
  auto bad = small_cfg(5, 6);
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  c.scheduler = SchedulerKind::polynomial;
  c.optimizer = OptimizerKind::sgd;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_EQ(parse_scheduler(scheduler_name(SchedulerKind::polynomial)), SchedulerKind::polynomial);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::adam);
  EXPECT_THROW(parse_optimizer("lbfgs"), ConfigError);
  SslConfig s;
  EXPECT_EQ(s.pick, 50);
  s.runs = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

// ---- grid search -------------------------------------------------------------------

TEST(GridSearch, FullGridHasSixteenRuns) {
  auto grid = make_grid(TrainConfig{}, TrainConfig::weight_decay_grid(),
                        {SchedulerKind::reduce_on_plateau, SchedulerKind::polynomial},
                        {OptimizerKind::adam, OptimizerKind::sgd});
  ASSERT_EQ(grid.size(), 16u);
  std::set<std::string> distinct;
  for (const auto& g : grid) distinct.insert(g.to_json().dump());
  EXPECT_EQ(distinct.size(), 16u);
  int calls = 0;
  auto res = hyperparameter_search(grid, [&](const TrainConfig&) { return ++calls * 1.0; });
  EXPECT_EQ(calls, 16);
  EXPECT_EQ(res.rows.size(), 16u);
  const auto csv = res.to_csv();
  EXPECT_EQ(csv.rfind("weight_decay,scheduler,optimizer,best_val_loss\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
}

TEST(GridSearch, ArgminMatchesBruteForce) {
  auto grid = make_grid(TrainConfig{}, TrainConfig::weight_decay_grid(),
                        {SchedulerKind::reduce_on_plateau, SchedulerKind::polynomial},
                        {OptimizerKind::adam, OptimizerKind::sgd});
  auto objective = [](const TrainConfig& c) {
    return std::abs(std::log10(c.weight_decay) + 3.2) +
           (c.scheduler == SchedulerKind::polynomial ? 0.05 : 0.0) +
           (c.optimizer == OptimizerKind::sgd ? 0.3 : 0.0);
  };
  auto res = hyperparameter_search(grid, objective);
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (objective(grid[i]) < objective(grid[best])) best = i;
  EXPECT_EQ(res.best.to_json(), grid[best].to_json());
  EXPECT_EQ(res.best.weight_decay, 1e-3);
  EXPECT_EQ(res.best.optimizer, OptimizerKind::adam);
}

TEST(GridSearch, SingleConfigAndEmptyGrid) {
  TrainConfig only;
  only.weight_decay = 1e-4;
  auto res = hyperparameter_search({only}, [](const TrainConfig&) { return 3.0; });
  EXPECT_EQ(res.best.to_json(), only.to_json());
  EXPECT_THROW(hyperparameter_search({}, [](const TrainConfig&) { return 0.0; }), ConfigError);
}

// ---- pseudo labels --------------------------------------------------------------------

TEST(PseudoLabels, OnePerImageAndArgmaxOfSoftmax) {
  torch::manual_seed(1);
  HybridSegmenter model(ModelConfig::tiny());
  std::vector<RgbImage> images;
  for (auto& s : tiny_set(3, 4)) images.push_back(s.image);
  auto labels = generate_pseudo_labels(model, images, 2);
  ASSERT_EQ(labels.size(), 3u);
  model->eval();
  torch::NoGradGuard g;
  auto probs = torch::softmax(model->forward(images_to_tensor(images)), 1);
  auto pa = probs.accessor<float, 4>();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& m = labels.at(images[i].name());
    ASSERT_EQ(m.height(), 64);
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        int best = 0;
        for (int k = 1; k < 4; ++k)
          if (pa[i][k][r][c] > pa[i][best][r][c]) best = k;
        ASSERT_EQ(m.at(r, c), best) << i << " " << r << "," << c;
      }
    }
  }
}

// ---- self-training loop -------------------------------------------------------------

TEST(SelfTraining, TrainingSizesGrowByPickPerRound) {
  for (auto [n, expected] : {std::pair{50, std::vector<int>{128, 178, 228, 278}},
                             std::pair{25, std::vector<int>{103, 128, 153, 178}}}) {
    auto pools = make_pools(78, 600);
    StubBackend backend([](int round, int run) { return 1.0 / round + 0.01 * run; });
    SslConfig cfg{4, 3, n};
    auto out = train_semi_supervised(pools, cfg, backend, 7);
    ASSERT_EQ(out.rounds.size(), 4u);
    for (int r = 0; r < 4; ++r) {
      for (int k = 0; k < 3; ++k) EXPECT_EQ(out.runs[r * 3 + k].training_size, expected[r]) << n;
    }
    EXPECT_EQ(out.stop, SslStop::rounds_exhausted);
    EXPECT_EQ(static_cast<int>(pools.labeled.size()), 78 + 4 * n);
    EXPECT_EQ(static_cast<int>(pools.unlabeled.size()), 600 - 4 * n);
    EXPECT_TRUE(backend.finished);
  }
}

TEST(SelfTraining, ArgminRunIsTransferred) {
  auto pools = make_pools(10, 40);
  const std::vector<double> losses{0.5, 0.2, 0.9, 0.2};
  StubBackend backend([&](int, int run) { return losses[static_cast<std::size_t>(run)]; });
  std::vector<SslRunRecord> seen;
  auto out = train_semi_supervised(pools, {1, 4, 6}, backend, 3,
                                   [&](const SslRunRecord& r) { seen.push_back(r); });
  ASSERT_EQ(seen.size(), 4u);
  ASSERT_EQ(out.rounds.size(), 1u);
  EXPECT_EQ(out.rounds[0].best_run, 2);  // first of the tied minima
  EXPECT_DOUBLE_EQ(out.rounds[0].min_val_loss, 0.2);
  EXPECT_EQ(backend.adopted, std::vector<int>{1});
  ASSERT_EQ(pools.labeled.size(), 16u);
  std::vector<std::string> moved;
  for (std::size_t i = 10; i < pools.labeled.size(); ++i) {
    const auto& s = pools.labeled[i];
    moved.push_back(s.image.name());
    // pseudo-label travels with the image
    EXPECT_EQ(s.mask.at(0, 0), (s.image.name().back() - '0') % 4);
  }
  std::sort(moved.begin(), moved.end());
  EXPECT_EQ(moved, seen[1].picked);
  EXPECT_EQ(pools.unlabeled.size(), 34u);
  for (const auto& img : pools.unlabeled)
    EXPECT_FALSE(std::binary_search(moved.begin(), moved.end(), img.name()));
  EXPECT_NO_THROW(pools.check_disjoint());
}

TEST(SelfTraining, StopsWhenMinimumStopsImproving) {
  // mVL per round: 1.0, 0.8, 0.85 → halts after round 3 without adopting it
  const std::vector<double> per_round{1.0, 0.8, 0.85, 0.1};
  auto pools = make_pools(5, 100);
  StubBackend backend([&](int round, int run) { return per_round[round - 1] + 0.1 * run; });
  auto out = train_semi_supervised(pools, {10, 2, 5}, backend, 1);
  EXPECT_EQ(out.stop, SslStop::no_improvement);
  ASSERT_EQ(out.rounds.size(), 3u);
  EXPECT_TRUE(out.rounds[1].improved);
  EXPECT_FALSE(out.rounds[2].improved);
  EXPECT_EQ(backend.adopted.size(), 2u);
  EXPECT_DOUBLE_EQ(out.tracked_val_loss, 0.8);
  EXPECT_EQ(backend.rounds_begun, (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(backend.finished);
}

TEST(SelfTraining, NeverExceedsRoundBudget) {
  auto pools = make_pools(5, 100);
  StubBackend backend([](int round, int) { return 1.0 / round; });
  auto out = train_semi_supervised(pools, {3, 2, 5}, backend, 1);
  EXPECT_EQ(out.rounds.size(), 3u);
  EXPECT_EQ(out.stop, SslStop::rounds_exhausted);
}

TEST(SelfTraining, PoolUnderflow) {
  auto small = make_pools(5, 10);
  StubBackend b1([](int, int) { return 1.0; });
  EXPECT_THROW(train_semi_supervised(small, {2, 2, 11}, b1, 0), PoolUnderflowError);
  // enough for one round only
  auto pools = make_pools(5, 12);
  StubBackend b2([](int round, int) { return 1.0 / round; });
  auto out = train_semi_supervised(pools, {5, 2, 8}, b2, 0);
  EXPECT_EQ(out.rounds.size(), 1u);
  EXPECT_EQ(out.stop, SslStop::pool_exhausted);
  EXPECT_EQ(pools.unlabeled.size(), 4u);
}

TEST(SelfTraining, SameSeedSamePicks) {
  auto run = [](std::uint64_t seed) {
    auto pools = make_pools(5, 60);
    StubBackend b([](int round, int run) { return 1.0 / round + 0.01 * run; });
    std::vector<std::vector<std::string>> picks;
    train_semi_supervised(pools, {3, 3, 7}, b, seed,
                          [&](const SslRunRecord& r) { picks.push_back(r.picked); });
    return picks;
  };
  const auto a = run(42);
  EXPECT_EQ(a, run(42));
  EXPECT_NE(a, run(43));
  for (const auto& names : a) {
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), 7u);
  }
}

TEST(SelfTraining, PoolsStayDisjointAndConserved) {
  auto pools = make_pools(8, 50);
  StubBackend backend([](int round, int run) { return 1.0 / round + 0.01 * run; });
  auto out = train_semi_supervised(pools, {4, 2, 5}, backend, 9);
  EXPECT_NO_THROW(pools.check_disjoint());
  EXPECT_EQ(pools.labeled.size() + pools.unlabeled.size(), 58u);
  EXPECT_TRUE(pools.picked.empty());
  for (const auto& r : out.rounds) EXPECT_EQ(r.labeled_after + r.unlabeled_after, 58);
  for (std::size_t i = 1; i < out.rounds.size(); ++i)
    EXPECT_EQ(out.rounds[i].labeled_after - out.rounds[i - 1].labeled_after, 5);
  const auto csv = out.round_log_csv();
  EXPECT_NE(csv.find("round"), std::string::npos);
}

TEST(SelfTraining, OverlappingPoolsRejected) {
  auto pools = make_pools(3, 10);
  pools.unlabeled.push_back(RgbImage(4, 4, "lab0000"));
  StubBackend b([](int, int) { return 1.0; });
  EXPECT_THROW(train_semi_supervised(pools, {1, 1, 2}, b, 0), std::logic_error);
}

// ---- checkpoints and weights ----------------------------------------------------------

TEST(Checkpoint, WriteReadRoundTrip) {
  auto dir = scratch("ckpt");
  torch::manual_seed(2);
  HybridSegmenter a(ModelConfig::tiny());
  CheckpointInfo info{7, 0.25, 0.6, "abcdef0123456789"};
  write_checkpoint(dir, a, info);
  EXPECT_TRUE(fs::exists(dir / "model.pt"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint.json"));
  for (const auto& e : fs::directory_iterator(dir))
    EXPECT_EQ(e.path().extension().string().find("tmp"), std::string::npos) << e.path();

  torch::manual_seed(3);
  HybridSegmenter b(ModelConfig::tiny());
  auto back = read_checkpoint(dir, b);
  EXPECT_EQ(back.epoch, 7);
  EXPECT_DOUBLE_EQ(back.best_val_loss, 0.25);
  EXPECT_EQ(back.config_hash, info.config_hash);
  auto sa = snapshot_state(*a);
  auto sb = snapshot_state(*b);
  for (const auto& [k, v] : sa) EXPECT_TRUE(torch::equal(v, sb.at(k))) << k;
  EXPECT_EQ(read_checkpoint_model_config(dir).to_json(), ModelConfig::tiny().to_json());
}

TEST(Checkpoint, OverwriteKeepsSingleCheckpoint) {
  auto dir = scratch("ckpt2");
  HybridSegmenter m(ModelConfig::tiny());
  write_checkpoint(dir, m, {1, 0.9, 0.1, "x"});
  write_checkpoint(dir, m, {2, 0.8, 0.2, "x"});
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 2);
  HybridSegmenter n(ModelConfig::tiny());
  EXPECT_EQ(read_checkpoint(dir, n).epoch, 2);
}

TEST(Checkpoint, MismatchedModelAndMissingDir) {
  auto dir = scratch("ckpt3");
  HybridSegmenter m(ModelConfig::tiny());
  write_checkpoint(dir, m, {1, 0.5, 0.5, "x"});
  auto other_cfg = ModelConfig::tiny();
  other_cfg.se_mode = SeMode::none;
  HybridSegmenter other(other_cfg);
  EXPECT_THROW(read_checkpoint(dir, other), CheckpointError);
  EXPECT_THROW(read_checkpoint(dir / "nope", m), CheckpointError);
}

TEST(Weights, SnapshotRestoreAndArchive) {
  torch::manual_seed(4);
  HybridSegmenter a(ModelConfig::tiny());
  HybridSegmenter b(ModelConfig::tiny());
  restore_state(*b, snapshot_state(*a));
  auto x = torch::randn({1, 3, 64, 64});
  a->eval();
  b->eval();
  torch::NoGradGuard g;
  EXPECT_TRUE(torch::equal(a->forward(x), b->forward(x)));
  auto dir = scratch("weights");
  save_weights(*a, dir / "w.pt");
  HybridSegmenter c(ModelConfig::tiny());
  load_weights(*c, dir / "w.pt");
  c->eval();
  EXPECT_TRUE(torch::equal(a->forward(x), c->forward(x)));
}

TEST(Weights, PickledEncoderDictWithPrefix) {
  torch::manual_seed(5);
  MitEncoder source(MitConfig::tiny());
  c10::Dict<std::string, torch::Tensor> dict;
  for (const auto& [k, v] : snapshot_state(*source)) dict.insert("backbone." + k, v);
  dict.insert("backbone.extra_head.weight", torch::zeros({3}));
  auto bytes = torch::pickle_save(c10::IValue(dict));
  auto dir = scratch("pickle");
  {
    std::ofstream os(dir / "enc.pth", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  MitEncoder target(MitConfig::tiny());
  auto report = load_matching_weights(*target, dir / "enc.pth", "backbone.");
  EXPECT_TRUE(report.missing.empty());
  EXPECT_TRUE(report.mismatched.empty());
  EXPECT_EQ(report.loaded.size(), snapshot_state(*source).size());
  auto ss = snapshot_state(*source);
  for (const auto& [k, v] : snapshot_state(*target)) EXPECT_TRUE(torch::equal(v, ss.at(k))) << k;
}

// ---- experiment config -----------------------------------------------------------------

TEST(ExperimentConfigTest, JsonRoundTripAndHash) {
  ExperimentConfig c;
  c.model = ModelConfig::tiny();
  c.seed = 11;
  auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
  auto d = c;
  d.train.weight_decay = 1e-3;
  EXPECT_NE(d.hash(), c.hash());
  auto moved = c;
  moved.output_dir = "/elsewhere";
  EXPECT_EQ(moved.hash(), c.hash());
  EXPECT_EQ(back.train.seed, 11u);
}

TEST(ExperimentConfigTest, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(to_hex(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
  EXPECT_EQ(to_hex(1), "0000000000000001");
}

TEST(ExperimentConfigTest, PresetStringsAndBadValues) {
  auto c = ExperimentConfig::from_json({{"model", "tiny"}, {"train", {{"epochs", 3}, {"patience", 2}}}});
  EXPECT_EQ(c.model.to_json(), ModelConfig::tiny().to_json());
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_THROW(ExperimentConfig::from_json({{"train", {{"epochs", 3}, {"patience", 5}}}}),
               ConfigError);
}

// ---- real training on a tiny model ---------------------------------------------------------

TEST(Supervised, ShortRunWritesCheckpointAndHistory) {
  auto dir = scratch("train");
  torch::manual_seed(6);
  HybridSegmenter model(ModelConfig::tiny());
  auto train = tiny_set(4, 1);
  auto val = tiny_set(2, 2);
  auto cfg = small_cfg(3, 3);
  cfg.batch_size = 2;
  cfg.oversample_factor = 1;
  TrainOptions opt;
  opt.checkpoint_dir = dir;
  opt.config_hash = "cafe";
  int callbacks = 0;
  opt.on_epoch = [&](const EpochStats&) { ++callbacks; };
  auto res = train_supervised(model, train, val, cfg, LossConfig{}, opt);
  EXPECT_EQ(res.history.size(), 3u);
  EXPECT_EQ(callbacks, 3);
  EXPECT_GE(res.checkpoint.epoch, 1);
  for (const auto& h : res.history) {
    EXPECT_TRUE(std::isfinite(h.train_loss));
    EXPECT_GE(h.val_iou, 0.0);
    EXPECT_LE(h.val_iou, 1.0);
  }
  HybridSegmenter reloaded(ModelConfig::tiny());
  EXPECT_EQ(read_checkpoint(dir, reloaded).config_hash, "cafe");
  // the model holds the best weights at the end
  auto e1 = evaluate(model, val, LossConfig{}, LossKind::supervised, 2);
  auto e2 = evaluate(reloaded, val, LossConfig{}, LossKind::supervised, 2);
  EXPECT_NEAR(e1.loss, e2.loss, 1e-6);
  EXPECT_NEAR(e1.loss, res.checkpoint.best_val_loss, 1e-5);
}

TEST(Supervised, EmptySetsRejected) {
  HybridSegmenter model(ModelConfig::tiny());
  auto some = tiny_set(2, 1);
  EXPECT_THROW(train_supervised(model, {}, some, small_cfg(1, 1), LossConfig{}), EmptyDatasetError);
  EXPECT_THROW(train_supervised(model, some, {}, small_cfg(1, 1), LossConfig{}), EmptyDatasetError);
  EXPECT_THROW(evaluate(model, {}, LossConfig{}, LossKind::supervised, 2), EmptyDatasetError);
}

TEST(Supervised, EvaluationOfPerfectModelIsPerfect) {
  // A prediction equal to ground truth gives IoU 1; check through predict_masks
  torch::manual_seed(7);
  HybridSegmenter model(ModelConfig::tiny());
  auto val = tiny_set(2, 3);
  std::vector<RgbImage> imgs{val[0].image, val[1].image};
  auto preds = predict_masks(model, imgs, 1);
  ASSERT_EQ(preds.size(), 2u);
  std::vector<LabeledSample> self{{val[0].image, preds[0]}, {val[1].image, preds[1]}};
  auto e = evaluate(model, self, LossConfig{}, LossKind::supervised, 2);
  EXPECT_DOUBLE_EQ(e.iou, 1.0);
  EXPECT_DOUBLE_EQ(e.dsc, 1.0);
}
