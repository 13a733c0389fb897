#include "tissueseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "tissueseg/errors.hpp"
#include "tissueseg/io.hpp"
#include "tissueseg/metrics.hpp"
#include "tissueseg/tensors.hpp"

namespace tissueseg {

namespace fs = std::filesystem;

const char* scheduler_name(SchedulerKind k) {
  return k == SchedulerKind::reduce_on_plateau ? "plateau" : "poly";
}

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

SchedulerKind parse_scheduler(const std::string& s) {
  if (s == "plateau" || s == "reduce_on_plateau") return SchedulerKind::reduce_on_plateau;
  if (s == "poly" || s == "polynomial") return SchedulerKind::polynomial;
  throw ConfigError("unknown scheduler '" + s + "' (expected plateau or poly)");
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (patience > epochs) throw ConfigError("patience must not exceed epochs");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
    throw ConfigError("plateau_factor must lie in (0, 1)");
  if (plateau_patience < 0) throw ConfigError("plateau_patience must be >= 0");
  if (!(poly_power > 0.0)) throw ConfigError("poly_power must be positive");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ConfigError("sgd_momentum must lie in [0, 1)");
  if (oversample_factor < 1) throw ConfigError("oversample_factor must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"patience", patience},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"scheduler", scheduler_name(scheduler)},
          {"optimizer", optimizer_name(optimizer)},
          {"plateau_factor", plateau_factor},
          {"plateau_patience", plateau_patience},
          {"poly_power", poly_power},
          {"sgd_momentum", sgd_momentum},
          {"oversample_factor", oversample_factor},
          {"augment", augment},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("scheduler")) c.scheduler = parse_scheduler(j.at("scheduler").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.poly_power = j.value("poly_power", c.poly_power);
  c.sgd_momentum = j.value("sgd_momentum", c.sgd_momentum);
  c.oversample_factor = j.value("oversample_factor", c.oversample_factor);
  c.augment = j.value("augment", c.augment);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void SslConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (pick < 1) throw ConfigError("pick must be >= 1");
}

nlohmann::json SslConfig::to_json() const {
  return {{"rounds", rounds}, {"runs", runs}, {"pick", pick}};
}

SslConfig SslConfig::from_json(const nlohmann::json& j) {
  SslConfig c;
  c.rounds = j.value("rounds", c.rounds);
  c.runs = j.value("runs", c.runs);
  c.pick = j.value("pick", c.pick);
  c.validate();
  return c;
}

nlohmann::json CheckpointInfo::to_json() const {
  return {{"epoch", epoch},
          {"best_val_loss", best_val_loss},
          {"best_val_iou", best_val_iou},
          {"config_hash", config_hash}};
}

CheckpointInfo CheckpointInfo::from_json(const nlohmann::json& j) {
  CheckpointInfo c;
  c.epoch = j.at("epoch").get<int>();
  c.best_val_loss = j.at("best_val_loss").get<double>();
  c.best_val_iou = j.at("best_val_iou").get<double>();
  c.config_hash = j.value("config_hash", std::string{});
  return c;
}

EarlyStopping::Decision EarlyStopping::update(double val_loss, double val_iou) {
  Decision d;
  d.loss_improved = val_loss < best_loss_;
  d.iou_improved = val_iou > best_iou_;
  if (d.loss_improved) best_loss_ = val_loss;
  if (d.iou_improved) best_iou_ = val_iou;
  stale_epochs_ = d.improved() ? 0 : stale_epochs_ + 1;
  return d;
}

FitResult fit(EpochRunner& runner, const TrainConfig& cfg,
              const std::function<void(const EpochStats&)>& on_epoch) {
  cfg.validate();
  FitResult result;
  EarlyStopping stopper(cfg.patience);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto stats = runner.run_epoch(epoch);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw NonFiniteLossError("non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    result.best_val_loss = std::min(result.best_val_loss, stats.val_loss);
    if (stopper.update(stats.val_loss, stats.val_iou).improved()) {
      CheckpointInfo info;
      info.epoch = epoch;
      info.best_val_loss = stopper.best_loss();
      info.best_val_iou = stopper.best_iou();
      runner.save_checkpoint(info);
      result.checkpoint = info;
    }
    if (stopper.should_stop()) {
      result.early_stopped = epoch < cfg.epochs;
      break;
    }
  }
  return result;
}

namespace {

torch::Tensor loss_for(LossKind kind, const torch::Tensor& probs, const torch::Tensor& targets,
                       const LossConfig& cfg) {
  return kind == LossKind::supervised ? supervised_loss(probs, targets, cfg)
                                      : semi_supervised_loss(probs, targets, cfg);
}

std::unique_ptr<torch::optim::Optimizer> make_optimizer(HybridSegmenter& model,
                                                        const TrainConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::adam) {
    return std::make_unique<torch::optim::Adam>(
        model->parameters(),
        torch::optim::AdamOptions(cfg.learning_rate).weight_decay(cfg.weight_decay));
  }
  return std::make_unique<torch::optim::SGD>(model->parameters(),
                                             torch::optim::SGDOptions(cfg.learning_rate)
                                                 .momentum(cfg.sgd_momentum)
                                                 .weight_decay(cfg.weight_decay));
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& g : opt.param_groups()) g.options().set_lr(lr);
}

double current_lr(torch::optim::Optimizer& opt) {
  return opt.param_groups().front().options().get_lr();
}

class SegmenterRunner : public EpochRunner {
 public:
  SegmenterRunner(HybridSegmenter& model, std::vector<LabeledSample> train,
                  const std::vector<LabeledSample>& val, const TrainConfig& cfg,
                  const LossConfig& loss_cfg, const TrainOptions& options)
      : model_(model),
        train_(std::move(train)),
        val_(val),
        cfg_(cfg),
        loss_cfg_(loss_cfg),
        options_(options),
        optimizer_(make_optimizer(model, cfg)) {
    if (cfg.scheduler == SchedulerKind::reduce_on_plateau) {
      plateau_ = std::make_unique<torch::optim::ReduceLROnPlateauScheduler>(
          *optimizer_, torch::optim::ReduceLROnPlateauScheduler::min,
          static_cast<float>(cfg.plateau_factor), cfg.plateau_patience);
    }
  }

  EpochStats run_epoch(int epoch) override {
    if (cfg_.scheduler == SchedulerKind::polynomial) {
      const double progress = static_cast<double>(epoch - 1) / cfg_.epochs;
      set_lr(*optimizer_, cfg_.learning_rate * std::pow(1.0 - progress, cfg_.poly_power));
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.learning_rate = current_lr(*optimizer_);

    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    model_->train();
    double loss_sum = 0.0;
    std::size_t seen = 0;
    const auto batch = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      std::vector<RgbImage> images;
      std::vector<TissueMask> masks;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& s = train_[order[i]];
        if (cfg_.augment) {
          std::mt19937_64 rng(derive_seed(cfg_.seed ^ 0x5eedULL,
                                          static_cast<std::uint64_t>(epoch) * 1000003ULL + i));
          auto aug = apply(options_.pipeline, s.image, s.mask, rng);
          images.push_back(std::move(aug.image));
          masks.push_back(std::move(aug.mask));
        } else {
          images.push_back(s.image);
          masks.push_back(s.mask);
        }
      }
      auto x = images_to_tensor(images);
      auto targets = tissueseg::one_hot(masks_to_tensor(masks), model_->config().num_classes);
      optimizer_->zero_grad();
      auto probs = torch::softmax(model_->forward(x), 1);
      auto loss = loss_for(options_.loss, probs, targets, loss_cfg_);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        throw NonFiniteLossError("non-finite training loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at " + std::to_string(start));
      }
      loss.backward();
      optimizer_->step();
      loss_sum += value * static_cast<double>(images.size());
      seen += images.size();
    }
    stats.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;

    const auto ev = evaluate(model_, val_, loss_cfg_, options_.loss, cfg_.batch_size);
    stats.val_loss = ev.loss;
    stats.val_iou = ev.iou;
    if (plateau_ && std::isfinite(ev.loss)) plateau_->step(static_cast<float>(ev.loss));
    return stats;
  }

  void save_checkpoint(const CheckpointInfo& info) override {
    best_ = snapshot_state(*model_);
    if (options_.checkpoint_dir) {
      auto stamped = info;
      stamped.config_hash = options_.config_hash;
      write_checkpoint(*options_.checkpoint_dir, model_, stamped);
    }
  }

  const StateDict& best() const { return best_; }

 private:
  HybridSegmenter& model_;
  std::vector<LabeledSample> train_;
  const std::vector<LabeledSample>& val_;
  TrainConfig cfg_;
  LossConfig loss_cfg_;
  const TrainOptions& options_;
  std::unique_ptr<torch::optim::Optimizer> optimizer_;
  std::unique_ptr<torch::optim::ReduceLROnPlateauScheduler> plateau_;
  StateDict best_;
};

}  // namespace

EvalStats evaluate(HybridSegmenter& model, const std::vector<LabeledSample>& samples,
                   const LossConfig& loss_cfg, LossKind loss, int batch_size) {
  if (samples.empty()) throw EmptyDatasetError("nothing to evaluate");
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  const auto classes = model->config().num_classes;
  double loss_sum = 0.0;
  ConfusionCounts total(static_cast<int>(classes));
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto stop = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const RgbImage*> images;
    std::vector<const TissueMask*> masks;
    for (std::size_t i = start; i < stop; ++i) {
      images.push_back(&samples[i].image);
      masks.push_back(&samples[i].mask);
    }
    auto probs = torch::softmax(model->forward(images_to_tensor(images)), 1);
    auto targets = tissueseg::one_hot(masks_to_tensor(masks), classes);
    loss_sum += loss_for(loss, probs, targets, loss_cfg).item<double>() *
                static_cast<double>(images.size());
    auto preds = tensor_to_masks(probs.argmax(1), static_cast<int>(classes));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      total += confusion_counts(preds[i], *masks[i], static_cast<int>(classes));
    }
  }
  if (was_training) model->train();

  // Foreground micro figures; a set with no foreground anywhere counts as perfect.
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (int c = 1; c < total.num_classes(); ++c) {
    tp += total.tp[c];
    fp += total.fp[c];
    fn += total.fn[c];
  }
  const auto m = metrics_from_counts(tp, fp, fn, AbsentClassPolicy::perfect);
  EvalStats out;
  out.loss = loss_sum / static_cast<double>(samples.size());
  out.iou = m.iou;
  out.dsc = m.dsc;
  return out;
}

FitResult train_supervised(HybridSegmenter& model, const std::vector<LabeledSample>& train_set,
                           const std::vector<LabeledSample>& val_set, const TrainConfig& cfg,
                           const LossConfig& loss_cfg, const TrainOptions& options) {
  cfg.validate();
  loss_cfg.validate();
  if (train_set.empty()) throw EmptyDatasetError("training set is empty");
  if (val_set.empty()) throw EmptyDatasetError("validation set is empty");
  torch::manual_seed(cfg.seed);

  auto expanded = cfg.oversample_factor > 1
                      ? minority_oversample(train_set, options.pipeline, cfg.oversample_factor,
                                            derive_seed(cfg.seed, 0x0a5eULL))
                      : train_set;
  SegmenterRunner runner(model, std::move(expanded), val_set, cfg, loss_cfg, options);
  auto result = fit(runner, cfg, options.on_epoch);
  if (!runner.best().empty()) restore_state(*model, runner.best());
  return result;
}

void write_checkpoint(const fs::path& dir, HybridSegmenter& model, const CheckpointInfo& info) {
  fs::create_directories(dir);
  save_weights(*model, dir / "model.pt");
  auto j = info.to_json();
  j["model"] = model->config().to_json();
  write_file_atomic(dir / "checkpoint.json", j.dump(2) + "\n");
}

namespace {

nlohmann::json read_sidecar(const fs::path& dir) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw CheckpointError("missing " + (dir / "checkpoint.json").string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint.json: " + std::string(e.what()));
  }
}

}  // namespace

ModelConfig read_checkpoint_model_config(const fs::path& dir) {
  const auto j = read_sidecar(dir);
  if (!j.contains("model")) throw CheckpointError("checkpoint.json has no model config");
  return ModelConfig::from_json(j.at("model"));
}

CheckpointInfo read_checkpoint(const fs::path& dir, HybridSegmenter& model) {
  const auto j = read_sidecar(dir);
  if (j.contains("model") && j.at("model").dump() != model->config().to_json().dump()) {
    throw CheckpointError("checkpoint was written for a different model configuration");
  }
  load_weights(*model, dir / "model.pt");
  return CheckpointInfo::from_json(j);
}

std::string SearchResult::to_csv() const {
  std::ostringstream os;
  os << "weight_decay,scheduler,optimizer,best_val_loss\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.config.weight_decay << ',' << scheduler_name(r.config.scheduler) << ','
       << optimizer_name(r.config.optimizer) << ',' << r.best_val_loss << '\n';
  }
  return os.str();
}

std::vector<TrainConfig> make_grid(const TrainConfig& base, const std::vector<double>& weight_decays,
                                   const std::vector<SchedulerKind>& schedulers,
                                   const std::vector<OptimizerKind>& optimizers) {
  std::vector<TrainConfig> grid;
  for (double wd : weight_decays) {
    for (auto s : schedulers) {
      for (auto o : optimizers) {
        auto c = base;
        c.weight_decay = wd;
        c.scheduler = s;
        c.optimizer = o;
        grid.push_back(c);
      }
    }
  }
  return grid;
}

SearchResult hyperparameter_search(const std::vector<TrainConfig>& grid,
                                   const std::function<double(const TrainConfig&)>& objective) {
  if (grid.empty()) throw ConfigError("empty hyperparameter grid");
  SearchResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = objective(grid[i]);
    out.rows.push_back({grid[i], v});
    if (v < out.rows[best].best_val_loss) best = i;
  }
  out.best = grid[best];
  return out;
}

std::vector<TissueMask> predict_masks(HybridSegmenter& model, const std::vector<RgbImage>& images,
                                      int batch_size) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<TissueMask> out;
  out.reserve(images.size());
  const auto classes = static_cast<int>(model->config().num_classes);
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto stop = std::min(images.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const RgbImage*> batch;
    for (std::size_t i = start; i < stop; ++i) batch.push_back(&images[i]);
    auto preds = tensor_to_masks(model->forward(images_to_tensor(batch)).argmax(1), classes);
    for (auto& p : preds) out.push_back(std::move(p));
  }
  if (was_training) model->train();
  return out;
}

std::map<std::string, TissueMask> generate_pseudo_labels(HybridSegmenter& model,
                                                         const std::vector<RgbImage>& unlabeled,
                                                         int batch_size) {
  auto preds = predict_masks(model, unlabeled, batch_size);
  std::map<std::string, TissueMask> out;
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    out.insert_or_assign(unlabeled[i].name(), std::move(preds[i]));
  }
  return out;
}

const char* ssl_stop_name(SslStop s) {
  switch (s) {
    case SslStop::rounds_exhausted: return "rounds_exhausted";
    case SslStop::no_improvement: return "no_improvement";
    case SslStop::pool_exhausted: return "pool_exhausted";
  }
  return "?";
}

std::string SslOutcome::round_log_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "round,run,training_size,best_val_loss,picked\n";
  for (const auto& r : runs) {
    os << r.round << ',' << r.run << ',' << r.training_size << ',' << r.best_val_loss << ',';
    for (std::size_t i = 0; i < r.picked.size(); ++i) os << (i ? ";" : "") << r.picked[i];
    os << '\n';
  }
  return os.str();
}

namespace {

void sort_by_name(std::vector<RgbImage>& images) {
  std::sort(images.begin(), images.end(),
            [](const RgbImage& a, const RgbImage& b) { return a.name() < b.name(); });
}

}  // namespace

SslOutcome train_semi_supervised(DatasetPools& pools, const SslConfig& cfg,
                                 SelfTrainingBackend& backend, std::uint64_t seed,
                                 const std::function<void(const SslRunRecord&)>& on_run) {
  cfg.validate();
  SslOutcome out;
  out.tracked_val_loss = pools.tracked_val_loss;
  const auto n = static_cast<std::size_t>(cfg.pick);
  sort_by_name(pools.unlabeled);
  pools.check_disjoint();

  for (int round = 1; round <= cfg.rounds; ++round) {
    if (pools.unlabeled.size() < n) {
      if (round == 1) {
        throw PoolUnderflowError("unlabeled pool holds " + std::to_string(pools.unlabeled.size()) +
                                 " images but " + std::to_string(n) + " are picked per run");
      }
      out.stop = SslStop::pool_exhausted;
      break;
    }
    backend.begin_round(round);
    pools.pseudo_labels = backend.pseudo_label(pools.unlabeled);
    for (const auto& img : pools.unlabeled) {
      if (!pools.pseudo_labels.count(img.name())) {
        throw std::logic_error("backend returned no pseudo-label for " + img.name());
      }
    }
    pools.picked_names.clear();
    pools.run_val_losses.clear();

    for (int run = 1; run <= cfg.runs; ++run) {
      // Sample n of U without replacement.
      std::vector<std::size_t> idx(pools.unlabeled.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(round) * 1000ULL + run));
      for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
        std::swap(idx[i], idx[d(rng)]);
      }
      idx.resize(n);
      std::sort(idx.begin(), idx.end(), std::greater<>());

      std::vector<std::string> names;
      pools.picked.clear();
      for (auto i : idx) {
        auto img = std::move(pools.unlabeled[i]);
        pools.unlabeled.erase(pools.unlabeled.begin() + static_cast<std::ptrdiff_t>(i));
        names.push_back(img.name());
        const auto& label = pools.pseudo_labels.at(img.name());
        pools.picked.push_back({std::move(img), label});
      }
      std::sort(names.begin(), names.end());
      pools.picked_names.push_back(names);
      pools.check_disjoint();

      std::vector<LabeledSample> training = pools.labeled;
      training.insert(training.end(), pools.picked.begin(), pools.picked.end());
      SslRunRecord rec;
      rec.round = round;
      rec.run = run;
      rec.training_size = static_cast<int>(training.size());
      rec.picked = names;
      rec.best_val_loss = backend.train_run(training, round, run - 1);
      pools.run_val_losses.push_back(rec.best_val_loss);
      out.runs.push_back(rec);
      if (on_run) on_run(rec);

      for (auto& s : pools.picked) pools.unlabeled.push_back(std::move(s.image));
      pools.picked.clear();
      sort_by_name(pools.unlabeled);
      pools.check_disjoint();
    }

    const auto best_it = std::min_element(pools.run_val_losses.begin(), pools.run_val_losses.end());
    const auto best_run = static_cast<int>(best_it - pools.run_val_losses.begin());
    const double min_loss = *best_it;

    // The winning run's images join L with their pseudo-labels.
    const auto& winners = pools.picked_names[static_cast<std::size_t>(best_run)];
    std::vector<RgbImage> remaining;
    for (auto& img : pools.unlabeled) {
      if (std::binary_search(winners.begin(), winners.end(), img.name())) {
        auto label = pools.pseudo_labels.at(img.name());
        pools.labeled.push_back({std::move(img), std::move(label)});
      } else {
        remaining.push_back(std::move(img));
      }
    }
    pools.unlabeled = std::move(remaining);
    pools.pseudo_labels.clear();
    pools.check_disjoint();

    SslRoundRecord rr;
    rr.round = round;
    rr.best_run = best_run + 1;
    rr.min_val_loss = min_loss;
    rr.tracked_before = pools.tracked_val_loss;
    rr.improved = pools.tracked_val_loss > min_loss;
    rr.labeled_after = static_cast<int>(pools.labeled.size());
    rr.unlabeled_after = static_cast<int>(pools.unlabeled.size());
    out.rounds.push_back(rr);
    pools.picked_names.clear();
    pools.run_val_losses.clear();

    if (!rr.improved) {
      out.stop = SslStop::no_improvement;
      break;
    }
    pools.tracked_val_loss = min_loss;
    out.tracked_val_loss = min_loss;
    backend.adopt_run(best_run);
  }
  backend.finish();
  return out;
}

SegmenterSelfTraining::SegmenterSelfTraining(HybridSegmenter model,
                                             std::vector<LabeledSample> val_set,
                                             TrainConfig train_cfg, LossConfig loss_cfg,
                                             AugmentationPipeline pipeline)
    : model_(std::move(model)),
      val_set_(std::move(val_set)),
      train_cfg_(train_cfg),
      loss_cfg_(loss_cfg),
      pipeline_(std::move(pipeline)) {
  adopted_ = snapshot_state(*model_);
}

std::map<std::string, TissueMask> SegmenterSelfTraining::pseudo_label(
    const std::vector<RgbImage>& images) {
  return generate_pseudo_labels(model_, images, train_cfg_.batch_size);
}

void SegmenterSelfTraining::begin_round(int) {
  round_start_ = snapshot_state(*model_);
  run_states_.clear();
  run_ious_.clear();
}

double SegmenterSelfTraining::train_run(const std::vector<LabeledSample>& training_set, int round,
                                        int run) {
  restore_state(*model_, round_start_);
  auto cfg = train_cfg_;
  cfg.seed = derive_seed(train_cfg_.seed, static_cast<std::uint64_t>(round) * 1000ULL + run);
  TrainOptions opts;
  opts.loss = LossKind::semi_supervised;
  opts.pipeline = pipeline_;
  auto result = train_supervised(model_, training_set, val_set_, cfg, loss_cfg_, opts);
  run_states_[run] = snapshot_state(*model_);
  run_ious_[run] = result.checkpoint.best_val_iou;
  return result.best_val_loss;
}

void SegmenterSelfTraining::adopt_run(int run) {
  adopted_ = run_states_.at(run);
  adopted_iou_ = run_ious_.at(run);
}

void SegmenterSelfTraining::finish() {
  restore_state(*model_, adopted_);
  run_states_.clear();
}

}  // namespace tissueseg
