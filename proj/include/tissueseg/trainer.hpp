#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "tissueseg/augmentation.hpp"
#include "tissueseg/dataset.hpp"
#include "tissueseg/losses.hpp"
#include "tissueseg/pscse_decoder.hpp"
#include "tissueseg/weights.hpp"

namespace tissueseg {

enum class SchedulerKind { reduce_on_plateau, polynomial };
enum class OptimizerKind { adam, sgd };
enum class LossKind { supervised, semi_supervised };

const char* scheduler_name(SchedulerKind k);
const char* optimizer_name(OptimizerKind k);
SchedulerKind parse_scheduler(const std::string& s);
OptimizerKind parse_optimizer(const std::string& s);

struct TrainConfig {
  int epochs = 500;
  int batch_size = 16;
  int patience = 50;
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;  // L2 regularization through the optimizer
  SchedulerKind scheduler = SchedulerKind::reduce_on_plateau;
  OptimizerKind optimizer = OptimizerKind::adam;
  double plateau_factor = 0.1;
  int plateau_patience = 10;
  double poly_power = 0.9;
  double sgd_momentum = 0.9;
  /// Copies per training pair containing fibrin or callus (1 disables).
  int oversample_factor = 2;
  bool augment = true;
  std::uint64_t seed = 0;

  static std::vector<double> weight_decay_grid() { return {1e-2, 1e-3, 1e-4, 1e-5}; }

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Outer rounds E, inner runs K, images picked per run n.
struct SslConfig {
  int rounds = 10;
  int runs = 5;
  int pick = 50;

  void validate() const;
  nlohmann::json to_json() const;
  static SslConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_iou = 0.0;
  double learning_rate = 0.0;
};

struct CheckpointInfo {
  int epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double best_val_iou = 0.0;
  std::string config_hash;

  nlohmann::json to_json() const;
  static CheckpointInfo from_json(const nlohmann::json& j);
};

/// Patience counter that resets whenever validation loss falls or IoU rises.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  struct Decision {
    bool loss_improved = false;
    bool iou_improved = false;
    bool improved() const { return loss_improved || iou_improved; }
  };

  Decision update(double val_loss, double val_iou);
  bool should_stop() const { return stale_epochs_ >= patience_; }
  double best_loss() const { return best_loss_; }
  double best_iou() const { return best_iou_; }

 private:
  int patience_;
  int stale_epochs_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  double best_iou_ = -std::numeric_limits<double>::infinity();
};

/// One epoch of training plus validation; the fit loop owns the stopping and
/// checkpointing policy so it can be exercised with stub runners.
class EpochRunner {
 public:
  virtual ~EpochRunner() = default;
  virtual EpochStats run_epoch(int epoch) = 0;
  virtual void save_checkpoint(const CheckpointInfo& info) = 0;
};

struct FitResult {
  CheckpointInfo checkpoint;
  /// Lowest validation loss seen in any epoch.
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<EpochStats> history;
  bool early_stopped = false;
};

/// Runs epochs 1..cfg.epochs, checkpointing whenever validation loss decreases
/// or IoU increases, and stopping after `patience` epochs with neither.
/// Throws NonFiniteLossError if a loss is NaN or infinite.
FitResult fit(EpochRunner& runner, const TrainConfig& cfg,
              const std::function<void(const EpochStats&)>& on_epoch = {});

struct TrainOptions {
  LossKind loss = LossKind::supervised;
  AugmentationPipeline pipeline = AugmentationPipeline::make_default();
  /// When set, model.pt + checkpoint.json are (re)written here on every improvement.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::string config_hash;
  std::function<void(const EpochStats&)> on_epoch;
};

struct EvalStats {
  double loss = 0.0;
  double iou = 0.0;  // micro IoU over foreground classes
  double dsc = 0.0;
};

/// Loss and foreground IoU/DSC of a model on a labeled set (eval mode, no grad).
EvalStats evaluate(HybridSegmenter& model, const std::vector<LabeledSample>& samples,
                   const LossConfig& loss_cfg, LossKind loss, int batch_size);

/// Trains `model` in place and leaves it holding the best checkpoint's weights.
/// Throws EmptyDatasetError for empty sets.
FitResult train_supervised(HybridSegmenter& model, const std::vector<LabeledSample>& train_set,
                           const std::vector<LabeledSample>& val_set, const TrainConfig& cfg,
                           const LossConfig& loss_cfg, const TrainOptions& options = {});

void write_checkpoint(const std::filesystem::path& dir, HybridSegmenter& model,
                      const CheckpointInfo& info);
/// Loads a checkpoint written by write_checkpoint into a freshly built model.
/// Throws CheckpointError when the stored model config differs from the model's.
CheckpointInfo read_checkpoint(const std::filesystem::path& dir, HybridSegmenter& model);
ModelConfig read_checkpoint_model_config(const std::filesystem::path& dir);

struct SearchRow {
  TrainConfig config;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

struct SearchResult {
  TrainConfig best;
  std::vector<SearchRow> rows;

  std::string to_csv() const;
};

std::vector<TrainConfig> make_grid(const TrainConfig& base, const std::vector<double>& weight_decays,
                                   const std::vector<SchedulerKind>& schedulers,
                                   const std::vector<OptimizerKind>& optimizers);

/// Exhaustive search: evaluates `objective` (best validation loss) for every
/// config and returns the first minimizer.
SearchResult hyperparameter_search(const std::vector<TrainConfig>& grid,
                                   const std::function<double(const TrainConfig&)>& objective);

std::vector<TissueMask> predict_masks(HybridSegmenter& model, const std::vector<RgbImage>& images,
                                      int batch_size = 8);

/// Argmax pseudo-label per unlabeled image, keyed by image name.
std::map<std::string, TissueMask> generate_pseudo_labels(HybridSegmenter& model,
                                                         const std::vector<RgbImage>& unlabeled,
                                                         int batch_size = 8);

// ---------------------------------------------------------------------------
// Pseudo-label self-training.

/// Model operations the self-training loop needs; stubs substitute for tests.
class SelfTrainingBackend {
 public:
  virtual ~SelfTrainingBackend() = default;
  /// Predict labels for every unlabeled image with the current model.
  virtual std::map<std::string, TissueMask> pseudo_label(const std::vector<RgbImage>& images) = 0;
  /// Remember the weights every run of this round starts from.
  virtual void begin_round(int round) = 0;
  /// Train from the round's starting weights; return the best validation loss.
  virtual double train_run(const std::vector<LabeledSample>& training_set, int round, int run) = 0;
  /// Make run `run` (0-based) of the current round the current model.
  virtual void adopt_run(int run) = 0;
  /// Called once on exit; leaves the last adopted model in place.
  virtual void finish() {}
};

struct SslRunRecord {
  int round = 0;  // 1-based
  int run = 0;    // 1-based
  int training_size = 0;
  std::vector<std::string> picked;
  double best_val_loss = 0.0;
};

struct SslRoundRecord {
  int round = 0;
  int best_run = 0;  // 1-based
  double min_val_loss = 0.0;
  double tracked_before = 0.0;
  bool improved = false;
  int labeled_after = 0;
  int unlabeled_after = 0;
};

enum class SslStop { rounds_exhausted, no_improvement, pool_exhausted };
const char* ssl_stop_name(SslStop s);

struct SslOutcome {
  std::vector<SslRunRecord> runs;
  std::vector<SslRoundRecord> rounds;
  SslStop stop = SslStop::rounds_exhausted;
  double tracked_val_loss = std::numeric_limits<double>::infinity();

  /// round,run,training_size,best_val_loss,picked (names joined by ';').
  std::string round_log_csv() const;
};

/// The pseudo-label self-training loop. Each round pseudo-labels U, runs K
/// trainings on L ∪ (n random pseudo-labeled images), moves the images of the
/// run with the lowest validation loss from U into L, and stops once that loss
/// no longer beats the tracked best. Throws PoolUnderflowError if |U| < n at
/// the first round; a later shortfall ends the loop (SslStop::pool_exhausted).
SslOutcome train_semi_supervised(DatasetPools& pools, const SslConfig& cfg,
                                 SelfTrainingBackend& backend, std::uint64_t seed,
                                 const std::function<void(const SslRunRecord&)>& on_run = {});

/// Backend over a real segmenter: every run restarts from the round's weights
/// and trains with the semi-supervised loss.
class SegmenterSelfTraining : public SelfTrainingBackend {
 public:
  SegmenterSelfTraining(HybridSegmenter model, std::vector<LabeledSample> val_set,
                        TrainConfig train_cfg, LossConfig loss_cfg, AugmentationPipeline pipeline);

  std::map<std::string, TissueMask> pseudo_label(const std::vector<RgbImage>& images) override;
  void begin_round(int round) override;
  double train_run(const std::vector<LabeledSample>& training_set, int round, int run) override;
  void adopt_run(int run) override;
  void finish() override;

  HybridSegmenter& model() { return model_; }
  /// Best validation IoU of the adopted run (0 before any adoption).
  double adopted_val_iou() const { return adopted_iou_; }

 private:
  HybridSegmenter model_;
  std::vector<LabeledSample> val_set_;
  TrainConfig train_cfg_;
  LossConfig loss_cfg_;
  AugmentationPipeline pipeline_;
  StateDict round_start_;
  StateDict adopted_;
  std::map<int, StateDict> run_states_;
  std::map<int, double> run_ious_;
  double adopted_iou_ = 0.0;
};

}  // namespace tissueseg
