#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "tissueseg/augmentation.hpp"
#include "tissueseg/gan_baseline.hpp"
#include "tissueseg/losses.hpp"
#include "tissueseg/pscse_decoder.hpp"
#include "tissueseg/trainer.hpp"

namespace tissueseg {

/// Everything an experiment depends on. Serialized as JSON; the hash of the
/// canonical serialization is stamped into every artifact.
struct ExperimentConfig {
  std::string dataset_dir;  // prepared dataset (output of `prepare`)
  std::string output_dir;
  /// Optional backbone weights (archive or pickled state dict).
  std::string pretrained_encoder;
  ModelConfig model = ModelConfig::b3();
  LossConfig loss;
  TrainConfig train;
  SslConfig ssl;
  GanLossWeights gan;
  AugmentationPipeline augmentation = AugmentationPipeline::make_default();
  double overlay_opacity = 0.5;
  /// Master seed; copied into train.seed.
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing sections take their defaults. The model section may be the
  /// string "b3" or "tiny".
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// 16 hex digits of FNV-1a over the canonical JSON minus output_dir.
  std::string hash() const;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string to_hex(std::uint64_t v);

}  // namespace tissueseg
