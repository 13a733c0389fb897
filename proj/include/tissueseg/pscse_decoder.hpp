#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

#include "tissueseg/mit_encoder.hpp"

namespace tissueseg {

/// Squeeze-and-excitation variant used in every decoder stage.
enum class SeMode { none, scse, pscse };

const char* se_mode_name(SeMode mode);
SeMode parse_se_mode(const std::string& s);

inline constexpr std::int64_t kDefaultMaxoutThreshold = 32;

/// Channel excitation: global average pool → bottleneck → sigmoid gate per channel.
class ChannelSeImpl : public torch::nn::Module {
 public:
  explicit ChannelSeImpl(std::int64_t channels, std::int64_t reduction = 16);

  torch::Tensor forward(const torch::Tensor& x);
  /// Per-channel gates in (0, 1), shape [B, C, 1, 1].
  torch::Tensor gate(const torch::Tensor& x);

  torch::nn::Conv2d& squeeze() { return squeeze_; }
  torch::nn::Conv2d& excite() { return excite_; }

 private:
  torch::nn::Conv2d squeeze_{nullptr};
  torch::nn::Conv2d excite_{nullptr};
};
TORCH_MODULE(ChannelSe);

/// Spatial excitation: 1×1 convolution across channels → sigmoid gate per pixel.
class SpatialSeImpl : public torch::nn::Module {
 public:
  explicit SpatialSeImpl(std::int64_t channels);

  torch::Tensor forward(const torch::Tensor& x);
  /// Per-pixel gates in (0, 1), shape [B, 1, H, W].
  torch::Tensor gate(const torch::Tensor& x);

  torch::nn::Conv2d& conv() { return conv_; }

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(SpatialSe);

/// Parallel spatial-and-channel excitation. The additive branch is
/// cse(x) + sse(x); the max-out branch is max(cse(x), sse(x)). The branches are
/// summed, except that max-out is switched off below `maxout_threshold`
/// channels. With mode == scse only the additive branch is used.
class ParallelScSeImpl : public torch::nn::Module {
 public:
  ParallelScSeImpl(std::int64_t channels, SeMode mode,
                   std::int64_t maxout_threshold = kDefaultMaxoutThreshold,
                   std::int64_t reduction = 16);

  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor cse(const torch::Tensor& x) { return cse_->forward(x); }
  torch::Tensor sse(const torch::Tensor& x) { return sse_->forward(x); }
  torch::Tensor scse(const torch::Tensor& x);

  bool maxout_active() const;
  std::int64_t channels() const { return channels_; }
  SeMode mode() const { return mode_; }

  ChannelSe& channel_branch() { return cse_; }
  SpatialSe& spatial_branch() { return sse_; }

 private:
  std::int64_t channels_;
  SeMode mode_;
  std::int64_t threshold_;
  ChannelSe cse_{nullptr};
  SpatialSe sse_{nullptr};
};
TORCH_MODULE(ParallelScSe);

struct DecoderStageOptions {
  std::int64_t below_channels = 0;
  std::int64_t skip_channels = 0;
  std::int64_t out_channels = 0;
  SeMode se_mode = SeMode::pscse;
  std::int64_t maxout_threshold = kDefaultMaxoutThreshold;
  /// false: Conv-ReLU-BN (as drawn); true: Conv-BN-ReLU.
  bool conventional_order = false;
};

/// 2× bilinear upsample → concat skip → excitation → 3×3 conv, ReLU, BN.
class DecoderStageImpl : public torch::nn::Module {
 public:
  explicit DecoderStageImpl(DecoderStageOptions options);

  torch::Tensor forward(const torch::Tensor& below, const torch::Tensor& skip);

  bool has_attention() const { return !attention_.is_empty(); }
  ParallelScSe& attention() { return attention_; }

 private:
  DecoderStageOptions options_;
  ParallelScSe attention_{nullptr};
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
};
TORCH_MODULE(DecoderStage);

struct ModelConfig {
  MitConfig encoder = MitConfig::b3();
  SeMode se_mode = SeMode::pscse;
  std::int64_t maxout_threshold = kDefaultMaxoutThreshold;
  std::array<std::int64_t, 3> decoder_widths{256, 128, 64};
  std::int64_t num_classes = 4;
  bool conventional_bn_order = false;

  static ModelConfig b3();
  /// Tiny encoder with decoder widths (32, 24, 16).
  static ModelConfig tiny();

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Transformer encoder + convolutional decoder. Produces per-pixel class logits
/// at the input resolution: three skip stages take the pyramid from 1/32 back
/// to 1/4, then a 1×1 classifier and a 4× bilinear upsample.
class HybridSegmenterImpl : public torch::nn::Module {
 public:
  explicit HybridSegmenterImpl(ModelConfig config);

  /// [B, 3, H, W] → logits [B, num_classes, H, W]; H and W divisible by 32.
  torch::Tensor forward(const torch::Tensor& image);

  const ModelConfig& config() const { return config_; }
  MitEncoder& encoder() { return encoder_; }
  DecoderStage& stage(int i) { return stages_.at(static_cast<std::size_t>(i)); }

 private:
  ModelConfig config_;
  MitEncoder encoder_{nullptr};
  std::array<DecoderStage, 3> stages_{nullptr, nullptr, nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(HybridSegmenter);

}  // namespace tissueseg
