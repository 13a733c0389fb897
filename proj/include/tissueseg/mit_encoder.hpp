#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace tissueseg {

/// Per-stage hyperparameters of the hierarchical Mix Transformer.
struct MitConfig {
  std::int64_t in_channels = 3;
  std::array<std::int64_t, 4> embed_dims{64, 128, 320, 512};
  std::array<std::int64_t, 4> depths{3, 4, 18, 3};
  std::array<std::int64_t, 4> heads{1, 2, 5, 8};
  std::array<std::int64_t, 4> reduction_ratios{8, 4, 2, 1};
  std::array<std::int64_t, 4> patch_kernel{7, 3, 3, 3};
  std::array<std::int64_t, 4> patch_stride{4, 2, 2, 2};
  std::array<std::int64_t, 4> patch_padding{3, 1, 1, 1};
  double mlp_ratio = 4.0;
  double drop_path_rate = 0.1;
  double layer_norm_eps = 1e-6;

  /// SegFormer-b3 layout.
  static MitConfig b3();
  /// Desk-scale layout for tests: widths (8,16,24,32), one block per stage.
  static MitConfig tiny();

  /// Throws GeometryError / ConfigError on an inconsistent layout.
  void validate() const;

  nlohmann::json to_json() const;
  static MitConfig from_json(const nlohmann::json& j);
};

/// Output spatial size of a strided convolution along one axis.
std::int64_t conv_output_size(std::int64_t input, std::int64_t kernel, std::int64_t stride,
                              std::int64_t padding);

struct PatchTokens {
  torch::Tensor tokens;  // [B, N, C]
  std::int64_t height = 0;
  std::int64_t width = 0;
};

/// Strided convolution with stride < kernel (so neighbouring patches overlap),
/// flattened to a token sequence and layer-normalized.
class OverlapPatchEmbedImpl : public torch::nn::Module {
 public:
  OverlapPatchEmbedImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
                        std::int64_t stride, std::int64_t padding, double eps = 1e-5);

  PatchTokens forward(const torch::Tensor& x);

 private:
  std::int64_t kernel_;
  std::int64_t stride_;
  std::int64_t padding_;
  torch::nn::Conv2d proj_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(OverlapPatchEmbed);

struct AttentionOutput {
  torch::Tensor output;   // [B, N, C]
  torch::Tensor weights;  // [B, heads, N, ceil(N / R)]
};

/// Multi-head self-attention whose keys and values come from a sequence
/// shortened R-fold: consecutive groups of R tokens are concatenated along the
/// channel axis (N×C → N/R × C·R) and projected back to C. When N is not a
/// multiple of R the sequence is zero-padded to the next multiple first.
class EfficientSelfAttentionImpl : public torch::nn::Module {
 public:
  EfficientSelfAttentionImpl(std::int64_t dim, std::int64_t heads, std::int64_t reduction,
                             double eps = 1e-5);

  torch::Tensor forward(const torch::Tensor& tokens);
  AttentionOutput forward_with_weights(const torch::Tensor& tokens);

  /// Key/value sequence length for a query sequence of length n.
  std::int64_t reduced_length(std::int64_t n) const;
  std::int64_t heads() const { return heads_; }
  std::int64_t reduction() const { return reduction_; }

 private:
  std::int64_t dim_;
  std::int64_t heads_;
  std::int64_t reduction_;
  torch::nn::Linear q_{nullptr};
  torch::nn::Linear kv_{nullptr};
  torch::nn::Linear proj_{nullptr};
  torch::nn::Linear reduce_{nullptr};
  torch::nn::LayerNorm reduce_norm_{nullptr};
};
TORCH_MODULE(EfficientSelfAttention);

/// x + fc2(GELU(dwconv3x3(fc1(x)))) with the depthwise convolution run over the
/// token grid re-folded to H×W with zero padding.
class MixFfnImpl : public torch::nn::Module {
 public:
  MixFfnImpl(std::int64_t dim, std::int64_t hidden);

  torch::Tensor forward(const torch::Tensor& tokens, std::int64_t height, std::int64_t width);
  /// Residual-free branch; blocks add their own (pre-norm) residual.
  torch::Tensor transform(const torch::Tensor& tokens, std::int64_t height, std::int64_t width);

 private:
  std::int64_t hidden_;
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Conv2d dwconv_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(MixFfn);

class MitBlockImpl : public torch::nn::Module {
 public:
  MitBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t reduction, double mlp_ratio,
               double drop_path, double eps);

  torch::Tensor forward(const torch::Tensor& tokens, std::int64_t height, std::int64_t width);

  EfficientSelfAttention& attention() { return attn_; }

 private:
  torch::Tensor drop_path(const torch::Tensor& x);

  double drop_path_;
  torch::nn::LayerNorm norm1_{nullptr};
  EfficientSelfAttention attn_{nullptr};
  torch::nn::LayerNorm norm2_{nullptr};
  MixFfn ffn_{nullptr};
};
TORCH_MODULE(MitBlock);

/// Four feature maps at 1/4, 1/8, 1/16 and 1/32 of the input resolution.
using FeaturePyramid = std::array<torch::Tensor, 4>;

class MitEncoderImpl : public torch::nn::Module {
 public:
  explicit MitEncoderImpl(MitConfig config);

  FeaturePyramid forward(const torch::Tensor& image);

  const MitConfig& config() const { return config_; }
  MitBlock& block(int stage, int index);

 private:
  struct Stage {
    OverlapPatchEmbed embed{nullptr};
    std::vector<MitBlock> blocks;
    torch::nn::LayerNorm norm{nullptr};
  };

  MitConfig config_;
  std::array<Stage, 4> stages_;
};
TORCH_MODULE(MitEncoder);

/// Truncated-normal (±2σ) for linear weights, fan-out normal for convolutions,
/// unit/zero for normalization layers.
void initialize_weights(torch::nn::Module& module);

}  // namespace tissueseg
