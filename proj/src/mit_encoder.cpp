#include "tissueseg/mit_encoder.hpp"

#include <cmath>

#include "tissueseg/errors.hpp"

namespace tissueseg {

namespace F = torch::nn::functional;

MitConfig MitConfig::b3() { return MitConfig{}; }

MitConfig MitConfig::tiny() {
  MitConfig c;
  c.embed_dims = {8, 16, 24, 32};
  c.depths = {1, 1, 1, 1};
  c.heads = {1, 2, 3, 4};
  c.drop_path_rate = 0.0;
  return c;
}

void MitConfig::validate() const {
  if (in_channels < 1) throw ConfigError("encoder needs at least one input channel");
  for (int s = 0; s < 4; ++s) {
    const auto stage = std::to_string(s + 1);
    if (patch_stride[s] < 1 || patch_stride[s] >= patch_kernel[s]) {
      throw GeometryError("stage " + stage + ": patch stride must be in [1, kernel)");
    }
    if (patch_padding[s] < 0) throw GeometryError("stage " + stage + ": negative padding");
    if (embed_dims[s] < 1 || heads[s] < 1 || embed_dims[s] % heads[s] != 0) {
      throw ConfigError("stage " + stage + ": embed dim must be a positive multiple of heads");
    }
    if (reduction_ratios[s] < 1) throw ConfigError("stage " + stage + ": reduction ratio < 1");
    if (depths[s] < 0) throw ConfigError("stage " + stage + ": negative depth");
  }
  if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be positive");
  if (drop_path_rate < 0.0 || drop_path_rate >= 1.0) {
    throw ConfigError("drop_path_rate must be in [0, 1)");
  }
}

nlohmann::json MitConfig::to_json() const {
  return {{"in_channels", in_channels},
          {"embed_dims", embed_dims},
          {"depths", depths},
          {"heads", heads},
          {"reduction_ratios", reduction_ratios},
          {"patch_kernel", patch_kernel},
          {"patch_stride", patch_stride},
          {"patch_padding", patch_padding},
          {"mlp_ratio", mlp_ratio},
          {"drop_path_rate", drop_path_rate},
          {"layer_norm_eps", layer_norm_eps}};
}

MitConfig MitConfig::from_json(const nlohmann::json& j) {
  MitConfig c;
  if (j.is_string()) {
    const auto preset = j.get<std::string>();
    if (preset == "b3") return b3();
    if (preset == "tiny") return tiny();
    throw ConfigError("unknown encoder preset '" + preset + "'");
  }
  if (j.contains("preset")) c = from_json(j.at("preset"));
  c.in_channels = j.value("in_channels", c.in_channels);
  c.embed_dims = j.value("embed_dims", c.embed_dims);
  c.depths = j.value("depths", c.depths);
  c.heads = j.value("heads", c.heads);
  c.reduction_ratios = j.value("reduction_ratios", c.reduction_ratios);
  c.patch_kernel = j.value("patch_kernel", c.patch_kernel);
  c.patch_stride = j.value("patch_stride", c.patch_stride);
  c.patch_padding = j.value("patch_padding", c.patch_padding);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.drop_path_rate = j.value("drop_path_rate", c.drop_path_rate);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.validate();
  return c;
}

std::int64_t conv_output_size(std::int64_t input, std::int64_t kernel, std::int64_t stride,
                              std::int64_t padding) {
  const std::int64_t span = input + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

// ---------------------------------------------------------------------------

OverlapPatchEmbedImpl::OverlapPatchEmbedImpl(std::int64_t in_channels, std::int64_t out_channels,
                                             std::int64_t kernel, std::int64_t stride,
                                             std::int64_t padding, double eps)
    : kernel_(kernel), stride_(stride), padding_(padding) {
  if (stride < 1 || stride >= kernel) {
    throw GeometryError("overlapping patches need 1 <= stride < kernel (stride " +
                        std::to_string(stride) + ", kernel " + std::to_string(kernel) + ")");
  }
  proj_ = register_module(
      "proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, kernel)
                                    .stride(stride)
                                    .padding(padding)));
  norm_ = register_module(
      "norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({out_channels}).eps(eps)));
}

PatchTokens OverlapPatchEmbedImpl::forward(const torch::Tensor& x) {
  TORCH_CHECK(x.dim() == 4, "patch embedding expects [B, C, H, W]");
  const auto h = conv_output_size(x.size(2), kernel_, stride_, padding_);
  const auto w = conv_output_size(x.size(3), kernel_, stride_, padding_);
  if (h < 1 || w < 1) {
    throw GeometryError("input " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                        " too small for the patch kernel");
  }
  auto y = proj_->forward(x);                  // [B, C, H', W']
  auto tokens = y.flatten(2).transpose(1, 2);  // [B, N, C]
  return {norm_->forward(tokens), h, w};
}

// ---------------------------------------------------------------------------

EfficientSelfAttentionImpl::EfficientSelfAttentionImpl(std::int64_t dim, std::int64_t heads,
                                                       std::int64_t reduction, double eps)
    : dim_(dim), heads_(heads), reduction_(reduction) {
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError("embedding dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (reduction < 1) throw ConfigError("reduction ratio must be >= 1");
  q_ = register_module("q", torch::nn::Linear(dim, dim));
  kv_ = register_module("kv", torch::nn::Linear(dim, 2 * dim));
  proj_ = register_module("proj", torch::nn::Linear(dim, dim));
  if (reduction > 1) {
    reduce_ = register_module("reduce", torch::nn::Linear(dim * reduction, dim));
    reduce_norm_ = register_module(
        "reduce_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(eps)));
  }
}

std::int64_t EfficientSelfAttentionImpl::reduced_length(std::int64_t n) const {
  return (n + reduction_ - 1) / reduction_;
}

torch::Tensor EfficientSelfAttentionImpl::forward(const torch::Tensor& tokens) {
  return forward_with_weights(tokens).output;
}

AttentionOutput EfficientSelfAttentionImpl::forward_with_weights(const torch::Tensor& tokens) {
  TORCH_CHECK(tokens.dim() == 3, "attention expects [B, N, C]");
  const auto b = tokens.size(0);
  const auto n = tokens.size(1);
  if (tokens.size(2) != dim_) {
    throw ShapeError("attention built for C=" + std::to_string(dim_) + " got C=" +
                     std::to_string(tokens.size(2)));
  }
  const auto head_dim = dim_ / heads_;

  auto q = q_->forward(tokens).view({b, n, heads_, head_dim}).permute({0, 2, 1, 3});

  torch::Tensor source = tokens;
  const auto m = reduced_length(n);
  if (reduction_ > 1) {
    const auto pad = m * reduction_ - n;
    if (pad > 0) {
      // Padding never fills a whole group, so every reduced position holds at
      // least one real token and no key needs masking.
      source = torch::cat({source, torch::zeros({b, pad, dim_}, source.options())}, 1);
    }
    source = reduce_norm_->forward(reduce_->forward(source.reshape({b, m, dim_ * reduction_})));
  }
  auto kv = kv_->forward(source).view({b, m, 2, heads_, head_dim}).permute({2, 0, 3, 1, 4});
  auto k = kv[0];
  auto v = kv[1];

  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim));
  auto weights = torch::softmax(scores, -1);  // [B, h, N, M]
  auto out = torch::matmul(weights, v).transpose(1, 2).reshape({b, n, dim_});
  return {proj_->forward(out), weights};
}

// ---------------------------------------------------------------------------

MixFfnImpl::MixFfnImpl(std::int64_t dim, std::int64_t hidden) : hidden_(hidden) {
  fc1_ = register_module("fc1", torch::nn::Linear(dim, hidden));
  dwconv_ = register_module(
      "dwconv",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, hidden, 3).padding(1).groups(hidden)));
  fc2_ = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor MixFfnImpl::transform(const torch::Tensor& tokens, std::int64_t height,
                                    std::int64_t width) {
  TORCH_CHECK(tokens.dim() == 3, "Mix-FFN expects [B, N, C]");
  const auto b = tokens.size(0);
  const auto n = tokens.size(1);
  if (n != height * width) {
    throw ShapeError("token count " + std::to_string(n) + " != " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  auto x = fc1_->forward(tokens);
  x = x.transpose(1, 2).reshape({b, hidden_, height, width});
  x = dwconv_->forward(x).flatten(2).transpose(1, 2);
  return fc2_->forward(torch::gelu(x));
}

torch::Tensor MixFfnImpl::forward(const torch::Tensor& tokens, std::int64_t height,
                                  std::int64_t width) {
  return transform(tokens, height, width) + tokens;
}

// ---------------------------------------------------------------------------

MitBlockImpl::MitBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t reduction,
                           double mlp_ratio, double drop_path, double eps)
    : drop_path_(drop_path) {
  norm1_ = register_module("norm1",
                           torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(eps)));
  attn_ = register_module("attn", EfficientSelfAttention(dim, heads, reduction));
  norm2_ = register_module("norm2",
                           torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(eps)));
  ffn_ = register_module(
      "ffn", MixFfn(dim, static_cast<std::int64_t>(std::llround(static_cast<double>(dim) * mlp_ratio))));
}

torch::Tensor MitBlockImpl::drop_path(const torch::Tensor& x) {
  if (!is_training() || drop_path_ <= 0.0) return x;
  const double keep = 1.0 - drop_path_;
  auto mask = torch::empty({x.size(0), 1, 1}, x.options()).bernoulli_(keep);
  return x * mask / keep;
}

torch::Tensor MitBlockImpl::forward(const torch::Tensor& tokens, std::int64_t height,
                                    std::int64_t width) {
  auto x = tokens + drop_path(attn_->forward(norm1_->forward(tokens)));
  return x + drop_path(ffn_->transform(norm2_->forward(x), height, width));
}

// ---------------------------------------------------------------------------

MitEncoderImpl::MitEncoderImpl(MitConfig config) : config_(std::move(config)) {
  config_.validate();
  std::int64_t total_blocks = 0;
  for (auto d : config_.depths) total_blocks += d;
  std::int64_t block_index = 0;
  std::int64_t in_ch = config_.in_channels;
  for (int s = 0; s < 4; ++s) {
    const auto dim = config_.embed_dims[s];
    const auto prefix = "stage" + std::to_string(s + 1);
    auto& stage = stages_[s];
    stage.embed = register_module(
        prefix + "_embed", OverlapPatchEmbed(in_ch, dim, config_.patch_kernel[s],
                                             config_.patch_stride[s], config_.patch_padding[s]));
    for (std::int64_t i = 0; i < config_.depths[s]; ++i, ++block_index) {
      // Stochastic depth grows linearly with block index.
      const double dp = total_blocks > 1 ? config_.drop_path_rate * static_cast<double>(block_index) /
                                               static_cast<double>(total_blocks - 1)
                                         : 0.0;
      stage.blocks.push_back(register_module(
          prefix + "_block" + std::to_string(i),
          MitBlock(dim, config_.heads[s], config_.reduction_ratios[s], config_.mlp_ratio, dp,
                   config_.layer_norm_eps)));
    }
    stage.norm = register_module(
        prefix + "_norm",
        torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(config_.layer_norm_eps)));
    in_ch = dim;
  }
  initialize_weights(*this);
}

MitBlock& MitEncoderImpl::block(int stage, int index) {
  return stages_.at(static_cast<std::size_t>(stage)).blocks.at(static_cast<std::size_t>(index));
}

FeaturePyramid MitEncoderImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != config_.in_channels) {
    throw ShapeError("encoder expects [B, " + std::to_string(config_.in_channels) + ", H, W]");
  }
  std::int64_t total_stride = 1;
  for (auto s : config_.patch_stride) total_stride *= s;
  if (image.size(2) % total_stride != 0 || image.size(3) % total_stride != 0) {
    throw DimensionError("input " + std::to_string(image.size(2)) + "x" +
                         std::to_string(image.size(3)) + " is not divisible by " +
                         std::to_string(total_stride));
  }
  FeaturePyramid out;
  torch::Tensor x = image;
  for (int s = 0; s < 4; ++s) {
    auto& stage = stages_[s];
    auto [tokens, h, w] = stage.embed->forward(x);
    for (auto& blk : stage.blocks) tokens = blk->forward(tokens, h, w);
    tokens = stage.norm->forward(tokens);
    x = tokens.transpose(1, 2).reshape({tokens.size(0), tokens.size(2), h, w});
    out[s] = x;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void trunc_normal_(torch::Tensor& t, double std) {
  torch::NoGradGuard guard;
  // Inverse-CDF sampling restricted to [-2σ, 2σ].
  const double lo = std::erf(-2.0 / std::sqrt(2.0));
  const double hi = std::erf(2.0 / std::sqrt(2.0));
  t.uniform_(lo, hi).erfinv_().mul_(std * std::sqrt(2.0)).clamp_(-2.0 * std, 2.0 * std);
}

}  // namespace

void initialize_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  module.apply([](torch::nn::Module& m) {
    if (auto* linear = dynamic_cast<torch::nn::LinearImpl*>(&m)) {
      trunc_normal_(linear->weight, 0.02);
      if (linear->bias.defined()) linear->bias.zero_();
    } else if (auto* conv = dynamic_cast<torch::nn::Conv2dImpl*>(&m)) {
      const auto& opt = conv->options;
      const auto k = (*opt.kernel_size())[0] * (*opt.kernel_size())[1];
      const double fan_out = static_cast<double>(k * opt.out_channels() / opt.groups());
      conv->weight.normal_(0.0, std::sqrt(2.0 / fan_out));
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* ln = dynamic_cast<torch::nn::LayerNormImpl*>(&m)) {
      if (ln->weight.defined()) ln->weight.fill_(1.0);
      if (ln->bias.defined()) ln->bias.zero_();
    } else if (auto* bn = dynamic_cast<torch::nn::BatchNorm2dImpl*>(&m)) {
      if (bn->weight.defined()) bn->weight.fill_(1.0);
      if (bn->bias.defined()) bn->bias.zero_();
    }
  });
}

}  // namespace tissueseg
