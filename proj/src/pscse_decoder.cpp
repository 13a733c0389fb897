#include "tissueseg/pscse_decoder.hpp"

#include <algorithm>

#include "tissueseg/errors.hpp"

namespace tissueseg {

namespace F = torch::nn::functional;

const char* se_mode_name(SeMode mode) {
  switch (mode) {
    case SeMode::none:
      return "none";
    case SeMode::scse:
      return "scse";
    case SeMode::pscse:
      return "pscse";
  }
  return "pscse";
}

SeMode parse_se_mode(const std::string& s) {
  if (s == "none") return SeMode::none;
  if (s == "scse") return SeMode::scse;
  if (s == "pscse" || s == "p-scse") return SeMode::pscse;
  throw ConfigError("unknown SE mode '" + s + "' (expected none, scse or pscse)");
}

ChannelSeImpl::ChannelSeImpl(std::int64_t channels, std::int64_t reduction) {
  if (channels < 1) throw ConfigError("channel SE needs at least one channel");
  const auto hidden = std::max<std::int64_t>(1, channels / std::max<std::int64_t>(1, reduction));
  squeeze_ = register_module("squeeze", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, hidden, 1)));
  excite_ = register_module("excite", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, channels, 1)));
}

torch::Tensor ChannelSeImpl::gate(const torch::Tensor& x) {
  auto pooled = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1));
  return torch::sigmoid(excite_->forward(torch::relu(squeeze_->forward(pooled))));
}

torch::Tensor ChannelSeImpl::forward(const torch::Tensor& x) { return x * gate(x); }

SpatialSeImpl::SpatialSeImpl(std::int64_t channels) {
  if (channels < 1) throw ConfigError("spatial SE needs at least one channel");
  conv_ = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 1, 1)));
}

torch::Tensor SpatialSeImpl::gate(const torch::Tensor& x) {
  return torch::sigmoid(conv_->forward(x));
}

torch::Tensor SpatialSeImpl::forward(const torch::Tensor& x) { return x * gate(x); }

ParallelScSeImpl::ParallelScSeImpl(std::int64_t channels, SeMode mode,
                                   std::int64_t maxout_threshold, std::int64_t reduction)
    : channels_(channels), mode_(mode), threshold_(maxout_threshold) {
  if (mode == SeMode::none) throw ConfigError("ParallelScSe requires scse or pscse mode");
  if (maxout_threshold < 0) throw ConfigError("max-out threshold must be >= 0");
  cse_ = register_module("cse", ChannelSe(channels, reduction));
  sse_ = register_module("sse", SpatialSe(channels));
}

bool ParallelScSeImpl::maxout_active() const {
  return mode_ == SeMode::pscse && channels_ >= threshold_;
}

torch::Tensor ParallelScSeImpl::scse(const torch::Tensor& x) { return cse(x) + sse(x); }

torch::Tensor ParallelScSeImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != channels_) {
    throw ShapeError("excitation module built for " + std::to_string(channels_) + " channels");
  }
  auto c = cse(x);
  auto s = sse(x);
  auto added = c + s;
  if (!maxout_active()) return added;
  return added + torch::maximum(c, s);
}

DecoderStageImpl::DecoderStageImpl(DecoderStageOptions options) : options_(options) {
  const auto cat_channels = options_.below_channels + options_.skip_channels;
  if (options_.below_channels < 1 || options_.skip_channels < 0 || options_.out_channels < 1) {
    throw ConfigError("decoder stage channel counts must be positive");
  }
  if (options_.se_mode != SeMode::none) {
    attention_ = register_module(
        "attention", ParallelScSe(cat_channels, options_.se_mode, options_.maxout_threshold));
  }
  conv_ = register_module(
      "conv", torch::nn::Conv2d(
                  torch::nn::Conv2dOptions(cat_channels, options_.out_channels, 3).padding(1)));
  bn_ = register_module("bn", torch::nn::BatchNorm2d(options_.out_channels));
}

torch::Tensor DecoderStageImpl::forward(const torch::Tensor& below, const torch::Tensor& skip) {
  if (below.dim() != 4 || skip.dim() != 4 || below.size(0) != skip.size(0) ||
      below.size(1) != options_.below_channels || skip.size(1) != options_.skip_channels ||
      skip.size(2) != 2 * below.size(2) || skip.size(3) != 2 * below.size(3)) {
    throw ShapeError("decoder stage expects below [B," + std::to_string(options_.below_channels) +
                     ",H,W] and skip [B," + std::to_string(options_.skip_channels) + ",2H,2W]");
  }
  auto up = F::interpolate(below, F::InterpolateFuncOptions()
                                      .size(std::vector<std::int64_t>{skip.size(2), skip.size(3)})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
  auto x = torch::cat({up, skip}, 1);
  if (!attention_.is_empty()) x = attention_->forward(x);
  x = conv_->forward(x);
  if (options_.conventional_order) return torch::relu(bn_->forward(x));
  return bn_->forward(torch::relu(x));
}

ModelConfig ModelConfig::b3() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.encoder = MitConfig::tiny();
  c.decoder_widths = {32, 24, 16};
  return c;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (maxout_threshold < 0) throw ConfigError("maxout_threshold must be >= 0");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  for (auto w : decoder_widths) {
    if (w < 1) throw ConfigError("decoder widths must be positive");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()},
          {"se_mode", se_mode_name(se_mode)},
          {"maxout_threshold", maxout_threshold},
          {"decoder_widths", decoder_widths},
          {"num_classes", num_classes},
          {"conventional_bn_order", conventional_bn_order}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.is_string()) {
    const auto preset = j.get<std::string>();
    if (preset == "b3") return b3();
    if (preset == "tiny") return tiny();
    throw ConfigError("unknown model preset '" + preset + "'");
  }
  if (j.contains("preset")) c = from_json(j.at("preset"));
  if (j.contains("encoder")) c.encoder = MitConfig::from_json(j.at("encoder"));
  if (j.contains("se_mode")) c.se_mode = parse_se_mode(j.at("se_mode").get<std::string>());
  c.maxout_threshold = j.value("maxout_threshold", c.maxout_threshold);
  c.decoder_widths = j.value("decoder_widths", c.decoder_widths);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.conventional_bn_order = j.value("conventional_bn_order", c.conventional_bn_order);
  c.validate();
  return c;
}

HybridSegmenterImpl::HybridSegmenterImpl(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  encoder_ = register_module("encoder", MitEncoder(config_.encoder));
  const auto& dims = config_.encoder.embed_dims;
  std::int64_t below = dims[3];
  for (int i = 0; i < 3; ++i) {
    DecoderStageOptions opt;
    opt.below_channels = below;
    opt.skip_channels = dims[2 - i];
    opt.out_channels = config_.decoder_widths[i];
    opt.se_mode = config_.se_mode;
    opt.maxout_threshold = config_.maxout_threshold;
    opt.conventional_order = config_.conventional_bn_order;
    stages_[i] = register_module("decoder" + std::to_string(i + 1), DecoderStage(opt));
    below = opt.out_channels;
  }
  head_ = register_module(
      "head", torch::nn::Conv2d(torch::nn::Conv2dOptions(below, config_.num_classes, 1)));
  for (auto& s : stages_) initialize_weights(*s);
  initialize_weights(*head_);
}

torch::Tensor HybridSegmenterImpl::forward(const torch::Tensor& image) {
  auto pyramid = encoder_->forward(image);
  auto x = pyramid[3];
  for (int i = 0; i < 3; ++i) x = stages_[i]->forward(x, pyramid[2 - i]);
  // 1×1 classification commutes with bilinear resampling, so classify at 1/4
  // scale and upsample the logits.
  auto logits = head_->forward(x);
  return F::interpolate(logits, F::InterpolateFuncOptions()
                                    .size(std::vector<std::int64_t>{image.size(2), image.size(3)})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
}

}  // namespace tissueseg
