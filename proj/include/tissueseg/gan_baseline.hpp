#pragma once

#include <cstdint>

#include <json.hpp>
#include <torch/torch.h>

#include "tissueseg/losses.hpp"
#include "tissueseg/pscse_decoder.hpp"

namespace tissueseg {

/// Weights of the adversarial semi-supervised baseline. Named apart from the
/// λ₁..λ₃ of the pseudo-label loss.
struct GanLossWeights {
  double lambda_adv_supervised = 0.01;
  double lambda_adv_semi = 0.1;
  double t_semi = 0.2;
  double log_clamp = 1e-7;

  void validate() const;
  nlohmann::json to_json() const;
  static GanLossWeights from_json(const nlohmann::json& j);
};

// Confidence maps are discriminator outputs in (0, 1) with shape [B, 1, H, W].
// Spatial sums are averaged over the batch.

/// −Σ_{h,w} log D(G(x)).
torch::Tensor adversarial_loss(const torch::Tensor& confidence, double log_clamp = 1e-7);

/// Pixel-mean BCE(real, 1) + pixel-mean BCE(fake, 0).
torch::Tensor discriminator_loss(const torch::Tensor& real_confidence,
                                 const torch::Tensor& fake_confidence, double log_clamp = 1e-7);

torch::Tensor gan_supervised_total(const torch::Tensor& ce_loss, const torch::Tensor& adv_loss,
                                   double lambda_adv);

/// −Σ_{h,w} Σ_c 1[conf > T] · ŷ log p : cross-entropy against pseudo-labels
/// restricted to pixels the discriminator trusts.
torch::Tensor masked_semi_ce(const torch::Tensor& probs, const torch::Tensor& pseudo_targets,
                             const torch::Tensor& confidence, double t_semi,
                             double log_clamp = 1e-7);

/// Spatially summed (batch-averaged) cross-entropy; the unmasked reference for masked_semi_ce.
torch::Tensor summed_cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets,
                                   double log_clamp = 1e-7);

torch::Tensor gan_semi_total(const torch::Tensor& masked_ce, const torch::Tensor& adv_loss,
                             double lambda_adv);

/// Argmax one-hot of a probability map, detached.
torch::Tensor pseudo_targets_from_probs(const torch::Tensor& probs);

/// Channel concatenation of an image and a (predicted or ground-truth) class
/// map, the discriminator's input.
torch::Tensor discriminator_pair(const torch::Tensor& image, const torch::Tensor& class_map);

/// Five strided 4×4 convolutions (LeakyReLU between), logits upsampled to the
/// input size and squashed to a per-pixel confidence map.
class FcnDiscriminatorImpl : public torch::nn::Module {
 public:
  FcnDiscriminatorImpl(std::int64_t in_channels, std::int64_t base_width = 64);

  torch::Tensor forward(const torch::Tensor& pair);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(FcnDiscriminator);

struct AdversarialStepLosses {
  double segmentation = 0.0;
  double discriminator = 0.0;
  double semi = 0.0;
};

/// One update of the adversarial baseline: generator on a labeled batch
/// (CE + λ·adv), discriminator on real/fake pairs, then, when an unlabeled
/// batch is given, generator on confident pseudo-labels with the
/// discriminator frozen.
AdversarialStepLosses adversarial_step(HybridSegmenter& generator,
                                       FcnDiscriminator& discriminator,
                                       torch::optim::Optimizer& generator_opt,
                                       torch::optim::Optimizer& discriminator_opt,
                                       const torch::Tensor& images, const torch::Tensor& labels,
                                       const torch::Tensor& unlabeled_images,
                                       const GanLossWeights& weights);

}  // namespace tissueseg
