#pragma once

#include <json.hpp>
#include <torch/torch.h>

namespace tissueseg {

struct LossConfig {
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_smooth = 1.0;  // ε_d, added to numerator and denominator per class
  double log_clamp = 1e-7;   // ε_c, lower bound for every log argument
  double lambda_dice = 1.0;
  double lambda_focal = 1.0;
  double lambda_dce = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static LossConfig from_json(const nlohmann::json& j);
};

// All losses take per-pixel probabilities [B, C, H, W] (softmax output) and
// targets of the same shape (one-hot unless stated otherwise) and return a
// scalar tensor, differentiable with respect to the probabilities.

/// [B, H, W] integer labels → [B, C, H, W] one-hot in `dtype`.
torch::Tensor one_hot(const torch::Tensor& labels, std::int64_t num_classes,
                      torch::ScalarType dtype = torch::kFloat);

/// 1 − (2Σp·y + ε)/(Σp + Σy + ε) per (image, class), averaged over both.
torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                        double smooth);

/// Pixel mean of −α(1 − p_t)^γ log(p_t), p_t = probability of the true class.
torch::Tensor focal_loss(const torch::Tensor& probs, const torch::Tensor& targets, double gamma,
                         double alpha, double log_clamp = 1e-7);

/// Pixel mean of −Σ_c y log p.
torch::Tensor cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets,
                            double log_clamp = 1e-7);

/// Per-pixel confidence w = max_c p, shape [B, H, W].
torch::Tensor dynamic_weights(const torch::Tensor& probs);

/// Pixel mean of −[w Σ_c y log p + (1 − w) Σ_c p log y], logs clamped to
/// [ε_c, 1]. Targets may be hard one-hot pseudo-labels or soft distributions;
/// with hard labels the reverse term charges log ε_c for probability mass
/// placed off the pseudo-label.
torch::Tensor dynamic_cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets,
                                    double log_clamp = 1e-7);

/// Dice + focal.
torch::Tensor supervised_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                              const LossConfig& cfg);

/// λ₁·dice + λ₂·focal + λ₃·DCE.
torch::Tensor semi_supervised_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                                   const LossConfig& cfg);

}  // namespace tissueseg
