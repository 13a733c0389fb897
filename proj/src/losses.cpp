#include "tissueseg/losses.hpp"

#include "tissueseg/errors.hpp"

namespace tissueseg {

namespace {

void check_pair(const torch::Tensor& probs, const torch::Tensor& targets, const char* what) {
  if (probs.dim() != 4 || probs.sizes() != targets.sizes()) {
    throw ShapeError(std::string(what) + ": probs and targets must share shape [B, C, H, W]");
  }
}

torch::Tensor clamped_log(const torch::Tensor& x, double eps) { return torch::log(x.clamp(eps, 1.0)); }

}  // namespace

void LossConfig::validate() const {
  if (!(focal_gamma >= 0.0)) throw ConfigError("focal_gamma must be >= 0");
  if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) throw ConfigError("focal_alpha outside [0, 1]");
  if (!(dice_smooth > 0.0)) throw ConfigError("dice_smooth must be > 0");
  if (!(log_clamp > 0.0 && log_clamp < 1.0)) throw ConfigError("log_clamp must be in (0, 1)");
}

nlohmann::json LossConfig::to_json() const {
  return {{"focal_gamma", focal_gamma}, {"focal_alpha", focal_alpha},
          {"dice_smooth", dice_smooth}, {"log_clamp", log_clamp},
          {"lambda_dice", lambda_dice}, {"lambda_focal", lambda_focal},
          {"lambda_dce", lambda_dce}};
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
  LossConfig c;
  c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
  c.focal_alpha = j.value("focal_alpha", c.focal_alpha);
  c.dice_smooth = j.value("dice_smooth", c.dice_smooth);
  c.log_clamp = j.value("log_clamp", c.log_clamp);
  c.lambda_dice = j.value("lambda_dice", c.lambda_dice);
  c.lambda_focal = j.value("lambda_focal", c.lambda_focal);
  c.lambda_dce = j.value("lambda_dce", c.lambda_dce);
  c.validate();
  return c;
}

torch::Tensor one_hot(const torch::Tensor& labels, std::int64_t num_classes,
                      torch::ScalarType dtype) {
  if (labels.dim() != 3) throw ShapeError("one_hot expects [B, H, W] labels");
  return torch::one_hot(labels.to(torch::kLong), num_classes).permute({0, 3, 1, 2}).to(dtype);
}

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& targets, double smooth) {
  check_pair(probs, targets, "dice_loss");
  const std::vector<std::int64_t> spatial{2, 3};
  auto intersection = (probs * targets).sum(spatial);  // [B, C]
  auto denom = probs.sum(spatial) + targets.sum(spatial);
  auto dice = (2.0 * intersection + smooth) / (denom + smooth);
  return (1.0 - dice).mean();
}

torch::Tensor focal_loss(const torch::Tensor& probs, const torch::Tensor& targets, double gamma,
                         double alpha, double log_clamp) {
  check_pair(probs, targets, "focal_loss");
  auto pt = (probs * targets).sum(1);  // [B, H, W]
  auto modulating = torch::pow(1.0 - pt, gamma);
  return (-alpha * modulating * clamped_log(pt, log_clamp)).mean();
}

torch::Tensor cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets,
                            double log_clamp) {
  check_pair(probs, targets, "cross_entropy");
  return -(targets * clamped_log(probs, log_clamp)).sum(1).mean();
}

torch::Tensor dynamic_weights(const torch::Tensor& probs) {
  if (probs.dim() != 4) throw ShapeError("dynamic_weights expects [B, C, H, W]");
  return std::get<0>(probs.max(1));
}

torch::Tensor dynamic_cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets,
                                    double log_clamp) {
  check_pair(probs, targets, "dynamic_cross_entropy");
  auto w = dynamic_weights(probs);
  auto forward_term = (targets * clamped_log(probs, log_clamp)).sum(1);
  auto reverse_term = (probs * clamped_log(targets, log_clamp)).sum(1);
  return -(w * forward_term + (1.0 - w) * reverse_term).mean();
}

torch::Tensor supervised_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                              const LossConfig& cfg) {
  return dice_loss(probs, targets, cfg.dice_smooth) +
         focal_loss(probs, targets, cfg.focal_gamma, cfg.focal_alpha, cfg.log_clamp);
}

torch::Tensor semi_supervised_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                                   const LossConfig& cfg) {
  return cfg.lambda_dice * dice_loss(probs, targets, cfg.dice_smooth) +
         cfg.lambda_focal *
             focal_loss(probs, targets, cfg.focal_gamma, cfg.focal_alpha, cfg.log_clamp) +
         cfg.lambda_dce * dynamic_cross_entropy(probs, targets, cfg.log_clamp);
}

}  // namespace tissueseg
