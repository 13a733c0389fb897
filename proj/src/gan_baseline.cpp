#include "tissueseg/gan_baseline.hpp"

#include "tissueseg/errors.hpp"

namespace tissueseg {

namespace F = torch::nn::functional;

void GanLossWeights::validate() const {
  if (!(t_semi > 0.0 && t_semi < 1.0)) throw ConfigError("t_semi must lie in (0, 1)");
  if (!(log_clamp > 0.0 && log_clamp < 1.0)) throw ConfigError("gan log_clamp must be in (0, 1)");
}

nlohmann::json GanLossWeights::to_json() const {
  return {{"lambda_adv_supervised", lambda_adv_supervised},
          {"lambda_adv_semi", lambda_adv_semi},
          {"t_semi", t_semi},
          {"log_clamp", log_clamp}};
}

GanLossWeights GanLossWeights::from_json(const nlohmann::json& j) {
  GanLossWeights w;
  w.lambda_adv_supervised = j.value("lambda_adv_supervised", w.lambda_adv_supervised);
  w.lambda_adv_semi = j.value("lambda_adv_semi", w.lambda_adv_semi);
  w.t_semi = j.value("t_semi", w.t_semi);
  w.log_clamp = j.value("log_clamp", w.log_clamp);
  w.validate();
  return w;
}

namespace {

void check_confidence(const torch::Tensor& conf) {
  if (conf.dim() != 4 || conf.size(1) != 1) throw ShapeError("confidence map must be [B, 1, H, W]");
}

torch::Tensor spatial_sum_batch_mean(const torch::Tensor& per_pixel) {
  // [B, ...] → mean over batch of the per-image sum.
  return per_pixel.flatten(1).sum(1).mean();
}

}  // namespace

torch::Tensor adversarial_loss(const torch::Tensor& confidence, double log_clamp) {
  check_confidence(confidence);
  return spatial_sum_batch_mean(-torch::log(confidence.clamp(log_clamp, 1.0)));
}

torch::Tensor discriminator_loss(const torch::Tensor& real_confidence,
                                 const torch::Tensor& fake_confidence, double log_clamp) {
  check_confidence(real_confidence);
  check_confidence(fake_confidence);
  auto real_term = -torch::log(real_confidence.clamp(log_clamp, 1.0)).mean();
  auto fake_term = -torch::log((1.0 - fake_confidence).clamp(log_clamp, 1.0)).mean();
  return real_term + fake_term;
}

torch::Tensor gan_supervised_total(const torch::Tensor& ce_loss, const torch::Tensor& adv_loss,
                                   double lambda_adv) {
  return ce_loss + lambda_adv * adv_loss;
}

torch::Tensor masked_semi_ce(const torch::Tensor& probs, const torch::Tensor& pseudo_targets,
                             const torch::Tensor& confidence, double t_semi, double log_clamp) {
  check_confidence(confidence);
  if (probs.dim() != 4 || probs.sizes() != pseudo_targets.sizes() ||
      confidence.size(0) != probs.size(0) || confidence.size(2) != probs.size(2) ||
      confidence.size(3) != probs.size(3)) {
    throw ShapeError("masked_semi_ce: incompatible probs / targets / confidence shapes");
  }
  auto trusted = (confidence > t_semi).to(probs.dtype());  // [B, 1, H, W]
  auto per_pixel = -(pseudo_targets * torch::log(probs.clamp(log_clamp, 1.0))).sum(1, true);
  return spatial_sum_batch_mean(trusted * per_pixel);
}

torch::Tensor summed_cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets,
                                   double log_clamp) {
  if (probs.dim() != 4 || probs.sizes() != targets.sizes()) {
    throw ShapeError("summed_cross_entropy: shape mismatch");
  }
  return spatial_sum_batch_mean(-(targets * torch::log(probs.clamp(log_clamp, 1.0))).sum(1));
}

torch::Tensor gan_semi_total(const torch::Tensor& masked_ce, const torch::Tensor& adv_loss,
                             double lambda_adv) {
  return masked_ce + lambda_adv * adv_loss;
}

torch::Tensor pseudo_targets_from_probs(const torch::Tensor& probs) {
  auto labels = probs.detach().argmax(1);
  return one_hot(labels, probs.size(1), probs.scalar_type());
}

torch::Tensor discriminator_pair(const torch::Tensor& image, const torch::Tensor& class_map) {
  if (image.dim() != 4 || class_map.dim() != 4 || image.size(0) != class_map.size(0) ||
      image.size(2) != class_map.size(2) || image.size(3) != class_map.size(3)) {
    throw ShapeError("discriminator pair needs matching batch and spatial sizes");
  }
  return torch::cat({image, class_map.to(image.dtype())}, 1);
}

FcnDiscriminatorImpl::FcnDiscriminatorImpl(std::int64_t in_channels, std::int64_t base_width) {
  torch::nn::Sequential seq;
  std::int64_t in = in_channels;
  for (int i = 0; i < 4; ++i) {
    const std::int64_t out = base_width << i;
    seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    seq->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 4).stride(2).padding(1)));
  body_ = register_module("body", seq);
}

torch::Tensor FcnDiscriminatorImpl::forward(const torch::Tensor& pair) {
  auto logits = body_->forward(pair);
  logits = F::interpolate(logits, F::InterpolateFuncOptions()
                                      .size(std::vector<std::int64_t>{pair.size(2), pair.size(3)})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
  return torch::sigmoid(logits);
}

AdversarialStepLosses adversarial_step(HybridSegmenter& generator,
                                       FcnDiscriminator& discriminator,
                                       torch::optim::Optimizer& generator_opt,
                                       torch::optim::Optimizer& discriminator_opt,
                                       const torch::Tensor& images, const torch::Tensor& labels,
                                       const torch::Tensor& unlabeled_images,
                                       const GanLossWeights& weights) {
  AdversarialStepLosses out;
  const auto classes = generator->config().num_classes;
  generator->train();
  discriminator->train();

  // Generator, supervised: CE + λ·adv.
  generator_opt.zero_grad();
  auto probs = torch::softmax(generator->forward(images), 1);
  auto targets = one_hot(labels, classes, probs.scalar_type());
  auto fake_conf = discriminator->forward(discriminator_pair(images, probs));
  auto seg = gan_supervised_total(cross_entropy(probs, targets, weights.log_clamp),
                                  adversarial_loss(fake_conf, weights.log_clamp),
                                  weights.lambda_adv_supervised);
  seg.backward();
  generator_opt.step();
  out.segmentation = seg.item<double>();

  // Discriminator: ground-truth pairs are real, predictions are fake.
  discriminator_opt.zero_grad();
  auto real = discriminator->forward(discriminator_pair(images, targets));
  auto fake = discriminator->forward(discriminator_pair(images, probs.detach()));
  auto d_loss = discriminator_loss(real, fake, weights.log_clamp);
  d_loss.backward();
  discriminator_opt.step();
  out.discriminator = d_loss.item<double>();

  if (unlabeled_images.defined() && unlabeled_images.numel() > 0) {
    generator_opt.zero_grad();
    for (auto& p : discriminator->parameters()) p.set_requires_grad(false);
    auto u_probs = torch::softmax(generator->forward(unlabeled_images), 1);
    auto conf = discriminator->forward(discriminator_pair(unlabeled_images, u_probs));
    auto semi = gan_semi_total(
        masked_semi_ce(u_probs, pseudo_targets_from_probs(u_probs), conf.detach(), weights.t_semi,
                       weights.log_clamp),
        adversarial_loss(conf, weights.log_clamp), weights.lambda_adv_semi);
    semi.backward();
    generator_opt.step();
    for (auto& p : discriminator->parameters()) p.set_requires_grad(true);
    out.semi = semi.item<double>();
  }
  return out;
}

}  // namespace tissueseg
