#include "tissueseg/config.hpp"

#include <cstdio>
#include <fstream>

#include "tissueseg/errors.hpp"

namespace tissueseg {

void ExperimentConfig::validate() const {
  model.validate();
  loss.validate();
  train.validate();
  ssl.validate();
  gan.validate();
  if (!(overlay_opacity >= 0.0 && overlay_opacity <= 1.0))
    throw ConfigError("overlay_opacity must lie in [0, 1]");
}

nlohmann::json ExperimentConfig::to_json() const {
  // train.seed always follows the master seed
  auto train_json = train.to_json();
  train_json["seed"] = seed;
  return {{"dataset_dir", dataset_dir},
          {"output_dir", output_dir},
          {"pretrained_encoder", pretrained_encoder},
          {"model", model.to_json()},
          {"loss", loss.to_json()},
          {"train", train_json},
          {"ssl", ssl.to_json()},
          {"gan", gan.to_json()},
          {"augmentation", augmentation.to_json()},
          {"overlay_opacity", overlay_opacity},
          {"seed", seed}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.dataset_dir = j.value("dataset_dir", c.dataset_dir);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.pretrained_encoder = j.value("pretrained_encoder", c.pretrained_encoder);
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("loss")) c.loss = LossConfig::from_json(j.at("loss"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("ssl")) c.ssl = SslConfig::from_json(j.at("ssl"));
    if (j.contains("gan")) c.gan = GanLossWeights::from_json(j.at("gan"));
    if (j.contains("augmentation")) c.augmentation = AugmentationPipeline::from_json(j.at("augmentation"));
    c.overlay_opacity = j.value("overlay_opacity", c.overlay_opacity);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string ExperimentConfig::hash() const {
  // where a run writes to is not part of what it computes
  auto j = to_json();
  j.erase("output_dir");
  return to_hex(fnv1a64(j.dump()));
}

}  // namespace tissueseg
