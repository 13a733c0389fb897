#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tissueseg/image.hpp"

namespace tissueseg {

/// How a transform interacts with the label mask. Affine and projective
/// transforms move pixels, so the mask is resampled with the same geometry;
/// photometric transforms never touch the mask.
enum class TransformKind { affine, projective, photometric };

const char* transform_kind_name(TransformKind kind);
TransformKind parse_transform_kind(const std::string& s);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct TransformSpec {
  std::string name;
  TransformKind kind = TransformKind::photometric;
  double probability = 0.0;
  std::map<std::string, ParamRange> params;

  bool moves_pixels() const { return kind != TransformKind::photometric; }
};

struct TransformSet {
  std::vector<TransformSpec> transforms;
};

/// Ordered transform sets. Within a set each transform fires independently
/// with its own probability; later sets see the output of earlier ones.
class AugmentationPipeline {
 public:
  AugmentationPipeline() = default;
  explicit AugmentationPipeline(std::vector<TransformSet> sets);

  /// Four sets, fifteen transforms: flips and shifts favored over rotation
  /// and scaling; sets three and four are photometric except perspective.
  static AugmentationPipeline make_default();

  const std::vector<TransformSet>& sets() const { return sets_; }
  std::size_t transform_count() const;

  /// Same structure with every probability replaced.
  AugmentationPipeline with_probability(double p) const;
  /// Keeps only photometric transforms.
  AugmentationPipeline photometric_only() const;

  nlohmann::json to_json() const;
  static AugmentationPipeline from_json(const nlohmann::json& j);

 private:
  std::vector<TransformSet> sets_;
};

/// Transform names understood by apply().
const std::set<std::string>& known_transforms();

/// Applies the pipeline jointly to an image and its mask. Deterministic given
/// the generator state. Names of the transforms that fired are appended to
/// `fired` when provided.
LabeledSample apply(const AugmentationPipeline& pipeline, const RgbImage& image,
                    const TissueMask& mask, std::mt19937_64& rng,
                    std::vector<std::string>* fired = nullptr);

/// Runs a single transform unconditionally with parameters drawn from rng.
LabeledSample apply_transform(const TransformSpec& spec, const RgbImage& image,
                              const TissueMask& mask, std::mt19937_64& rng);

inline constexpr int kOversampleRetries = 5;

/// Pairs whose mask holds any target class contribute `factor` augmented
/// copies (each with its own derived generator, re-drawn up to five times if
/// augmentation removed every target pixel); other pairs are kept once as is.
std::vector<LabeledSample> minority_oversample(
    const std::vector<LabeledSample>& pairs, const AugmentationPipeline& pipeline, int factor,
    std::uint64_t seed,
    const std::set<int>& target_classes = {static_cast<int>(Tissue::fibrin),
                                           static_cast<int>(Tissue::callus)});

/// splitmix64 step; used to derive independent worker seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace tissueseg
