#include "tissueseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "tissueseg/augmentation.hpp"
#include "tissueseg/errors.hpp"
#include "tissueseg/io.hpp"

namespace tissueseg {

Rgb tissue_appearance(int label) {
  switch (label) {
    case 0: return {196, 150, 126};  // skin
    case 1: return {232, 214, 120};  // fibrin: yellowish
    case 2: return {178, 34, 52};    // granulation: red
    case 3: return {120, 120, 200};  // callus, kept far from the other three
    default: throw UnknownLabelError("no appearance for label " + std::to_string(label));
  }
}

LabeledSample synthetic_sample(const std::string& name, std::uint64_t seed,
                               const SyntheticSpec& spec) {
  if (spec.height < 1 || spec.width < 1 || spec.block < 1)
    throw DimensionError("synthetic sample needs positive dimensions");
  std::mt19937_64 rng(seed);
  const int rows = std::max(1, spec.height / spec.block);
  const int cols = std::max(1, spec.width / spec.block);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(spec.height) * spec.width, 0);

  std::bernoulli_distribution present(spec.class_probability);
  for (int cls = 1; cls < kNumTissueClasses; ++cls) {
    if (!present(rng)) continue;
    std::uniform_int_distribution<int> bh(1, std::max(1, rows / 2));
    std::uniform_int_distribution<int> bw(1, std::max(1, cols / 2));
    const int h = bh(rng), w = bw(rng);
    std::uniform_int_distribution<int> r0(0, rows - h);
    std::uniform_int_distribution<int> c0(0, cols - w);
    const int top = r0(rng) * spec.block, left = c0(rng) * spec.block;
    for (int r = top; r < std::min(spec.height, top + h * spec.block); ++r) {
      for (int c = left; c < std::min(spec.width, left + w * spec.block); ++c) {
        labels[static_cast<std::size_t>(r) * spec.width + c] = static_cast<std::uint8_t>(cls);
      }
    }
  }

  std::normal_distribution<double> noise(0.0, spec.noise_std);
  std::vector<std::uint8_t> px(labels.size() * 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto base = tissue_appearance(labels[i]);
    const int ch[3] = {base.r, base.g, base.b};
    for (int k = 0; k < 3; ++k) {
      const double v = ch[k] + (spec.noise_std > 0 ? noise(rng) : 0.0);
      px[i * 3 + k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return {RgbImage(spec.height, spec.width, std::move(px), name),
          TissueMask(spec.height, spec.width, std::move(labels))};
}

std::vector<LabeledSample> synthetic_set(int count, std::uint64_t seed, const SyntheticSpec& spec,
                                         const std::string& prefix) {
  std::vector<LabeledSample> out;
  for (int i = 0; i < count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", i);
    out.push_back(synthetic_sample(prefix + buf, derive_seed(seed, static_cast<std::uint64_t>(i)), spec));
  }
  return out;
}

std::vector<TissueMask> occurrence_fixture(const std::array<int, kNumTissueClasses>& images_with_class,
                                           int total, std::uint64_t seed, int side) {
  if (total < 0 || side < 2) throw DimensionError("bad fixture size");
  std::vector<std::vector<std::uint8_t>> labels(static_cast<std::size_t>(total),
                                                std::vector<std::uint8_t>(side * side, 0));
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(total));
  for (int cls = 1; cls < kNumTissueClasses; ++cls) {
    const int k = images_with_class[cls];
    if (k < 0 || k > total) throw CountMismatchError("class count exceeds fixture size");
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    // Class c owns column band c of each mask it appears in, so classes never overwrite each other.
    const int band = side / kNumTissueClasses;
    for (int i = 0; i < k; ++i) {
      auto& m = labels[static_cast<std::size_t>(order[i])];
      for (int r = 0; r < side; ++r) {
        for (int c = cls * band; c < (cls + 1) * band && c < side; ++c) {
          m[static_cast<std::size_t>(r) * side + c] = static_cast<std::uint8_t>(cls);
        }
      }
    }
  }
  std::vector<TissueMask> out;
  for (auto& l : labels) out.emplace_back(side, side, std::move(l));
  return out;
}

void write_raw_dataset(const std::filesystem::path& dir, const std::vector<LabeledSample>& labeled,
                       const std::vector<RgbImage>& unlabeled) {
  const auto palette = ClassPalette::tissue_default();
  for (const auto& s : labeled) {
    write_rgb_png(dir / "images" / (s.image.name() + ".png"), s.image);
    write_rgb_png(dir / "masks" / (s.image.name() + ".png"), decode_mask(s.mask, palette));
  }
  for (const auto& u : unlabeled) write_rgb_png(dir / "unlabeled" / (u.name() + ".png"), u);
}

}  // namespace tissueseg
