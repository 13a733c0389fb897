#include "tissueseg/dataset.hpp"

#include <set>
#include <stdexcept>

namespace tissueseg {

SplitSpec SplitSpec::from_default_ratio(int total, std::uint64_t seed) {
  if (total < 0) throw CountMismatchError("dataset size must be non-negative");
  const int held_out = (total * 15) / 100;
  return {total - 2 * held_out, held_out, held_out, seed};
}

void DatasetPools::check_disjoint() const {
  std::set<std::string> seen;
  auto claim = [&](const std::string& name, const char* pool) {
    if (!seen.insert(name).second) {
      throw std::logic_error(std::string("image '") + name + "' appears twice (last in " + pool +
                             ")");
    }
  };
  for (const auto& s : labeled) claim(s.image.name(), "L");
  for (const auto& img : unlabeled) claim(img.name(), "U");
  for (const auto& s : picked) claim(s.image.name(), "T2");

  std::set<std::string> candidates;
  for (const auto& img : unlabeled) candidates.insert(img.name());
  for (const auto& s : picked) candidates.insert(s.image.name());
  for (const auto& [name, mask] : pseudo_labels) {
    if (!candidates.contains(name)) {
      throw std::logic_error("pseudo-label '" + name + "' has no unlabeled image");
    }
  }
}

TissueDistribution tissue_distribution(const std::vector<TissueMask>& masks) {
  TissueDistribution d;
  d.image_count = static_cast<int>(masks.size());
  for (const auto& m : masks) {
    std::array<std::uint64_t, 256> hist{};
    for (auto v : m.data()) ++hist[v];
    for (int c = 0; c < kNumTissueClasses; ++c) {
      if (hist[c] > 0) ++d.images[c];
      d.pixels[c] += hist[c];
    }
    d.pixel_count += m.data().size();
  }
  for (int c = 0; c < kNumTissueClasses; ++c) {
    d.image_percent[c] = d.image_count ? 100.0 * d.images[c] / d.image_count : 0.0;
    d.pixel_percent[c] =
        d.pixel_count ? 100.0 * static_cast<double>(d.pixels[c]) / d.pixel_count : 0.0;
  }
  return d;
}

}  // namespace tissueseg
