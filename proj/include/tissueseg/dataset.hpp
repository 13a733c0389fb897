#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tissueseg/errors.hpp"
#include "tissueseg/image.hpp"

namespace tissueseg {

struct SplitSpec {
  int train_count = 0;
  int val_count = 0;
  int test_count = 0;
  std::uint64_t seed = 0;

  int total() const { return train_count + val_count + test_count; }

  /// 70:15:15 with validation and test each floor(0.15·total); training takes the rest.
  static SplitSpec from_default_ratio(int total, std::uint64_t seed);
};

template <class T>
struct Splits {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

/// Deterministic shuffle-and-cut. Throws CountMismatchError when the split spec does
/// not account for every item.
template <class T>
Splits<T> make_splits(std::vector<T> items, const SplitSpec& spec) {
  if (spec.train_count < 0 || spec.val_count < 0 || spec.test_count < 0) {
    throw CountMismatchError("split counts must be non-negative");
  }
  if (static_cast<std::size_t>(spec.total()) != items.size()) {
    throw CountMismatchError("split counts sum to " + std::to_string(spec.total()) +
                             " but there are " + std::to_string(items.size()) + " items");
  }
  std::mt19937_64 rng(spec.seed);
  std::shuffle(items.begin(), items.end(), rng);
  Splits<T> out;
  auto it = std::make_move_iterator(items.begin());
  out.train.assign(it, it + spec.train_count);
  it += spec.train_count;
  out.val.assign(it, it + spec.val_count);
  it += spec.val_count;
  out.test.assign(it, it + spec.test_count);
  return out;
}

/// Mutable state of the pseudo-label self-training loop.
struct DatasetPools {
  std::vector<LabeledSample> labeled;                  // L
  std::vector<RgbImage> unlabeled;                     // U
  std::map<std::string, TissueMask> pseudo_labels;     // T1
  std::vector<LabeledSample> picked;                   // T2
  std::vector<std::vector<std::string>> picked_names;  // R
  std::vector<double> run_val_losses;                  // VL
  double tracked_val_loss = std::numeric_limits<double>::infinity();  // TV

  /// Throws std::logic_error if L, U and T2 share an image name, or if a
  /// pseudo-label refers to an image outside U ∪ T2.
  void check_disjoint() const;
};

struct TissueDistribution {
  std::array<int, kNumTissueClasses> images{};
  std::array<double, kNumTissueClasses> image_percent{};
  std::array<std::uint64_t, kNumTissueClasses> pixels{};
  std::array<double, kNumTissueClasses> pixel_percent{};
  int image_count = 0;
  std::uint64_t pixel_count = 0;
};

/// Per-class occurrence (images containing the class) and pixel share.
TissueDistribution tissue_distribution(const std::vector<TissueMask>& masks);

}  // namespace tissueseg
