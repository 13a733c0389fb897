#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tissueseg/image.hpp"

namespace tissueseg {

// Procedural stand-ins for wound photographs: rectangles of flat tissue
// colour on a skin-toned background, snapped to a block grid, plus noise.

struct SyntheticSpec {
  int height = 64;
  int width = 64;
  int block = 8;
  double noise_std = 4.0;
  /// Chance that each foreground class appears in a sample.
  double class_probability = 0.8;
};

/// Mean colour used to paint a tissue label.
Rgb tissue_appearance(int label);

LabeledSample synthetic_sample(const std::string& name, std::uint64_t seed,
                               const SyntheticSpec& spec = {});

/// `count` samples named prefix000, prefix001, ...
std::vector<LabeledSample> synthetic_set(int count, std::uint64_t seed,
                                         const SyntheticSpec& spec = {},
                                         const std::string& prefix = "syn");

/// `total` small masks in which exactly images_with_class[c] masks contain
/// class c (c ≥ 1); index 0 is ignored.
std::vector<TissueMask> occurrence_fixture(const std::array<int, kNumTissueClasses>& images_with_class,
                                           int total, std::uint64_t seed, int side = 16);

/// Writes the raw layout `prepare` consumes: images/*.png, masks/*.png
/// (palette colours) and unlabeled/*.png.
void write_raw_dataset(const std::filesystem::path& dir, const std::vector<LabeledSample>& labeled,
                       const std::vector<RgbImage>& unlabeled);

}  // namespace tissueseg
