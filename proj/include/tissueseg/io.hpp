#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tissueseg/image.hpp"

namespace tissueseg {

namespace fs = std::filesystem;

RgbImage read_rgb_png(const fs::path& path);
void write_rgb_png(const fs::path& path, const RgbImage& image);

/// Single-channel 8-bit PNG whose values are class indices.
TissueMask read_indexed_mask(const fs::path& path, int num_classes = kNumTissueClasses);
void write_indexed_mask(const fs::path& path, const TissueMask& mask);

/// PNG files in a directory, sorted by file name. Missing directory → empty.
std::vector<fs::path> list_pngs(const fs::path& dir);

/// Writes via a sibling temporary file and rename so readers never observe a
/// partially written file.
void write_file_atomic(const fs::path& path, const std::string& contents);

/// Shrinks (never enlarges) so that max(H, W) == side, keeping the aspect
/// ratio: area interpolation for the image, nearest neighbour for the mask.
RgbImage downscale_to_fit(const RgbImage& image, int side);
TissueMask downscale_to_fit(const TissueMask& mask, int side);

enum class SplitName { train, val, test };
const char* split_name(SplitName s);
SplitName parse_split_name(const std::string& s);

struct ManifestEntry {
  std::string name;
  std::optional<SplitName> split;  // absent for unlabeled images
  CanvasPlacement placement;
};

/// Index of a prepared dataset directory:
///   images/*.png, masks/*.png (indexed), masks_rgb/*.png, unlabeled/*.png
struct Manifest {
  int canvas_side = kCanvasSide;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ManifestEntry> labeled;
  std::vector<ManifestEntry> unlabeled;

  std::vector<std::string> names_in(SplitName split) const;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
  static Manifest load(const fs::path& dataset_dir);
};

struct PreparedDataset {
  Manifest manifest;
  fs::path root;

  std::vector<LabeledSample> load_split(SplitName split) const;
  std::vector<RgbImage> load_unlabeled() const;
};

}  // namespace tissueseg
