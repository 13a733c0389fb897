#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tissueseg {

inline constexpr int kNumTissueClasses = 4;
inline constexpr int kCanvasSide = 256;

enum class Tissue : std::uint8_t {
  background = 0,
  fibrin = 1,
  granulation = 2,
  callus = 3,
};

const char* tissue_name(int label);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  auto operator<=>(const Rgb&) const = default;
};

/// Interleaved 8-bit RGB raster, row-major.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width, std::string name = {});
  RgbImage(int height, int width, std::vector<std::uint8_t> pixels, std::string name = {});

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  Rgb at(int row, int col) const {
    const auto* p = &pixels_[offset(row, col)];
    return {p[0], p[1], p[2]};
  }
  void set(int row, int col, Rgb value) {
    auto* p = &pixels_[offset(row, col)];
    p[0] = value.r;
    p[1] = value.g;
    p[2] = value.b;
  }

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  bool operator==(const RgbImage& other) const {
    return height_ == other.height_ && width_ == other.width_ && pixels_ == other.pixels_;
  }

 private:
  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) *
           3;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::string name_;
};

/// Per-pixel tissue class labels, one byte per pixel.
class TissueMask {
 public:
  TissueMask() = default;
  TissueMask(int height, int width, int num_classes = kNumTissueClasses);
  TissueMask(int height, int width, std::vector<std::uint8_t> labels,
             int num_classes = kNumTissueClasses);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  bool empty() const { return labels_.empty(); }

  std::uint8_t at(int row, int col) const { return labels_[offset(row, col)]; }
  void set(int row, int col, std::uint8_t label) { labels_[offset(row, col)] = label; }

  std::span<const std::uint8_t> data() const { return labels_; }
  std::span<std::uint8_t> data() { return labels_; }

  bool contains(int label) const;
  std::size_t count(int label) const;
  /// Labels present in the mask, ascending.
  std::vector<int> present_labels() const;

  bool operator==(const TissueMask& other) const {
    return height_ == other.height_ && width_ == other.width_ && labels_ == other.labels_;
  }

 private:
  std::size_t offset(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = kNumTissueClasses;
  std::vector<std::uint8_t> labels_;
};

struct LabeledSample {
  RgbImage image;
  TissueMask mask;
};

/// Bijection between class indices and display colors.
class ClassPalette {
 public:
  explicit ClassPalette(std::vector<Rgb> colors);

  /// background black, fibrin red, granulation green, callus blue.
  static ClassPalette tissue_default();

  int size() const { return static_cast<int>(colors_.size()); }
  Rgb color(int label) const;
  std::optional<std::uint8_t> label_of(Rgb color) const;
  const std::vector<Rgb>& colors() const { return colors_; }

 private:
  std::vector<Rgb> colors_;
};

TissueMask encode_mask(const RgbImage& color_mask, const ClassPalette& palette);
RgbImage decode_mask(const TissueMask& mask, const ClassPalette& palette);

/// Where an image sits inside its padded canvas.
struct CanvasPlacement {
  int top = 0;
  int left = 0;
  int original_height = 0;
  int original_width = 0;
};

CanvasPlacement centered_placement(int height, int width, int side);

struct PaddedSample {
  RgbImage image;
  std::optional<TissueMask> mask;
  CanvasPlacement placement;
};

/// Zero-pads to a side×side canvas with the original centered (odd slack goes
/// to the bottom/right). Throws DimensionError if either side exceeds the canvas.
PaddedSample pad_to_canvas(const RgbImage& image, const std::optional<TissueMask>& mask,
                           int side = kCanvasSide);

/// Inverse of pad_to_canvas for a mask predicted on the canvas.
TissueMask crop_from_canvas(const TissueMask& canvas_mask, const CanvasPlacement& placement);

/// Paints every non-background pixel as round((1 − opacity)·image + opacity·color).
/// Background pixels are copied unchanged.
RgbImage overlay_mask(const RgbImage& image, const TissueMask& mask, const ClassPalette& palette,
                      double opacity = 0.5);

}  // namespace tissueseg
