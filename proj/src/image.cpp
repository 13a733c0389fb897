#include "tissueseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <sstream>

#include "tissueseg/errors.hpp"

namespace tissueseg {

const char* tissue_name(int label) {
  switch (label) {
    case 0:
      return "background";
    case 1:
      return "fibrin";
    case 2:
      return "granulation";
    case 3:
      return "callus";
    default:
      return "unknown";
  }
}

RgbImage::RgbImage(int height, int width, std::string name)
    : RgbImage(height, width,
               std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) *
                                         static_cast<std::size_t>(std::max(width, 0)) * 3),
               std::move(name)) {}

RgbImage::RgbImage(int height, int width, std::vector<std::uint8_t> pixels, std::string name)
    : height_(height), width_(width), pixels_(std::move(pixels)), name_(std::move(name)) {
  if (height < 1 || width < 1) {
    throw DimensionError("image dimensions must be positive, got " + std::to_string(height) +
                         "x" + std::to_string(width));
  }
  if (pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3) {
    throw DimensionError("pixel buffer size does not match " + std::to_string(height) + "x" +
                         std::to_string(width) + "x3");
  }
}

TissueMask::TissueMask(int height, int width, int num_classes)
    : TissueMask(height, width,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) *
                                           static_cast<std::size_t>(std::max(width, 0))),
                 num_classes) {}

TissueMask::TissueMask(int height, int width, std::vector<std::uint8_t> labels, int num_classes)
    : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
  if (height < 1 || width < 1) {
    throw DimensionError("mask dimensions must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  if (num_classes < 1 || num_classes > 256) {
    throw UnknownLabelError("num_classes must be in [1, 256]");
  }
  if (labels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw DimensionError("label buffer size does not match mask dimensions");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= num_classes) {
      std::ostringstream msg;
      msg << "label " << int(labels_[i]) << " at (" << i / width << ", " << i % width
          << ") is outside [0, " << num_classes << ")";
      throw UnknownLabelError(msg.str());
    }
  }
}

bool TissueMask::contains(int label) const {
  return std::find(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(label)) !=
         labels_.end();
}

std::size_t TissueMask::count(int label) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(label)));
}

std::vector<int> TissueMask::present_labels() const {
  std::array<bool, 256> seen{};
  for (auto v : labels_) seen[v] = true;
  std::vector<int> out;
  for (int i = 0; i < 256; ++i) {
    if (seen[i]) out.push_back(i);
  }
  return out;
}

ClassPalette::ClassPalette(std::vector<Rgb> colors) : colors_(std::move(colors)) {
  if (colors_.empty() || colors_.size() > 256) {
    throw ConfigError("palette must hold between 1 and 256 colors");
  }
  auto sorted = colors_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("palette colors must be distinct");
  }
}

ClassPalette ClassPalette::tissue_default() {
  return ClassPalette({{0, 0, 0}, {255, 0, 0}, {0, 255, 0}, {0, 0, 255}});
}

Rgb ClassPalette::color(int label) const {
  if (label < 0 || label >= size()) {
    throw UnknownLabelError("label " + std::to_string(label) + " has no palette color");
  }
  return colors_[static_cast<std::size_t>(label)];
}

std::optional<std::uint8_t> ClassPalette::label_of(Rgb color) const {
  for (std::size_t i = 0; i < colors_.size(); ++i) {
    if (colors_[i] == color) return static_cast<std::uint8_t>(i);
  }
  return std::nullopt;
}

TissueMask encode_mask(const RgbImage& color_mask, const ClassPalette& palette) {
  const int h = color_mask.height();
  const int w = color_mask.width();
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  std::ostringstream offenders;
  std::size_t bad = 0;
  constexpr std::size_t kMaxListed = 10;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Rgb px = color_mask.at(r, c);
      if (auto label = palette.label_of(px)) {
        labels[static_cast<std::size_t>(r) * w + c] = *label;
      } else {
        if (bad < kMaxListed) {
          offenders << " (" << int(px.r) << "," << int(px.g) << "," << int(px.b) << ")@(" << r
                    << "," << c << ")";
        }
        ++bad;
      }
    }
  }
  if (bad > 0) {
    std::ostringstream msg;
    msg << "mask";
    if (!color_mask.name().empty()) msg << " '" << color_mask.name() << "'";
    msg << " has " << bad << " pixel(s) with colors outside the palette:" << offenders.str();
    if (bad > kMaxListed) msg << " ...";
    throw UnknownColorError(msg.str());
  }
  return TissueMask(h, w, std::move(labels), palette.size());
}

RgbImage decode_mask(const TissueMask& mask, const ClassPalette& palette) {
  RgbImage out(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      out.set(r, c, palette.color(mask.at(r, c)));
    }
  }
  return out;
}

CanvasPlacement centered_placement(int height, int width, int side) {
  if (height > side || width > side) {
    throw DimensionError("image " + std::to_string(height) + "x" + std::to_string(width) +
                         " exceeds the " + std::to_string(side) + "x" + std::to_string(side) +
                         " canvas");
  }
  return {(side - height) / 2, (side - width) / 2, height, width};
}

PaddedSample pad_to_canvas(const RgbImage& image, const std::optional<TissueMask>& mask,
                           int side) {
  if (mask && (mask->height() != image.height() || mask->width() != image.width())) {
    throw ShapeError("mask and image dimensions differ");
  }
  const auto place = centered_placement(image.height(), image.width(), side);
  PaddedSample out{RgbImage(side, side, image.name()), std::nullopt, place};
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      out.image.set(r + place.top, c + place.left, image.at(r, c));
    }
  }
  if (mask) {
    TissueMask padded(side, side, mask->num_classes());
    for (int r = 0; r < mask->height(); ++r) {
      for (int c = 0; c < mask->width(); ++c) {
        padded.set(r + place.top, c + place.left, mask->at(r, c));
      }
    }
    out.mask = std::move(padded);
  }
  return out;
}

TissueMask crop_from_canvas(const TissueMask& canvas_mask, const CanvasPlacement& placement) {
  if (placement.top + placement.original_height > canvas_mask.height() ||
      placement.left + placement.original_width > canvas_mask.width()) {
    throw DimensionError("placement lies outside the canvas");
  }
  TissueMask out(placement.original_height, placement.original_width, canvas_mask.num_classes());
  for (int r = 0; r < placement.original_height; ++r) {
    for (int c = 0; c < placement.original_width; ++c) {
      out.set(r, c, canvas_mask.at(r + placement.top, c + placement.left));
    }
  }
  return out;
}

RgbImage overlay_mask(const RgbImage& image, const TissueMask& mask, const ClassPalette& palette,
                      double opacity) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw ShapeError("overlay: image and mask differ in size");
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw std::invalid_argument("opacity must lie in [0, 1]");
  RgbImage out = image;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      const int label = mask.at(r, c);
      if (label == 0) continue;
      const Rgb src = image.at(r, c);
      const Rgb col = palette.color(label);
      auto mix = [&](int a, int b) {
        return static_cast<std::uint8_t>(std::lround((1.0 - opacity) * a + opacity * b));
      };
      out.set(r, c, {mix(src.r, col.r), mix(src.g, col.g), mix(src.b, col.b)});
    }
  }
  return out;
}

}  // namespace tissueseg
