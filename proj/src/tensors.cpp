#include "tissueseg/tensors.hpp"

#include "tissueseg/errors.hpp"

namespace tissueseg {

namespace {

constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};

}  // namespace

torch::Tensor images_to_tensor(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw EmptyDatasetError("no images to batch");
  const auto h = images.front()->height();
  const auto w = images.front()->width();
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), 3, h, w}, torch::kFloat);
  auto acc = out.accessor<float, 4>();
  for (std::size_t b = 0; b < images.size(); ++b) {
    const auto& img = *images[b];
    if (img.height() != h || img.width() != w) throw ShapeError("batch images differ in size");
    const auto px = img.data();
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const auto* p = &px[(static_cast<std::size_t>(r) * w + c) * 3];
        for (int ch = 0; ch < 3; ++ch) {
          acc[b][ch][r][c] = (static_cast<float>(p[ch]) / 255.0f - kMean[ch]) / kStd[ch];
        }
      }
    }
  }
  return out;
}

torch::Tensor images_to_tensor(const std::vector<RgbImage>& images) {
  std::vector<const RgbImage*> ptrs;
  for (const auto& i : images) ptrs.push_back(&i);
  return images_to_tensor(ptrs);
}

torch::Tensor masks_to_tensor(const std::vector<const TissueMask*>& masks) {
  if (masks.empty()) throw EmptyDatasetError("no masks to batch");
  const auto h = masks.front()->height();
  const auto w = masks.front()->width();
  auto out = torch::empty({static_cast<std::int64_t>(masks.size()), h, w}, torch::kLong);
  auto* dst = out.data_ptr<std::int64_t>();
  for (const auto* m : masks) {
    if (m->height() != h || m->width() != w) throw ShapeError("batch masks differ in size");
    for (auto v : m->data()) *dst++ = v;
  }
  return out;
}

torch::Tensor masks_to_tensor(const std::vector<TissueMask>& masks) {
  std::vector<const TissueMask*> ptrs;
  for (const auto& m : masks) ptrs.push_back(&m);
  return masks_to_tensor(ptrs);
}

std::vector<TissueMask> tensor_to_masks(const torch::Tensor& labels, int num_classes) {
  if (labels.dim() != 3) throw ShapeError("expected [B, H, W] labels");
  auto cpu = labels.to(torch::kCPU, torch::kLong).contiguous();
  const auto b = cpu.size(0), h = cpu.size(1), w = cpu.size(2);
  const auto* src = cpu.data_ptr<std::int64_t>();
  std::vector<TissueMask> out;
  out.reserve(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(h * w));
    for (auto& v : px) v = static_cast<std::uint8_t>(*src++);
    out.emplace_back(static_cast<int>(h), static_cast<int>(w), std::move(px), num_classes);
  }
  return out;
}

}  // namespace tissueseg
