#pragma once

#include <vector>

#include <torch/torch.h>

#include "tissueseg/image.hpp"

namespace tissueseg {

/// Stacks images into [B, 3, H, W] float, scaled to [0, 1] and normalized with
/// the ImageNet channel statistics (matching cross-domain pretrained encoders).
torch::Tensor images_to_tensor(const std::vector<const RgbImage*>& images);
torch::Tensor images_to_tensor(const std::vector<RgbImage>& images);

/// Stacks masks into [B, H, W] int64.
torch::Tensor masks_to_tensor(const std::vector<const TissueMask*>& masks);
torch::Tensor masks_to_tensor(const std::vector<TissueMask>& masks);

/// [B, H, W] integer labels → masks.
std::vector<TissueMask> tensor_to_masks(const torch::Tensor& labels, int num_classes);

}  // namespace tissueseg
