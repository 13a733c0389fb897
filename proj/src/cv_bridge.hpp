#pragma once

#include <algorithm>

#include <opencv2/core.hpp>

#include "tissueseg/image.hpp"

namespace tissueseg::detail {

inline cv::Mat to_mat(const RgbImage& image) {
  return cv::Mat(image.height(), image.width(), CV_8UC3,
                 const_cast<std::uint8_t*>(image.data().data()))
      .clone();
}

inline cv::Mat to_mat(const TissueMask& mask) {
  return cv::Mat(mask.height(), mask.width(), CV_8UC1,
                 const_cast<std::uint8_t*>(mask.data().data()))
      .clone();
}

inline RgbImage image_from_mat(const cv::Mat& m, const std::string& name) {
  CV_Assert(m.type() == CV_8UC3);
  std::vector<std::uint8_t> px(m.total() * 3);
  for (int r = 0; r < m.rows; ++r) {
    std::copy_n(m.ptr<std::uint8_t>(r), m.cols * 3, px.data() + std::size_t(r) * m.cols * 3);
  }
  return RgbImage(m.rows, m.cols, std::move(px), name);
}

inline TissueMask mask_from_mat(const cv::Mat& m, int num_classes) {
  CV_Assert(m.type() == CV_8UC1);
  std::vector<std::uint8_t> labels(m.total());
  for (int r = 0; r < m.rows; ++r) {
    std::copy_n(m.ptr<std::uint8_t>(r), m.cols, labels.data() + std::size_t(r) * m.cols);
  }
  return TissueMask(m.rows, m.cols, std::move(labels), num_classes);
}

}  // namespace tissueseg::detail
