#include "tissueseg/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "tissueseg/errors.hpp"

namespace tissueseg {

RgbImage read_rgb_png(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  std::vector<std::uint8_t> px(rgb.total() * 3);
  for (int r = 0; r < rgb.rows; ++r) {
    std::copy_n(rgb.ptr<std::uint8_t>(r), rgb.cols * 3, px.data() + std::size_t(r) * rgb.cols * 3);
  }
  return RgbImage(rgb.rows, rgb.cols, std::move(px), path.stem().string());
}

void write_rgb_png(const fs::path& path, const RgbImage& image) {
  cv::Mat rgb(image.height(), image.width(), CV_8UC3,
              const_cast<std::uint8_t*>(image.data().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) throw Error("cannot write image " + path.string());
}

TissueMask read_indexed_mask(const fs::path& path, int num_classes) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw Error("cannot read mask " + path.string());
  if (m.channels() != 1 || m.depth() != CV_8U) {
    throw UnknownLabelError("indexed mask " + path.string() + " must be single-channel 8-bit");
  }
  std::vector<std::uint8_t> labels(m.total());
  for (int r = 0; r < m.rows; ++r) {
    std::copy_n(m.ptr<std::uint8_t>(r), m.cols, labels.data() + std::size_t(r) * m.cols);
  }
  try {
    return TissueMask(m.rows, m.cols, std::move(labels), num_classes);
  } catch (const UnknownLabelError& e) {
    throw UnknownLabelError(path.string() + ": " + e.what());
  }
}

void write_indexed_mask(const fs::path& path, const TissueMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1, const_cast<std::uint8_t*>(mask.data().data()));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw Error("cannot write mask " + path.string());
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << contents;
    os.flush();
    if (!os) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

const char* split_name(SplitName s) {
  switch (s) {
    case SplitName::train:
      return "train";
    case SplitName::val:
      return "val";
    case SplitName::test:
      return "test";
  }
  return "train";
}

SplitName parse_split_name(const std::string& s) {
  if (s == "train") return SplitName::train;
  if (s == "val") return SplitName::val;
  if (s == "test") return SplitName::test;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<std::string> Manifest::names_in(SplitName split) const {
  std::vector<std::string> out;
  for (const auto& e : labeled) {
    if (e.split == split) out.push_back(e.name);
  }
  return out;
}

namespace {

nlohmann::json entry_to_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["name"] = e.name;
  if (e.split) j["split"] = split_name(*e.split);
  j["original_height"] = e.placement.original_height;
  j["original_width"] = e.placement.original_width;
  j["top"] = e.placement.top;
  j["left"] = e.placement.left;
  return j;
}

ManifestEntry entry_from_json(const nlohmann::json& j) {
  ManifestEntry e;
  e.name = j.at("name").get<std::string>();
  if (j.contains("split")) e.split = parse_split_name(j.at("split").get<std::string>());
  e.placement.original_height = j.at("original_height").get<int>();
  e.placement.original_width = j.at("original_width").get<int>();
  e.placement.top = j.at("top").get<int>();
  e.placement.left = j.at("left").get<int>();
  return e;
}

}  // namespace

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["canvas_side"] = canvas_side;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["labeled"] = nlohmann::json::array();
  for (const auto& e : labeled) j["labeled"].push_back(entry_to_json(e));
  j["unlabeled"] = nlohmann::json::array();
  for (const auto& e : unlabeled) j["unlabeled"].push_back(entry_to_json(e));
  return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  m.canvas_side = j.value("canvas_side", kCanvasSide);
  m.seed = j.value("seed", std::uint64_t{0});
  m.config_hash = j.value("config_hash", std::string{});
  for (const auto& e : j.at("labeled")) m.labeled.push_back(entry_from_json(e));
  if (j.contains("unlabeled")) {
    for (const auto& e : j.at("unlabeled")) m.unlabeled.push_back(entry_from_json(e));
  }
  return m;
}

Manifest Manifest::load(const fs::path& dataset_dir) {
  std::ifstream is(dataset_dir / "manifest.json");
  if (!is) throw Error("no manifest.json in " + dataset_dir.string());
  return from_json(nlohmann::json::parse(is));
}

std::vector<LabeledSample> PreparedDataset::load_split(SplitName split) const {
  std::vector<LabeledSample> out;
  for (const auto& name : manifest.names_in(split)) {
    auto image = read_rgb_png(root / "images" / (name + ".png"));
    const auto mask_path = root / "masks" / (name + ".png");
    if (!fs::exists(mask_path)) throw Error("missing ground truth " + mask_path.string());
    out.push_back({std::move(image), read_indexed_mask(mask_path)});
  }
  return out;
}

std::vector<RgbImage> PreparedDataset::load_unlabeled() const {
  std::vector<RgbImage> out;
  for (const auto& e : manifest.unlabeled) {
    out.push_back(read_rgb_png(root / "unlabeled" / (e.name + ".png")));
  }
  return out;
}

namespace {

cv::Size fitted_size(int height, int width, int side) {
  const double scale = static_cast<double>(side) / std::max(height, width);
  return {std::max(1, static_cast<int>(std::lround(width * scale))),
          std::max(1, static_cast<int>(std::lround(height * scale)))};
}

}  // namespace

RgbImage downscale_to_fit(const RgbImage& image, int side) {
  if (side < 1) throw DimensionError("side must be positive");
  if (image.height() <= side && image.width() <= side) return image;
  cv::Mat out;
  cv::resize(detail::to_mat(image), out, fitted_size(image.height(), image.width(), side), 0, 0,
             cv::INTER_AREA);
  return detail::image_from_mat(out, image.name());
}

TissueMask downscale_to_fit(const TissueMask& mask, int side) {
  if (side < 1) throw DimensionError("side must be positive");
  if (mask.height() <= side && mask.width() <= side) return mask;
  cv::Mat out;
  cv::resize(detail::to_mat(mask), out, fitted_size(mask.height(), mask.width(), side), 0, 0,
             cv::INTER_NEAREST);
  return detail::mask_from_mat(out, mask.num_classes());
}

}  // namespace tissueseg
