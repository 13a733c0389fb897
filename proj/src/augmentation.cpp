#include "tissueseg/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>

#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "tissueseg/errors.hpp"

namespace tissueseg {

using detail::image_from_mat;
using detail::mask_from_mat;
using detail::to_mat;

const char* transform_kind_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::affine:
      return "affine";
    case TransformKind::projective:
      return "projective";
    case TransformKind::photometric:
      return "photometric";
  }
  return "photometric";
}

TransformKind parse_transform_kind(const std::string& s) {
  if (s == "affine") return TransformKind::affine;
  if (s == "projective") return TransformKind::projective;
  if (s == "photometric") return TransformKind::photometric;
  throw ConfigError("unknown transform kind '" + s + "'");
}

namespace {

struct Canvas {
  cv::Mat image;  // CV_8UC3, RGB order
  cv::Mat mask;   // CV_8UC1
};

double draw(const TransformSpec& spec, const std::string& key, double fallback_lo,
            double fallback_hi, std::mt19937_64& rng) {
  double lo = fallback_lo;
  double hi = fallback_hi;
  if (auto it = spec.params.find(key); it != spec.params.end()) {
    lo = std::min(it->second.lo, it->second.hi);
    hi = std::max(it->second.lo, it->second.hi);
  }
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

cv::Mat shifted(const cv::Mat& src, int dx, int dy) {
  cv::Mat dst = cv::Mat::zeros(src.size(), src.type());
  const int w = src.cols;
  const int h = src.rows;
  const int x0 = std::max(0, dx), x1 = std::min(w, w + dx);
  const int y0 = std::max(0, dy), y1 = std::min(h, h + dy);
  if (x0 < x1 && y0 < y1) {
    src(cv::Rect(x0 - dx, y0 - dy, x1 - x0, y1 - y0)).copyTo(dst(cv::Rect(x0, y0, x1 - x0, y1 - y0)));
  }
  return dst;
}

void warp_affine(Canvas& c, const cv::Mat& m) {
  cv::Mat img;
  cv::Mat msk;
  cv::warpAffine(c.image, img, m, c.image.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                 cv::Scalar::all(0));
  cv::warpAffine(c.mask, msk, m, c.mask.size(), cv::INTER_NEAREST, cv::BORDER_CONSTANT,
                 cv::Scalar::all(0));
  c.image = img;
  c.mask = msk;
}

cv::Mat apply_lut(const cv::Mat& img, const std::function<double(double)>& f) {
  cv::Mat lut(1, 256, CV_8U);
  for (int i = 0; i < 256; ++i) {
    lut.at<std::uint8_t>(i) = cv::saturate_cast<std::uint8_t>(std::lround(f(i)));
  }
  cv::Mat out;
  cv::LUT(img, lut, out);
  return out;
}

using TransformFn = std::function<void(const TransformSpec&, Canvas&, std::mt19937_64&)>;

struct Registered {
  TransformKind kind;
  TransformFn fn;
};

const std::unordered_map<std::string, Registered>& registry() {
  static const std::unordered_map<std::string, Registered> table = {
      {"horizontal_flip",
       {TransformKind::affine,
        [](const TransformSpec&, Canvas& c, std::mt19937_64&) {
          cv::flip(c.image, c.image, 1);
          cv::flip(c.mask, c.mask, 1);
        }}},
      {"vertical_flip",
       {TransformKind::affine,
        [](const TransformSpec&, Canvas& c, std::mt19937_64&) {
          cv::flip(c.image, c.image, 0);
          cv::flip(c.mask, c.mask, 0);
        }}},
      {"transpose",
       {TransformKind::affine,
        [](const TransformSpec&, Canvas& c, std::mt19937_64&) {
          cv::Mat img;
          cv::Mat msk;
          cv::transpose(c.image, img);
          cv::transpose(c.mask, msk);
          c.image = img;
          c.mask = msk;
        }}},
      {"shift",
       {TransformKind::affine,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double fx = std::clamp(draw(s, "fraction", -0.0625, 0.0625, rng), -1.0, 1.0);
          const double fy = std::clamp(draw(s, "fraction", -0.0625, 0.0625, rng), -1.0, 1.0);
          const int dx = static_cast<int>(std::lround(fx * c.image.cols));
          const int dy = static_cast<int>(std::lround(fy * c.image.rows));
          c.image = shifted(c.image, dx, dy);
          c.mask = shifted(c.mask, dx, dy);
        }}},
      {"rotate",
       {TransformKind::affine,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double deg = std::clamp(draw(s, "degrees", -15, 15, rng), -180.0, 180.0);
          const cv::Point2f center((c.image.cols - 1) / 2.0f, (c.image.rows - 1) / 2.0f);
          warp_affine(c, cv::getRotationMatrix2D(center, deg, 1.0));
        }}},
      {"scale",
       {TransformKind::affine,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double f = std::clamp(draw(s, "factor", 0.9, 1.1, rng), 0.05, 20.0);
          const cv::Point2f center((c.image.cols - 1) / 2.0f, (c.image.rows - 1) / 2.0f);
          warp_affine(c, cv::getRotationMatrix2D(center, 0.0, f));
        }}},
      {"perspective",
       {TransformKind::projective,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const float w = static_cast<float>(c.image.cols - 1);
          const float h = static_cast<float>(c.image.rows - 1);
          const cv::Point2f src[4] = {{0, 0}, {w, 0}, {w, h}, {0, h}};
          cv::Point2f dst[4];
          for (int i = 0; i < 4; ++i) {
            const double sx = std::clamp(draw(s, "scale", 0.02, 0.06, rng), 0.0, 0.25);
            const double sy = std::clamp(draw(s, "scale", 0.02, 0.06, rng), 0.0, 0.25);
            // Corners move inward so the warped quad stays convex.
            const float ix = (i == 0 || i == 3) ? 1.0f : -1.0f;
            const float iy = (i < 2) ? 1.0f : -1.0f;
            dst[i] = {src[i].x + ix * static_cast<float>(sx * w),
                      src[i].y + iy * static_cast<float>(sy * h)};
          }
          const cv::Mat m = cv::getPerspectiveTransform(src, dst);
          cv::Mat img;
          cv::Mat msk;
          cv::warpPerspective(c.image, img, m, c.image.size(), cv::INTER_LINEAR,
                              cv::BORDER_CONSTANT, cv::Scalar::all(0));
          cv::warpPerspective(c.mask, msk, m, c.mask.size(), cv::INTER_NEAREST,
                              cv::BORDER_CONSTANT, cv::Scalar::all(0));
          c.image = img;
          c.mask = msk;
        }}},
      {"brightness",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double delta = draw(s, "delta", -0.2, 0.2, rng) * 255.0;
          c.image = apply_lut(c.image, [delta](double v) { return v + delta; });
        }}},
      {"contrast",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double f = std::max(0.0, draw(s, "factor", 0.8, 1.2, rng));
          cv::Mat gray;
          cv::cvtColor(c.image, gray, cv::COLOR_RGB2GRAY);
          const double mean = cv::mean(gray)[0];
          c.image = apply_lut(c.image, [f, mean](double v) { return (v - mean) * f + mean; });
        }}},
      {"gamma",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double g = std::clamp(draw(s, "gamma", 0.8, 1.2, rng), 0.05, 20.0);
          c.image = apply_lut(c.image, [g](double v) { return 255.0 * std::pow(v / 255.0, g); });
        }}},
      {"hue_saturation",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double hue_deg = draw(s, "hue", -10, 10, rng);
          const double sat = draw(s, "saturation", -20, 20, rng);
          cv::Mat hsv;
          cv::cvtColor(c.image, hsv, cv::COLOR_RGB2HSV);
          // 8-bit OpenCV hue spans [0, 180).
          const int hue_shift = static_cast<int>(std::lround(hue_deg / 2.0));
          for (int r = 0; r < hsv.rows; ++r) {
            auto* p = hsv.ptr<cv::Vec3b>(r);
            for (int col = 0; col < hsv.cols; ++col) {
              p[col][0] = static_cast<std::uint8_t>(((p[col][0] + hue_shift) % 180 + 180) % 180);
              p[col][1] = cv::saturate_cast<std::uint8_t>(std::lround(p[col][1] + sat));
            }
          }
          cv::cvtColor(hsv, c.image, cv::COLOR_HSV2RGB);
        }}},
      {"gaussian_blur",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double sigma = std::clamp(draw(s, "sigma", 0.5, 1.5, rng), 0.1, 10.0);
          const int k = 2 * static_cast<int>(std::ceil(2.0 * sigma)) + 1;
          cv::GaussianBlur(c.image, c.image, cv::Size(k, k), sigma, sigma, cv::BORDER_REFLECT_101);
        }}},
      {"gaussian_noise",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double sd = std::max(0.0, draw(s, "std", 3, 12, rng));
          std::normal_distribution<double> noise(0.0, sd);
          for (int r = 0; r < c.image.rows; ++r) {
            auto* p = c.image.ptr<std::uint8_t>(r);
            for (int i = 0; i < c.image.cols * 3; ++i) {
              p[i] = cv::saturate_cast<std::uint8_t>(std::lround(p[i] + noise(rng)));
            }
          }
        }}},
      {"clahe",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          const double clip = std::clamp(draw(s, "clip", 1, 4, rng), 0.1, 40.0);
          cv::Mat lab;
          cv::cvtColor(c.image, lab, cv::COLOR_RGB2Lab);
          std::vector<cv::Mat> planes;
          cv::split(lab, planes);
          auto clahe = cv::createCLAHE(clip, cv::Size(8, 8));
          clahe->apply(planes[0], planes[0]);
          cv::merge(planes, lab);
          cv::cvtColor(lab, c.image, cv::COLOR_Lab2RGB);
        }}},
      {"color_jitter",
       {TransformKind::photometric,
        [](const TransformSpec& s, Canvas& c, std::mt19937_64& rng) {
          std::array<double, 3> gain{};
          for (auto& g : gain) g = std::max(0.0, draw(s, "gain", 0.9, 1.1, rng));
          for (int r = 0; r < c.image.rows; ++r) {
            auto* p = c.image.ptr<cv::Vec3b>(r);
            for (int col = 0; col < c.image.cols; ++col) {
              for (int ch = 0; ch < 3; ++ch) {
                p[col][ch] = cv::saturate_cast<std::uint8_t>(std::lround(p[col][ch] * gain[ch]));
              }
            }
          }
        }}},
  };
  return table;
}

const Registered& lookup(const std::string& name) {
  const auto& table = registry();
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown transform '" + name + "'");
  return it->second;
}

void validate(const TransformSpec& t) {
  const auto& reg = lookup(t.name);
  if (reg.kind != t.kind) {
    throw ConfigError("transform '" + t.name + "' must be declared " +
                      transform_kind_name(reg.kind));
  }
  if (!(t.probability >= 0.0 && t.probability <= 1.0)) {
    throw ConfigError("transform '" + t.name + "' probability outside [0, 1]");
  }
}

TransformSpec spec(std::string name, double p, std::map<std::string, ParamRange> params = {}) {
  const auto kind = lookup(name).kind;
  return {std::move(name), kind, p, std::move(params)};
}

}  // namespace

const std::set<std::string>& known_transforms() {
  static const std::set<std::string> names = [] {
    std::set<std::string> out;
    for (const auto& [name, reg] : registry()) out.insert(name);
    return out;
  }();
  return names;
}

AugmentationPipeline::AugmentationPipeline(std::vector<TransformSet> sets)
    : sets_(std::move(sets)) {
  for (const auto& set : sets_) {
    for (const auto& t : set.transforms) validate(t);
  }
}

AugmentationPipeline AugmentationPipeline::make_default() {
  return AugmentationPipeline({
      TransformSet{{spec("horizontal_flip", 0.5), spec("vertical_flip", 0.5),
                    spec("shift", 0.5, {{"fraction", {-0.0625, 0.0625}}})}},
      TransformSet{{spec("rotate", 0.2, {{"degrees", {-15, 15}}}),
                    spec("scale", 0.2, {{"factor", {0.9, 1.1}}}), spec("transpose", 0.3)}},
      TransformSet{{spec("brightness", 0.3, {{"delta", {-0.2, 0.2}}}),
                    spec("contrast", 0.3, {{"factor", {0.8, 1.2}}}),
                    spec("gamma", 0.2, {{"gamma", {0.8, 1.2}}}),
                    spec("hue_saturation", 0.2, {{"hue", {-10, 10}}, {"saturation", {-20, 20}}}),
                    spec("perspective", 0.2, {{"scale", {0.02, 0.06}}})}},
      TransformSet{{spec("gaussian_blur", 0.2, {{"sigma", {0.5, 1.5}}}),
                    spec("gaussian_noise", 0.2, {{"std", {3, 12}}}),
                    spec("clahe", 0.2, {{"clip", {1, 4}}}),
                    spec("color_jitter", 0.2, {{"gain", {0.9, 1.1}}})}},
  });
}

std::size_t AugmentationPipeline::transform_count() const {
  std::size_t n = 0;
  for (const auto& s : sets_) n += s.transforms.size();
  return n;
}

AugmentationPipeline AugmentationPipeline::with_probability(double p) const {
  auto sets = sets_;
  for (auto& s : sets) {
    for (auto& t : s.transforms) t.probability = p;
  }
  return AugmentationPipeline(std::move(sets));
}

AugmentationPipeline AugmentationPipeline::photometric_only() const {
  std::vector<TransformSet> sets;
  for (const auto& s : sets_) {
    TransformSet kept;
    for (const auto& t : s.transforms) {
      if (!t.moves_pixels()) kept.transforms.push_back(t);
    }
    sets.push_back(std::move(kept));
  }
  return AugmentationPipeline(std::move(sets));
}

nlohmann::json AugmentationPipeline::to_json() const {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& s : sets_) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : s.transforms) {
      nlohmann::json params = nlohmann::json::object();
      for (const auto& [k, r] : t.params) params[k] = {r.lo, r.hi};
      arr.push_back({{"name", t.name},
                     {"kind", transform_kind_name(t.kind)},
                     {"probability", t.probability},
                     {"params", params}});
    }
    sets.push_back(arr);
  }
  return {{"sets", sets}};
}

AugmentationPipeline AugmentationPipeline::from_json(const nlohmann::json& j) {
  std::vector<TransformSet> sets;
  for (const auto& arr : j.at("sets")) {
    TransformSet s;
    for (const auto& t : arr) {
      TransformSpec ts;
      ts.name = t.at("name").get<std::string>();
      ts.kind = t.contains("kind") ? parse_transform_kind(t.at("kind").get<std::string>())
                                   : lookup(ts.name).kind;
      ts.probability = t.at("probability").get<double>();
      if (t.contains("params")) {
        for (const auto& [k, v] : t.at("params").items()) {
          ts.params[k] = {v.at(0).get<double>(), v.at(1).get<double>()};
        }
      }
      s.transforms.push_back(std::move(ts));
    }
    sets.push_back(std::move(s));
  }
  return AugmentationPipeline(std::move(sets));
}

LabeledSample apply_transform(const TransformSpec& spec, const RgbImage& image,
                              const TissueMask& mask, std::mt19937_64& rng) {
  Canvas c{to_mat(image), to_mat(mask)};
  lookup(spec.name).fn(spec, c, rng);
  if (!spec.moves_pixels()) return {image_from_mat(c.image, image.name()), mask};
  return {image_from_mat(c.image, image.name()), mask_from_mat(c.mask, mask.num_classes())};
}

LabeledSample apply(const AugmentationPipeline& pipeline, const RgbImage& image,
                    const TissueMask& mask, std::mt19937_64& rng,
                    std::vector<std::string>* fired) {
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw ShapeError("image and mask dimensions differ");
  }
  Canvas c{to_mat(image), to_mat(mask)};
  bool geometry_changed = false;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (const auto& set : pipeline.sets()) {
    for (const auto& t : set.transforms) {
      if (coin(rng) >= t.probability) continue;
      lookup(t.name).fn(t, c, rng);
      geometry_changed = geometry_changed || t.moves_pixels();
      if (fired) fired->push_back(t.name);
    }
  }
  LabeledSample out{image_from_mat(c.image, image.name()),
                    geometry_changed ? mask_from_mat(c.mask, mask.num_classes()) : mask};
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<LabeledSample> minority_oversample(const std::vector<LabeledSample>& pairs,
                                               const AugmentationPipeline& pipeline, int factor,
                                               std::uint64_t seed,
                                               const std::set<int>& target_classes) {
  if (factor < 1) throw ConfigError("oversampling factor must be >= 1");
  std::vector<LabeledSample> out;
  std::uint64_t stream = 0;
  for (const auto& pair : pairs) {
    std::set<int> present;
    for (int c : target_classes) {
      if (pair.mask.contains(c)) present.insert(c);
    }
    if (present.empty()) {
      out.push_back(pair);
      continue;
    }
    for (int copy = 0; copy < factor; ++copy) {
      std::optional<LabeledSample> accepted;
      for (int attempt = 0; attempt <= kOversampleRetries && !accepted; ++attempt) {
        std::mt19937_64 rng(derive_seed(seed, stream++));
        auto candidate = apply(pipeline, pair.image, pair.mask, rng);
        const bool keeps_target = std::any_of(present.begin(), present.end(), [&](int c) {
          return candidate.mask.contains(c);
        });
        if (keeps_target) accepted = std::move(candidate);
      }
      out.push_back(accepted ? std::move(*accepted) : pair);
    }
  }
  return out;
}

}  // namespace tissueseg
