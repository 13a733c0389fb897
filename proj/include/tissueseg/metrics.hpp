#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tissueseg/image.hpp"

namespace tissueseg {

/// One-vs-rest pixel counts per class.
struct ConfusionCounts {
  std::vector<std::uint64_t> tp;
  std::vector<std::uint64_t> fp;
  std::vector<std::uint64_t> fn;
  std::vector<std::uint64_t> tn;

  ConfusionCounts() = default;
  explicit ConfusionCounts(int num_classes);

  int num_classes() const { return static_cast<int>(tp.size()); }
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws ShapeError on differing sizes and UnknownLabelError on labels
/// outside [0, num_classes).
ConfusionCounts confusion_counts(const TissueMask& pred, const TissueMask& gt,
                                 int num_classes = kNumTissueClasses);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double dsc = 0.0;
  double iou = 0.0;
  /// False when the class is absent from both prediction and ground truth and
  /// the caller asked for such classes to be left undefined.
  bool defined = true;
};

enum class AbsentClassPolicy {
  perfect,    // absent from both → every metric 1 (per-image reporting)
  undefined,  // absent from both → defined = false (dataset aggregation)
};

ClassMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                 AbsentClassPolicy policy = AbsentClassPolicy::perfect);

std::vector<ClassMetrics> metrics_from_counts(const ConfusionCounts& counts,
                                              AbsentClassPolicy policy = AbsentClassPolicy::perfect);

struct ClassReportRow {
  std::string name;
  ClassMetrics micro;          // from counts summed over images
  ClassMetrics macro_all;      // mean of per-image metrics over every image
  ClassMetrics macro_present;  // mean over images whose ground truth holds the class
  std::uint64_t tp = 0, fp = 0, fn = 0;
  int images_present = 0;
};

struct MetricsReport {
  std::vector<ClassReportRow> classes;
  /// Counts summed over foreground classes and images.
  ClassMetrics overall_micro;
  /// Mean of the per-class micro metrics over defined foreground classes.
  ClassMetrics overall_macro;
  int image_count = 0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Dataset report from per-image counts. Class 0 (background) gets a row but
/// is excluded from the overall figures. Throws EmptyDatasetError on no images.
MetricsReport aggregate_report(const std::vector<ConfusionCounts>& per_image,
                               const std::vector<std::string>& class_names = {});

}  // namespace tissueseg
