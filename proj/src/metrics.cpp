#include "tissueseg/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "tissueseg/errors.hpp"

namespace tissueseg {

ConfusionCounts::ConfusionCounts(int num_classes)
    : tp(num_classes), fp(num_classes), fn(num_classes), tn(num_classes) {}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  if (other.num_classes() != num_classes()) throw ShapeError("class count mismatch in merge");
  for (int c = 0; c < num_classes(); ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
    tn[c] += other.tn[c];
  }
  return *this;
}

ConfusionCounts confusion_counts(const TissueMask& pred, const TissueMask& gt, int num_classes) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ShapeError("prediction and ground truth differ in size");
  }
  if (num_classes < 1 || num_classes > 256) throw UnknownLabelError("num_classes out of range");
  const auto p = pred.data();
  const auto g = gt.data();
  // Joint histogram: rows = ground truth, columns = prediction.
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<std::uint64_t> joint(k * k, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= num_classes || g[i] >= num_classes) {
      throw UnknownLabelError("label " + std::to_string(std::max(p[i], g[i])) + " at pixel " +
                              std::to_string(i) + " is outside [0, " +
                              std::to_string(num_classes) + ")");
    }
    ++joint[g[i] * k + p[i]];
  }
  ConfusionCounts out(num_classes);
  const std::uint64_t total = p.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += joint[c * k + j];
      col += joint[j * k + c];
    }
    const auto diag = joint[c * k + c];
    out.tp[c] = diag;
    out.fn[c] = row - diag;
    out.fp[c] = col - diag;
    out.tn[c] = total - diag - (row - diag) - (col - diag);
  }
  return out;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                 AbsentClassPolicy policy) {
  if (tp + fp + fn == 0) {
    if (policy == AbsentClassPolicy::undefined) return {0.0, 0.0, 0.0, 0.0, false};
    return {1.0, 1.0, 1.0, 1.0, true};
  }
  return {ratio(tp, tp + fp), ratio(tp, tp + fn), ratio(2 * tp, 2 * tp + fp + fn),
          ratio(tp, tp + fp + fn), true};
}

std::vector<ClassMetrics> metrics_from_counts(const ConfusionCounts& counts,
                                              AbsentClassPolicy policy) {
  std::vector<ClassMetrics> out;
  out.reserve(static_cast<std::size_t>(counts.num_classes()));
  for (int c = 0; c < counts.num_classes(); ++c) {
    out.push_back(metrics_from_counts(counts.tp[c], counts.fp[c], counts.fn[c], policy));
  }
  return out;
}

namespace {

struct MeanAccumulator {
  double precision = 0, recall = 0, dsc = 0, iou = 0;
  int n = 0;

  void add(const ClassMetrics& m) {
    precision += m.precision;
    recall += m.recall;
    dsc += m.dsc;
    iou += m.iou;
    ++n;
  }
  ClassMetrics mean() const {
    if (n == 0) return {0, 0, 0, 0, false};
    return {precision / n, recall / n, dsc / n, iou / n, true};
  }
};

nlohmann::json metrics_json(const ClassMetrics& m) {
  if (!m.defined) return nullptr;
  return {{"precision", m.precision}, {"recall", m.recall}, {"dsc", m.dsc}, {"iou", m.iou}};
}

}  // namespace

MetricsReport aggregate_report(const std::vector<ConfusionCounts>& per_image,
                               const std::vector<std::string>& class_names) {
  if (per_image.empty()) throw EmptyDatasetError("metrics need at least one image");
  const int k = per_image.front().num_classes();
  ConfusionCounts total(k);
  std::vector<MeanAccumulator> all(k), present(k);
  for (const auto& counts : per_image) {
    total += counts;
    const auto per_class = metrics_from_counts(counts, AbsentClassPolicy::perfect);
    for (int c = 0; c < k; ++c) {
      all[c].add(per_class[c]);
      if (counts.tp[c] + counts.fn[c] > 0) present[c].add(per_class[c]);
    }
  }

  MetricsReport report;
  report.image_count = static_cast<int>(per_image.size());
  std::uint64_t fg_tp = 0, fg_fp = 0, fg_fn = 0;
  MeanAccumulator macro;
  for (int c = 0; c < k; ++c) {
    ClassReportRow row;
    row.name = c < static_cast<int>(class_names.size()) ? class_names[c] : tissue_name(c);
    row.micro = metrics_from_counts(total.tp[c], total.fp[c], total.fn[c],
                                    AbsentClassPolicy::undefined);
    row.macro_all = all[c].mean();
    row.macro_present = present[c].mean();
    row.tp = total.tp[c];
    row.fp = total.fp[c];
    row.fn = total.fn[c];
    row.images_present = present[c].n;
    if (c > 0) {
      fg_tp += row.tp;
      fg_fp += row.fp;
      fg_fn += row.fn;
      if (row.micro.defined) macro.add(row.micro);
    }
    report.classes.push_back(std::move(row));
  }
  report.overall_micro = metrics_from_counts(fg_tp, fg_fp, fg_fn, AbsentClassPolicy::undefined);
  report.overall_macro = macro.mean();
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : classes) {
    rows.push_back({{"class", r.name},
                    {"micro", metrics_json(r.micro)},
                    {"macro_all_images", metrics_json(r.macro_all)},
                    {"macro_images_with_class", metrics_json(r.macro_present)},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"images_with_class", r.images_present}});
  }
  return {{"images", image_count},
          {"classes", rows},
          {"overall", {{"micro", metrics_json(overall_micro)},
                       {"macro", metrics_json(overall_macro)}}},
          {"primary_mode", "micro"}};
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "class,mode,precision,recall,dsc,iou\n";
  auto line = [&os](const std::string& name, const char* mode, const ClassMetrics& m) {
    os << name << ',' << mode << ',';
    if (m.defined) {
      os << m.precision << ',' << m.recall << ',' << m.dsc << ',' << m.iou << '\n';
    } else {
      os << ",,,\n";
    }
  };
  for (const auto& r : classes) {
    line(r.name, "micro", r.micro);
    line(r.name, "macro_all_images", r.macro_all);
    line(r.name, "macro_images_with_class", r.macro_present);
  }
  line("overall", "micro", overall_micro);
  line("overall", "macro", overall_macro);
  return os.str();
}

}  // namespace tissueseg
