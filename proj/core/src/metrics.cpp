#include "pcdu/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "pcdu/data.hpp"
#include "pcdu/errors.hpp"

namespace pcdu {

std::size_t ConfusionCounts::population() const noexcept {
  return classes() == 0 ? 0 : tp[0] + fp[0] + fn[0] + tn[0];
}

namespace {
void same_length(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, const char* who) {
  if (pred.size() != truth.size()) {
    throw DimensionError(who, "pred", std::to_string(pred.size()) + " predictions for " +
                                          std::to_string(truth.size()) + " labels");
  }
}
}  // namespace

ConfusionCounts confusion(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                          std::size_t classes) {
  same_length(pred, truth, "confusion");
  ConfusionCounts c;
  c.tp.assign(classes, 0);
  c.fp.assign(classes, 0);
  c.fn.assign(classes, 0);
  c.tn.assign(classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(pred[i]) >= classes ||
        static_cast<std::size_t>(truth[i]) >= classes) {
      throw ValueError("confusion: label outside [0, " + std::to_string(classes) + ")");
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const bool p = static_cast<std::size_t>(pred[i]) == k;
      const bool t = static_cast<std::size_t>(truth[i]) == k;
      if (p && t) ++c.tp[k];
      else if (p) ++c.fp[k];
      else if (t) ++c.fn[k];
      else ++c.tn[k];
    }
  }
  return c;
}

double per_class_accuracy(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, std::int32_t cls) {
  same_length(pred, truth, "per_class_accuracy");
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != cls) continue;
    ++total;
    if (pred[i] == cls) ++correct;
  }
  if (total == 0) throw ValueError("per_class_accuracy: class " + std::to_string(cls) + " absent from truth");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double f1(const ConfusionCounts& conf, std::int32_t positive_class) {
  if (positive_class < 0 || static_cast<std::size_t>(positive_class) >= conf.classes()) {
    throw ValueError("f1: positive class out of range");
  }
  const auto k = static_cast<std::size_t>(positive_class);
  const double tp = static_cast<double>(conf.tp[k]);
  const double fp = static_cast<double>(conf.fp[k]);
  const double fn = static_cast<double>(conf.fn[k]);
  if (tp == 0.0) return fp + fn == 0.0 ? 1.0 : 0.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

double iou(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, std::int32_t cls) {
  same_length(pred, truth, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == cls;
    const bool t = truth[i] == cls;
    inter += p && t;
    uni += p || t;
  }
  return uni == 0 ? 100.0 : 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["type"] = "metrics";
  j["task"] = task;
  j["population"] = population;
  if (task == "cls") {
    j["classes"] = classes;
    j["overall_accuracy"] = overall_accuracy;
    if (classes == 2) {
      j["V_accuracy"] = healthy_accuracy;
      j["A_accuracy"] = aneurysm_accuracy;
      j["F1"] = f1_score;
    }
  } else {
    j["IoU_V"] = healthy_iou;
    j["IoU_A"] = aneurysm_iou;
    j["IoU_V_per_cloud"] = healthy_iou_per_cloud;
    j["IoU_A_per_cloud"] = aneurysm_iou_per_cloud;
  }
  j["confusion"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}};
  return j;
}

std::string MetricsReport::table() const {
  std::ostringstream out;
  out << std::fixed;
  if (task == "cls" && classes != 2) {
    out << "  samples   classes   accuracy(%)\n";
    out << "  " << std::setw(7) << population << "   " << std::setw(7) << classes << "   " << std::setprecision(2)
        << std::setw(11) << overall_accuracy << "\n";
  } else if (task == "cls") {
    out << "  samples   V.(%)    A.(%)    F1\n";
    out << "  " << std::setw(7) << population << "  " << std::setprecision(2) << std::setw(6) << healthy_accuracy
        << "   " << std::setw(6) << aneurysm_accuracy << "   " << std::setprecision(4) << f1_score << "\n";
  } else {
    out << "  points    IoU_V.(%)  IoU_A.(%)  [per-cloud V. / A.]\n";
    out << "  " << std::setw(7) << population << "  " << std::setprecision(2) << std::setw(8) << healthy_iou
        << "   " << std::setw(8) << aneurysm_iou << "   [" << healthy_iou_per_cloud << " / "
        << aneurysm_iou_per_cloud << "]\n";
  }
  return out.str();
}

MetricsReport classification_report(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                                    std::size_t classes) {
  if (truth.empty()) throw ValueError("evaluate: empty test set");
  if (classes < 2) throw ValueError("classification_report: need at least 2 classes");
  MetricsReport r;
  r.task = "cls";
  r.classes = classes;
  r.population = truth.size();
  r.counts = confusion(pred, truth, classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
  r.overall_accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
  if (classes != 2) return r;
  r.healthy_accuracy = per_class_accuracy(pred, truth, kHealthy);
  r.aneurysm_accuracy = per_class_accuracy(pred, truth, kAneurysm);
  r.f1_score = f1(r.counts, kAneurysm);
  return r;
}

MetricsReport segmentation_report(
    const std::vector<std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>>>& clouds) {
  if (clouds.empty()) throw ValueError("evaluate: empty test set");
  std::vector<std::int32_t> pred, truth;
  double v_sum = 0.0, a_sum = 0.0;
  for (const auto& [p, t] : clouds) {
    same_length(p, t, "segmentation_report");
    pred.insert(pred.end(), p.begin(), p.end());
    truth.insert(truth.end(), t.begin(), t.end());
    v_sum += iou(p, t, kHealthy);
    a_sum += iou(p, t, kAneurysm);
  }
  MetricsReport r;
  r.task = "seg";
  r.population = truth.size();
  r.counts = confusion(pred, truth, 2);
  r.healthy_iou = iou(pred, truth, kHealthy);
  r.aneurysm_iou = iou(pred, truth, kAneurysm);
  r.healthy_iou_per_cloud = v_sum / static_cast<double>(clouds.size());
  r.aneurysm_iou_per_cloud = a_sum / static_cast<double>(clouds.size());
  return r;
}

}  // namespace pcdu
