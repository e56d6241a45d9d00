#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pcdu {

/// One-vs-rest tallies for each class.
struct ConfusionCounts {
  std::vector<std::size_t> tp, fp, fn, tn;

  std::size_t classes() const noexcept { return tp.size(); }
  std::size_t population() const noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                          std::size_t classes);

/// 100 × correct / total among samples whose truth is `cls`.
double per_class_accuracy(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, std::int32_t cls);

/// Harmonic mean of precision and recall for `positive_class`.
/// No positives predicted or present at all counts as 1.
double f1(const ConfusionCounts& conf, std::int32_t positive_class);

/// 100 × |pred ∩ truth| / |pred ∪ truth| for class `cls`; an empty union is 100.
double iou(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, std::int32_t cls);

struct MetricsReport {
  std::string task;  // "cls" or "seg"
  std::size_t population = 0;
  ConfusionCounts counts;
  // classification; V./A./F1 only when there are two classes
  std::size_t classes = 2;
  double overall_accuracy = 0.0;
  double healthy_accuracy = 0.0;   // V.
  double aneurysm_accuracy = 0.0;  // A.
  double f1_score = 0.0;
  // segmentation, points pooled over every evaluated cloud
  double healthy_iou = 0.0;
  double aneurysm_iou = 0.0;
  // segmentation, mean of per-cloud IoU
  double healthy_iou_per_cloud = 0.0;
  double aneurysm_iou_per_cloud = 0.0;

  nlohmann::json to_json() const;
  std::string table() const;
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport classification_report(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                                    std::size_t classes = 2);
/// `clouds` holds (pred, truth) per evaluated cloud.
MetricsReport segmentation_report(
    const std::vector<std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>>>& clouds);

}  // namespace pcdu
