#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcdu {

enum class Task { Classification, Segmentation };
std::string to_string(Task task);
Task parse_task(std::string_view text);

/// Which encoders see the two views. Dual routes view_a to branch 1 and
/// view_b to branch 2; the single modes send both views through one branch.
enum class EncoderMode { Dual, Branch1Only, Branch2Only };
std::string to_string(EncoderMode mode);
EncoderMode parse_encoder_mode(std::string_view text);

/// One set-abstraction level. `centroids == 0` together with `k == nullopt`
/// groups every point of the previous level into a single region.
struct AbstractionLevelConfig {
  std::size_t centroids = 0;
  std::optional<std::size_t> k;
  std::vector<std::size_t> widths;

  bool groups_all() const noexcept { return centroids == 0; }
};

struct ModelConfig {
  Task task = Task::Classification;
  EncoderMode encoder_mode = EncoderMode::Dual;
  std::vector<std::size_t> branch1_widths;
  std::vector<AbstractionLevelConfig> levels;
  std::vector<std::vector<std::size_t>> propagation_widths;  // coarse to fine
  std::vector<std::size_t> unit_widths;
  std::vector<std::size_t> projection_widths;
  std::vector<std::size_t> head_hidden_widths;
  std::size_t num_classes = 2;

  /// Published layer sizes. Centroid counts follow the sampled point count:
  /// min(512, points/2) then a quarter of that.
  static ModelConfig full(Task task, std::size_t points);
  /// Narrow layers for desk-scale training runs.
  static ModelConfig small(Task task, std::size_t points);
  /// Very narrow layers for finite-difference checks.
  static ModelConfig tiny(Task task, std::size_t points);
  static ModelConfig profile(std::string_view name, Task task, std::size_t points);

  /// Width of h from each branch (1024 in the full profile).
  std::size_t representation_width() const;
  /// Width fed to the projection head: h for classification, the pooled
  /// [per-point ‖ global] vector (2h) for segmentation.
  std::size_t pooled_width() const;
  std::size_t embedding_width() const { return projection_widths.back(); }
  std::size_t branch_count() const { return encoder_mode == EncoderMode::Dual ? 2 : 1; }
  /// Classifier input (concatenated pooled vectors) or segmenter per-point input.
  std::size_t head_input_width() const;

  /// Throws ConfigError if the layer chain is inconsistent or `points` is too
  /// small for the configured centroid counts.
  void validate(std::size_t points) const;
};

}  // namespace pcdu
