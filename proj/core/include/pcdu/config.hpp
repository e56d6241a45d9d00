#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "pcdu/augment.hpp"
#include "pcdu/data.hpp"
#include "pcdu/model_config.hpp"

namespace pcdu {

using ConfigHash = std::array<std::uint8_t, 32>;

/// Everything a training run depends on besides the data bytes.
struct RunConfig {
  Task task = Task::Classification;
  std::size_t points = 1024;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  double base_lr = 1e-3;
  double tau = 0.5;
  AugmentConfig augment;
  double weight_decay_pretrain = 1e-6;
  double weight_decay_downstream = 1e-6;
  bool decoupled_decay_downstream = false;
  std::uint64_t seed = 0;
  SplitSpec split;
  std::size_t folds = 0;  // 0: single stratified split
  std::size_t fold = 0;
  std::string model_profile = "full";
  ModelConfig model;

  /// Published settings for `task` at `points`: weight decay 1e-6 for
  /// classification and 1.0 (decoupled) for the segmentation head.
  static RunConfig defaults(Task task, std::size_t points = 1024);

  /// Applies one `key = value` setting. Unknown keys throw ConfigError.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  /// Canonical `key = value` text; the hash covers exactly this.
  std::string canonical() const;
  ConfigHash hash() const;
};

/// Parses UTF-8 `key = value` lines over `base`. '#' starts a comment.
/// Setting `task`, `points` or `model` re-derives the dependent defaults, so
/// put them first.
RunConfig parse_config(const std::string& text, RunConfig base, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

std::string hex(const ConfigHash& hash);

}  // namespace pcdu
