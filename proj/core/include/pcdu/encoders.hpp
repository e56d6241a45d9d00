#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcdu/layers.hpp"
#include "pcdu/model_config.hpp"
#include "pcdu/point_cloud.hpp"

namespace pcdu {

/// Per-cloud branch output for a batch of B clouds.
struct BranchOutput {
  Var global;    // B × h
  Var per_point; // (Σn) × 2h, segmentation only: [per-point ‖ broadcast global]
  Var pooled;    // B × pooled_width: global (classification) or max-pool of per_point
};

/// Global branch: shared per-point convolutions then max-pool.
class PointNetEncoder {
 public:
  PointNetEncoder(const std::vector<std::size_t>& widths, RngStream& init);

  BranchOutput forward(std::span<const PointCloud> clouds, Mode mode, bool segmentation);
  std::size_t representation_width() const { return mlp_.out_width(); }
  void collect(const std::string& prefix, std::vector<NamedParam>& params, std::vector<NamedBuffer>& buffers);

 private:
  Mlp mlp_;
};

struct LevelTrace {
  std::vector<std::size_t> centroids;  // indices into the previous level's points
  std::size_t group_size = 0;
  std::size_t input_points = 0;
};

/// Hierarchical branch: set-abstraction levels (FPS → kNN group → shared MLP
/// → per-group max-pool) and, for segmentation, feature-propagation levels
/// back to every input point followed by a unit pointnet.
class HierarchicalEncoder {
 public:
  HierarchicalEncoder(const ModelConfig& config, RngStream& init);

  BranchOutput forward(std::span<const PointCloud> clouds, Mode mode, bool segmentation);
  std::size_t representation_width() const;
  /// Geometry of the most recent forward pass for the first cloud of the batch.
  const std::vector<LevelTrace>& last_trace() const { return trace_; }
  void collect(const std::string& prefix, std::vector<NamedParam>& params, std::vector<NamedBuffer>& buffers);

 private:
  std::vector<AbstractionLevelConfig> levels_;
  std::vector<Mlp> level_mlps_;
  std::vector<Mlp> propagation_mlps_;
  Mlp unit_;
  bool has_segmentation_ = false;
  std::vector<LevelTrace> trace_;
};

/// Projection head g(·): linear stages with bn + ELU, plain final stage.
class ProjectionHead {
 public:
  ProjectionHead(std::size_t in, const std::vector<std::size_t>& widths, RngStream& init);

  Var forward(const Var& h, Mode mode);
  std::size_t in_width() const { return mlp_.in_width(); }
  std::size_t out_width() const { return mlp_.out_width(); }
  void collect(const std::string& prefix, std::vector<NamedParam>& params, std::vector<NamedBuffer>& buffers);
  Mlp& mlp() { return mlp_; }

 private:
  Mlp mlp_;
};

/// Representations for a batch of clouds from each active branch.
struct Representations {
  std::vector<BranchOutput> branches;  // one or two entries, branch order

  /// [pooled_1 ‖ pooled_2] per cloud, or the single branch's pooled vector.
  Var concat_pooled() const;
  /// [per_point_1 ‖ per_point_2] per point (segmentation).
  Var concat_per_point() const;
};

/// Dual-branch encoders plus the shared projection head.
class EncoderModel {
 public:
  /// Validates `config` and initialises every layer from streams keyed by `seed`.
  EncoderModel(const ModelConfig& config, std::uint64_t seed);
  EncoderModel(const EncoderModel&) = delete;
  EncoderModel& operator=(const EncoderModel&) = delete;
  EncoderModel(EncoderModel&&) = default;

  const ModelConfig& config() const { return config_; }

  /// Both branches on the same clouds (downstream representations).
  Representations represent(std::span<const PointCloud> clouds, Mode mode);

  /// Embeddings for N pairs in (view_a_k, view_b_k) row order: 2N × dz.
  Var embed_pairs(std::span<const PointCloud> views_a, std::span<const PointCloud> views_b, Mode mode);

  PointNetEncoder* branch1() { return branch1_ ? &*branch1_ : nullptr; }
  HierarchicalEncoder* branch2() { return branch2_ ? &*branch2_ : nullptr; }
  ProjectionHead& projection() { return projection_; }

  std::vector<NamedParam> parameters();
  std::vector<NamedBuffer> buffers();

 private:
  BranchOutput run_branch(int which, std::span<const PointCloud> clouds, Mode mode);

  ModelConfig config_;
  std::optional<PointNetEncoder> branch1_;
  std::optional<HierarchicalEncoder> branch2_;
  ProjectionHead projection_;
};

}  // namespace pcdu
