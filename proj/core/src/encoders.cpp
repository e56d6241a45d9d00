#include "pcdu/encoders.hpp"

#include <algorithm>

#include "pcdu/errors.hpp"
#include "pcdu/pointops.hpp"

namespace pcdu {

namespace {

constexpr std::size_t kPointFeatures = 6;

void check_clouds(std::span<const PointCloud> clouds, const char* who) {
  if (clouds.empty()) throw ValueError(std::string(who) + ": empty batch");
  for (const auto& c : clouds) {
    if (c.size() == 0) throw ValueError(std::string(who) + ": empty point cloud");
    if (c.normals.size() != c.size()) {
      throw DimensionError(who, "cloud", "each point needs 3 coordinates and 3 normal components");
    }
  }
}

// Stacks [coords ‖ normals] of every cloud; offsets delimit clouds.
Var stack_points(std::span<const PointCloud> clouds, std::vector<std::size_t>& offsets) {
  offsets.assign(1, 0);
  for (const auto& c : clouds) offsets.push_back(offsets.back() + c.size());
  Tensor t({offsets.back(), kPointFeatures});
  std::size_t r = 0;
  for (const auto& c : clouds) {
    for (std::size_t i = 0; i < c.size(); ++i, ++r) {
      for (int a = 0; a < 3; ++a) {
        t(r, a) = static_cast<Real>(c.coords[i][a]);
        t(r, 3 + a) = static_cast<Real>(c.normals[i][a]);
      }
    }
  }
  return Var(std::move(t));
}

std::vector<std::size_t> row_owner(const std::vector<std::size_t>& offsets) {
  std::vector<std::size_t> owner(offsets.back());
  for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
    std::fill(owner.begin() + static_cast<std::ptrdiff_t>(offsets[b]),
              owner.begin() + static_cast<std::ptrdiff_t>(offsets[b + 1]), b);
  }
  return owner;
}

// [per-point ‖ owning cloud's global vector], then its max-pool.
void attach_global(BranchOutput& out, const Var& per_point_local, const std::vector<std::size_t>& offsets) {
  const auto owner = row_owner(offsets);
  out.per_point = ops::concat_cols({per_point_local, ops::gather_rows(out.global, owner)});
  out.pooled = ops::segment_max(out.per_point, offsets).values;
}

}  // namespace

PointNetEncoder::PointNetEncoder(const std::vector<std::size_t>& widths, RngStream& init)
    : mlp_(kPointFeatures, widths, false, init) {}

BranchOutput PointNetEncoder::forward(std::span<const PointCloud> clouds, Mode mode, bool segmentation) {
  check_clouds(clouds, "branch1");
  std::vector<std::size_t> offsets;
  Var x = stack_points(clouds, offsets);
  Var features = mlp_.forward(x, mode);
  BranchOutput out;
  out.global = ops::segment_max(features, offsets).values;
  if (segmentation) {
    attach_global(out, features, offsets);
  } else {
    out.pooled = out.global;
  }
  return out;
}

void PointNetEncoder::collect(const std::string& prefix, std::vector<NamedParam>& params,
                              std::vector<NamedBuffer>& buffers) {
  mlp_.collect(prefix, "conv", params, buffers);
}

HierarchicalEncoder::HierarchicalEncoder(const ModelConfig& config, RngStream& init) : levels_(config.levels) {
  std::size_t prev_width = 0;
  for (const auto& lvl : levels_) {
    level_mlps_.emplace_back(kPointFeatures + prev_width, lvl.widths, false, init);
    prev_width = lvl.widths.back();
  }
  if (config.task == Task::Segmentation) {
    has_segmentation_ = true;
    const std::size_t L = levels_.size();
    std::size_t carried = levels_.back().widths.back();
    for (std::size_t s = 0; s < L; ++s) {
      const std::size_t target = L - 1 - s;
      const std::size_t skip = target == 0 ? kPointFeatures : levels_[target - 1].widths.back();
      propagation_mlps_.emplace_back(carried + skip, config.propagation_widths.at(s), false, init);
      carried = config.propagation_widths[s].back();
    }
    unit_ = Mlp(carried, config.unit_widths, false, init);
  }
}

std::size_t HierarchicalEncoder::representation_width() const { return level_mlps_.back().out_width(); }

BranchOutput HierarchicalEncoder::forward(std::span<const PointCloud> clouds, Mode mode, bool segmentation) {
  check_clouds(clouds, "branch2");
  if (segmentation && !has_segmentation_) {
    throw ValueError("branch2: encoder was built without propagation levels");
  }
  const std::size_t B = clouds.size();
  const std::size_t L = levels_.size();
  for (const auto& c : clouds) {
    if (levels_.front().centroids > c.size()) {
      throw ValueError("branch2: cloud has " + std::to_string(c.size()) + " points but level 1 samples " +
                       std::to_string(levels_.front().centroids) + " centroids");
    }
  }

  // Level l's points per cloud, its feature rows and the cloud offsets into them.
  std::vector<std::vector<PointCloud>> points(L + 1);
  std::vector<Var> features(L + 1);
  std::vector<std::vector<std::size_t>> offsets(L + 1);
  points[0].assign(clouds.begin(), clouds.end());
  features[0] = stack_points(clouds, offsets[0]);
  trace_.clear();

  for (std::size_t l = 0; l < L; ++l) {
    const auto& lvl = levels_[l];
    std::vector<GroupedSet> groups;
    groups.reserve(B);
    points[l + 1].resize(B);
    for (std::size_t b = 0; b < B; ++b) {
      const PointCloud& src = points[l][b];
      PointCloud& next = points[l + 1][b];
      LevelTrace trace;
      trace.input_points = src.size();
      if (lvl.groups_all()) {
        groups.push_back(group_all(src));
        next.coords = {{0.0, 0.0, 0.0}};
        next.normals = {{0.0, 0.0, 0.0}};
      } else {
        auto picks = farthest_point_sample(src.coords, lvl.centroids);
        groups.push_back(knn_group(src, picks, lvl.k));
        for (auto i : picks) {
          next.coords.push_back(src.coords[i]);
          next.normals.push_back(src.normals[i]);
        }
        trace.centroids = std::move(picks);
      }
      if (b == 0) {
        trace.group_size = groups.back().group_size;
        trace_.push_back(std::move(trace));
      }
    }

    std::size_t total_rows = 0;
    for (const auto& g : groups) total_rows += g.group_indices.size();
    Tensor local({total_rows, kPointFeatures});
    std::vector<std::size_t> gather;
    gather.reserve(total_rows);
    std::vector<std::size_t> segments{0};
    offsets[l + 1].assign(1, 0);
    std::size_t row = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& g = groups[b];
      std::copy(g.group_features.values().begin(), g.group_features.values().end(),
                local.data() + row * kPointFeatures);
      row += g.group_indices.size();
      for (auto idx : g.group_indices) gather.push_back(offsets[l][b] + idx);
      for (std::size_t c = 0; c < g.centroid_count(); ++c) segments.push_back(segments.back() + g.group_size);
      offsets[l + 1].push_back(offsets[l + 1].back() + g.centroid_count());
    }
    Var input(std::move(local));
    if (l > 0) input = ops::concat_cols({input, ops::gather_rows(features[l], gather)});
    Var h = level_mlps_[l].forward(input, mode);
    features[l + 1] = ops::segment_max(h, segments).values;
  }

  BranchOutput out;
  out.global = features[L];
  if (!segmentation) {
    out.pooled = out.global;
    return out;
  }

  Var carried = features[L];
  for (std::size_t s = 0; s < L; ++s) {
    const std::size_t target = L - 1 - s;
    const std::size_t source = L - s;
    std::vector<std::size_t> idx;
    std::vector<Real> wts;
    for (std::size_t b = 0; b < B; ++b) {
      const auto plan = interpolation_plan(points[source][b].coords, points[target][b].coords);
      for (std::size_t r = 0; r < points[target][b].size(); ++r) {
        for (std::size_t j = 0; j < kInterpolationNeighbors; ++j) {
          if (j < plan.per_row) {
            idx.push_back(offsets[source][b] + plan.indices[r * plan.per_row + j]);
            wts.push_back(static_cast<Real>(plan.weights[r * plan.per_row + j]));
          } else {
            idx.push_back(offsets[source][b] + plan.indices[r * plan.per_row]);
            wts.push_back(Real(0));
          }
        }
      }
    }
    Var interpolated = ops::weighted_gather(carried, idx, wts, kInterpolationNeighbors);
    carried = propagation_mlps_[s].forward(ops::concat_cols({interpolated, features[target]}), mode);
  }
  Var unit = unit_.forward(carried, mode);
  attach_global(out, unit, offsets[0]);
  return out;
}

void HierarchicalEncoder::collect(const std::string& prefix, std::vector<NamedParam>& params,
                                  std::vector<NamedBuffer>& buffers) {
  for (std::size_t l = 0; l < level_mlps_.size(); ++l) {
    level_mlps_[l].collect(prefix + ".sa" + std::to_string(l + 1), "mlp", params, buffers);
  }
  for (std::size_t s = 0; s < propagation_mlps_.size(); ++s) {
    propagation_mlps_[s].collect(prefix + ".fp" + std::to_string(s + 1), "mlp", params, buffers);
  }
  if (has_segmentation_) unit_.collect(prefix + ".unit", "mlp", params, buffers);
}

ProjectionHead::ProjectionHead(std::size_t in, const std::vector<std::size_t>& widths, RngStream& init)
    : mlp_(in, widths, true, init) {}

Var ProjectionHead::forward(const Var& h, Mode mode) {
  if (h.shape().size() != 2 || h.cols() != in_width()) {
    throw DimensionError("project", "h",
                         shape_string(h.shape()) + " does not match head input width " + std::to_string(in_width()));
  }
  return mlp_.forward(h, mode);
}

void ProjectionHead::collect(const std::string& prefix, std::vector<NamedParam>& params,
                             std::vector<NamedBuffer>& buffers) {
  mlp_.collect(prefix, "fc", params, buffers);
}

Var Representations::concat_pooled() const {
  if (branches.size() == 1) return branches.front().pooled;
  return ops::concat_cols({branches[0].pooled, branches[1].pooled});
}

Var Representations::concat_per_point() const {
  for (const auto& b : branches) {
    if (!b.per_point.defined()) throw ValueError("representations: per-point features need the segmentation task");
  }
  if (branches.size() == 1) return branches.front().per_point;
  return ops::concat_cols({branches[0].per_point, branches[1].per_point});
}

namespace {
RngStream init_stream(std::uint64_t seed, const char* part) { return RngStream(seed, part); }
}  // namespace

EncoderModel::EncoderModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      projection_([&] {
        auto rng = init_stream(seed, "init.proj");
        return ProjectionHead(config.pooled_width(), config.projection_widths, rng);
      }()) {
  const auto& first = config_.levels.at(0);
  config_.validate(first.groups_all() ? 1 : first.centroids);
  if (config_.encoder_mode != EncoderMode::Branch2Only) {
    auto rng = init_stream(seed, "init.branch1");
    branch1_.emplace(config_.branch1_widths, rng);
  }
  if (config_.encoder_mode != EncoderMode::Branch1Only) {
    auto rng = init_stream(seed, "init.branch2");
    branch2_.emplace(config_, rng);
  }
}

BranchOutput EncoderModel::run_branch(int which, std::span<const PointCloud> clouds, Mode mode) {
  const bool seg = config_.task == Task::Segmentation;
  return which == 1 ? branch1_->forward(clouds, mode, seg) : branch2_->forward(clouds, mode, seg);
}

Representations EncoderModel::represent(std::span<const PointCloud> clouds, Mode mode) {
  Representations reps;
  if (branch1_) reps.branches.push_back(run_branch(1, clouds, mode));
  if (branch2_) reps.branches.push_back(run_branch(2, clouds, mode));
  return reps;
}

Var EncoderModel::embed_pairs(std::span<const PointCloud> views_a, std::span<const PointCloud> views_b, Mode mode) {
  if (views_a.size() != views_b.size() || views_a.empty()) {
    throw ValueError("embed_pairs: need the same non-zero number of views per branch");
  }
  const std::size_t N = views_a.size();
  Var stacked;
  if (config_.encoder_mode == EncoderMode::Dual) {
    Var a = run_branch(1, views_a, mode).pooled;
    Var b = run_branch(2, views_b, mode).pooled;
    stacked = ops::concat_rows({a, b});
  } else {
    std::vector<PointCloud> all(views_a.begin(), views_a.end());
    all.insert(all.end(), views_b.begin(), views_b.end());
    stacked = run_branch(branch1_ ? 1 : 2, all, mode).pooled;
  }
  std::vector<std::size_t> order;
  order.reserve(2 * N);
  for (std::size_t k = 0; k < N; ++k) {
    order.push_back(k);
    order.push_back(N + k);
  }
  return projection_.forward(ops::gather_rows(stacked, order), mode);
}

std::vector<NamedParam> EncoderModel::parameters() {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
  if (branch1_) branch1_->collect("branch1", params, buffers);
  if (branch2_) branch2_->collect("branch2", params, buffers);
  projection_.collect("proj", params, buffers);
  return params;
}

std::vector<NamedBuffer> EncoderModel::buffers() {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
  if (branch1_) branch1_->collect("branch1", params, buffers);
  if (branch2_) branch2_->collect("branch2", params, buffers);
  projection_.collect("proj", params, buffers);
  return buffers;
}

}  // namespace pcdu
