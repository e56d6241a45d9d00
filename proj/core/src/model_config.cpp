#include "pcdu/model_config.hpp"

#include <algorithm>

#include "pcdu/errors.hpp"

namespace pcdu {

std::string to_string(Task task) { return task == Task::Classification ? "cls" : "seg"; }

Task parse_task(std::string_view text) {
  if (text == "cls" || text == "classification") return Task::Classification;
  if (text == "seg" || text == "segmentation") return Task::Segmentation;
  throw ConfigError("unknown task '" + std::string(text) + "' (expected cls or seg)");
}

std::string to_string(EncoderMode mode) {
  switch (mode) {
    case EncoderMode::Dual: return "dual";
    case EncoderMode::Branch1Only: return "branch1";
    case EncoderMode::Branch2Only: return "branch2";
  }
  return "dual";
}

EncoderMode parse_encoder_mode(std::string_view text) {
  if (text == "dual") return EncoderMode::Dual;
  if (text == "branch1" || text == "single_pn") return EncoderMode::Branch1Only;
  if (text == "branch2" || text == "single_pn2") return EncoderMode::Branch2Only;
  throw ConfigError("unknown encoder mode '" + std::string(text) + "' (expected dual, branch1 or branch2)");
}

namespace {

ModelConfig scaled(Task task, std::size_t points, std::size_t max_centroids, std::size_t k1, std::size_t k2,
                   std::vector<std::size_t> b1, std::vector<std::vector<std::size_t>> sa,
                   std::vector<std::vector<std::size_t>> fp, std::vector<std::size_t> unit,
                   std::vector<std::size_t> proj_cls, std::vector<std::size_t> proj_seg,
                   std::vector<std::size_t> head_cls, std::vector<std::size_t> head_seg) {
  ModelConfig c;
  c.task = task;
  c.branch1_widths = std::move(b1);
  const std::size_t n1 = std::max<std::size_t>(1, std::min(max_centroids, points / 2));
  const std::size_t n2 = std::max<std::size_t>(1, n1 / 4);
  c.levels = {{n1, k1, sa[0]}, {n2, k2, sa[1]}, {0, std::nullopt, sa[2]}};
  c.propagation_widths = std::move(fp);
  c.unit_widths = std::move(unit);
  const bool cls = task == Task::Classification;
  c.projection_widths = cls ? std::move(proj_cls) : std::move(proj_seg);
  c.head_hidden_widths = cls ? std::move(head_cls) : std::move(head_seg);
  c.num_classes = 2;
  return c;
}

}  // namespace

ModelConfig ModelConfig::full(Task task, std::size_t points) {
  return scaled(task, points, 512, 32, 64, {64, 128, 1024}, {{64, 64, 128}, {128, 128, 256}, {256, 512, 1024}},
                {{256, 256}, {256, 128}, {128, 128}}, {512, 1024}, {512, 256, 128}, {1024, 512}, {512, 256, 128},
                {1024, 512, 256});
}

ModelConfig ModelConfig::small(Task task, std::size_t points) {
  return scaled(task, points, 64, 16, 16, {32, 32, 64}, {{16, 16, 32}, {32, 32, 64}, {64, 64, 64}},
                {{64, 64}, {64, 32}, {32, 32}}, {64, 64}, {64, 64, 32}, {64, 32}, {64, 32, 16}, {64, 32, 32});
}

ModelConfig ModelConfig::tiny(Task task, std::size_t points) {
  return scaled(task, points, 8, 4, 3, {8, 8, 16}, {{4, 4, 8}, {8, 8, 8}, {8, 8, 16}}, {{8, 8}, {8, 4}, {4, 4}},
                {8, 16}, {8, 8, 4}, {8, 4}, {8, 8, 4}, {8, 4, 4});
}

ModelConfig ModelConfig::profile(std::string_view name, Task task, std::size_t points) {
  if (name == "full") return full(task, points);
  if (name == "small") return small(task, points);
  if (name == "tiny") return tiny(task, points);
  throw ConfigError("unknown model profile '" + std::string(name) + "' (expected full, small or tiny)");
}

std::size_t ModelConfig::representation_width() const {
  return encoder_mode == EncoderMode::Branch2Only ? levels.back().widths.back() : branch1_widths.back();
}

std::size_t ModelConfig::pooled_width() const {
  return task == Task::Classification ? representation_width() : 2 * representation_width();
}

std::size_t ModelConfig::head_input_width() const { return branch_count() * pooled_width(); }

void ModelConfig::validate(std::size_t points) const {
  auto nonempty = [](const std::vector<std::size_t>& w, const char* what) {
    if (w.empty() || std::find(w.begin(), w.end(), std::size_t{0}) != w.end()) {
      throw ConfigError(std::string("model: ") + what + " must be a non-empty list of positive widths");
    }
  };
  nonempty(branch1_widths, "branch1 widths");
  if (levels.empty()) throw ConfigError("model: at least one abstraction level is required");
  std::size_t available = points;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lvl = levels[i];
    nonempty(lvl.widths, "abstraction widths");
    const bool last = i + 1 == levels.size();
    if (last != lvl.groups_all()) {
      throw ConfigError("model: only the final abstraction level groups all points");
    }
    if (last && lvl.k) throw ConfigError("model: the final abstraction level must have k = None");
    if (!last) {
      if (!lvl.k || *lvl.k == 0) throw ConfigError("model: abstraction level " + std::to_string(i + 1) + " needs k >= 1");
      if (lvl.centroids > available) {
        throw ConfigError("model: level " + std::to_string(i + 1) + " samples " + std::to_string(lvl.centroids) +
                          " centroids from " + std::to_string(available) + " points");
      }
      available = lvl.centroids;
    }
  }
  if (encoder_mode == EncoderMode::Dual && branch1_widths.back() != levels.back().widths.back()) {
    throw ConfigError("model: both branches must produce the same representation width");
  }
  if (task == Task::Segmentation) {
    if (propagation_widths.size() != levels.size()) {
      throw ConfigError("model: one propagation level per abstraction level is required");
    }
    for (const auto& w : propagation_widths) nonempty(w, "propagation widths");
    nonempty(unit_widths, "unit pointnet widths");
    if (unit_widths.back() != levels.back().widths.back()) {
      throw ConfigError("model: the unit pointnet must emit the representation width");
    }
  }
  nonempty(projection_widths, "projection widths");
  for (auto w : head_hidden_widths) {
    if (w == 0) throw ConfigError("model: head widths must be positive");
  }
  if (num_classes < 2) throw ConfigError("model: at least two classes are required");
}

}  // namespace pcdu
