#include "pcdu/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/sha.h>

#include "pcdu/errors.hpp"

namespace pcdu {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number<std::size_t>(key, item));
  }
  if (out.empty()) throw ConfigError("config: '" + key + "' expects a comma-separated list");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string real(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

RunConfig RunConfig::defaults(Task task, std::size_t points) {
  RunConfig c;
  c.task = task;
  c.points = points;
  c.model = ModelConfig::full(task, points);
  if (task == Task::Segmentation) {
    c.weight_decay_downstream = 1.0;
    c.decoupled_decay_downstream = true;
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto rebuild_model = [this] {
    const auto mode = model.encoder_mode;
    model = ModelConfig::profile(model_profile, task, points);
    model.encoder_mode = mode;
  };
  auto level = [&](std::size_t i) -> AbstractionLevelConfig& {
    if (i >= model.levels.size()) throw ConfigError("config: '" + key + "' refers to a missing level");
    return model.levels[i];
  };
  if (key == "task") {
    task = parse_task(value);
    const bool seg = task == Task::Segmentation;
    weight_decay_downstream = seg ? 1.0 : 1e-6;
    decoupled_decay_downstream = seg;
    rebuild_model();
  } else if (key == "points") {
    points = parse_number<std::size_t>(key, value);
    rebuild_model();
  } else if (key == "model") {
    model_profile = value;
    rebuild_model();
  } else if (key == "encoder") {
    model.encoder_mode = parse_encoder_mode(value);
  } else if (key == "batch_size") {
    batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "epochs") {
    epochs = parse_number<std::size_t>(key, value);
  } else if (key == "base_lr") {
    base_lr = parse_number<double>(key, value);
  } else if (key == "tau") {
    tau = parse_number<double>(key, value);
  } else if (key == "augment") {
    augment.kind = parse_augment_kind(value);
  } else if (key == "jitter_sigma") {
    augment.sigma = parse_number<double>(key, value);
  } else if (key == "jitter_clip") {
    augment.clip = parse_number<double>(key, value);
  } else if (key == "perturb_angle") {
    augment.max_perturb_angle = parse_number<double>(key, value);
  } else if (key == "renormalize_normals") {
    augment.renormalize_normals = parse_bool(key, value);
  } else if (key == "weight_decay_pretrain") {
    weight_decay_pretrain = parse_number<double>(key, value);
  } else if (key == "weight_decay_downstream") {
    weight_decay_downstream = parse_number<double>(key, value);
  } else if (key == "decoupled_decay_downstream") {
    decoupled_decay_downstream = parse_bool(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
    split.seed = seed;
  } else if (key == "test_fraction") {
    split.test_fraction = parse_number<double>(key, value);
  } else if (key == "labeled_fraction") {
    split.labeled_fraction = parse_number<double>(key, value);
  } else if (key == "folds") {
    folds = parse_number<std::size_t>(key, value);
  } else if (key == "fold") {
    fold = parse_number<std::size_t>(key, value);
  } else if (key == "num_classes") {
    model.num_classes = parse_number<std::size_t>(key, value);
  } else if (key == "branch1_widths") {
    model.branch1_widths = parse_list(key, value);
  } else if (key == "sa_centroids") {
    const auto v = parse_list(key, value);
    for (std::size_t i = 0; i < v.size(); ++i) level(i).centroids = v[i];
  } else if (key == "sa_k") {
    const auto v = parse_list(key, value);
    for (std::size_t i = 0; i < v.size(); ++i) level(i).k = v[i];
  } else if (key == "sa1_widths" || key == "sa2_widths" || key == "sa3_widths") {
    level(static_cast<std::size_t>(key[2] - '1')).widths = parse_list(key, value);
  } else if (key == "fp1_widths" || key == "fp2_widths" || key == "fp3_widths") {
    const auto i = static_cast<std::size_t>(key[2] - '1');
    if (i >= model.propagation_widths.size()) throw ConfigError("config: '" + key + "' refers to a missing level");
    model.propagation_widths[i] = parse_list(key, value);
  } else if (key == "unit_widths") {
    model.unit_widths = parse_list(key, value);
  } else if (key == "projection_widths") {
    model.projection_widths = parse_list(key, value);
  } else if (key == "head_widths") {
    model.head_hidden_widths = parse_list(key, value);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (points == 0) throw ConfigError("config: points must be positive");
  if (batch_size == 0) throw ConfigError("config: batch_size must be positive");
  if (epochs == 0) throw ConfigError("config: epochs must be positive");
  if (!(base_lr > 0.0)) throw ConfigError("config: base_lr must be positive");
  if (!(tau > 0.0)) throw ConfigError("config: tau must be positive");
  if (!(weight_decay_pretrain >= 0.0) || !(weight_decay_downstream >= 0.0)) {
    throw ConfigError("config: weight decay must be non-negative");
  }
  if (folds == 1 || (folds > 1 && fold >= folds)) throw ConfigError("config: need folds >= 2 and fold < folds");
  augment.validate();
  split.validate();
  model.validate(points);
}

std::string RunConfig::canonical() const {
  std::ostringstream o;
  o << "task = " << to_string(task) << "\n"
    << "points = " << points << "\n"
    << "model = " << model_profile << "\n"
    << "encoder = " << to_string(model.encoder_mode) << "\n"
    << "batch_size = " << batch_size << "\n"
    << "epochs = " << epochs << "\n"
    << "base_lr = " << real(base_lr) << "\n"
    << "tau = " << real(tau) << "\n"
    << "augment = " << to_string(augment.kind) << "\n"
    << "jitter_sigma = " << real(augment.sigma) << "\n"
    << "jitter_clip = " << real(augment.clip) << "\n"
    << "perturb_angle = " << real(augment.max_perturb_angle) << "\n"
    << "renormalize_normals = " << (augment.renormalize_normals ? "true" : "false") << "\n"
    << "weight_decay_pretrain = " << real(weight_decay_pretrain) << "\n"
    << "weight_decay_downstream = " << real(weight_decay_downstream) << "\n"
    << "decoupled_decay_downstream = " << (decoupled_decay_downstream ? "true" : "false") << "\n"
    << "seed = " << seed << "\n"
    << "test_fraction = " << real(split.test_fraction) << "\n"
    << "labeled_fraction = " << real(split.labeled_fraction) << "\n"
    << "folds = " << folds << "\n"
    << "fold = " << fold << "\n"
    << "num_classes = " << model.num_classes << "\n"
    << "branch1_widths = " << join(model.branch1_widths) << "\n";
  std::vector<std::size_t> centroids, ks;
  for (const auto& l : model.levels) {
    if (!l.groups_all()) {
      centroids.push_back(l.centroids);
      ks.push_back(l.k.value_or(0));
    }
  }
  if (!centroids.empty()) o << "sa_centroids = " << join(centroids) << "\nsa_k = " << join(ks) << "\n";
  for (std::size_t i = 0; i < model.levels.size(); ++i) {
    o << "sa" << i + 1 << "_widths = " << join(model.levels[i].widths) << "\n";
  }
  for (std::size_t i = 0; i < model.propagation_widths.size(); ++i) {
    o << "fp" << i + 1 << "_widths = " << join(model.propagation_widths[i]) << "\n";
  }
  o << "unit_widths = " << join(model.unit_widths) << "\n"
    << "projection_widths = " << join(model.projection_widths) << "\n"
    << "head_widths = " << join(model.head_hidden_widths) << "\n";
  return o.str();
}

ConfigHash RunConfig::hash() const {
  const std::string text = canonical();
  ConfigHash out{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), out.data());
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(source, line_no, "expected 'key = value'");
    try {
      base.set(key, value);
    } catch (const ConfigError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base), path.string());
}

std::string hex(const ConfigHash& hash) {
  std::ostringstream o;
  for (auto b : hash) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
  return o.str();
}

}  // namespace pcdu
