#include "pcdu/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

#include "pcdu/errors.hpp"

namespace pcdu {

std::vector<std::int32_t> Dataset::labels() const {
  std::vector<std::int32_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.name = name;
  out.manifest = manifest;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(samples.at(i));
  return out;
}

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

double parse_real(std::string_view tok, const std::string& source, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(source, line, "not a finite number: '" + std::string(tok) + "'");
  }
  return v;
}

std::int32_t parse_int(std::string_view tok, const std::string& source, std::size_t line) {
  std::int32_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(source, line, "not an integer: '" + std::string(tok) + "'");
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PointCloud parse_cloud(const std::string& text, const std::string& source) {
  PointCloud cloud;
  std::vector<std::int32_t> labels;
  std::optional<bool> with_labels;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokens(strip_comment(line));
    if (toks.empty()) continue;
    if (toks.size() != 6 && toks.size() != 7) {
      throw ParseError(source, line_no, "expected 6 or 7 fields, got " + std::to_string(toks.size()));
    }
    const bool labeled = toks.size() == 7;
    if (with_labels && *with_labels != labeled) {
      throw ParseError(source, line_no, "mixes labeled and unlabeled points");
    }
    with_labels = labeled;
    Vec3 p{}, n{};
    for (int a = 0; a < 3; ++a) {
      p[a] = parse_real(toks[a], source, line_no);
      n[a] = parse_real(toks[3 + a], source, line_no);
    }
    cloud.coords.push_back(p);
    cloud.normals.push_back(n);
    if (labeled) {
      const auto l = parse_int(toks[6], source, line_no);
      if (l < 0) throw ParseError(source, line_no, "negative label");
      labels.push_back(l);
    }
  }
  if (cloud.coords.empty()) throw ParseError(source, 0, "no points");
  if (with_labels && *with_labels) cloud.labels = std::move(labels);
  return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path) { return parse_cloud(read_file(path), path.string()); }

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  cloud.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.coords[i];
    const auto& n = cloud.normals[i];
    out << p[0] << ' ' << p[1] << ' ' << p[2] << ' ' << n[0] << ' ' << n[1] << ' ' << n[2];
    if (cloud.labels) out << ' ' << (*cloud.labels)[i];
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

Dataset load_manifest(const std::filesystem::path& manifest) {
  const std::string text = read_file(manifest);
  Dataset ds;
  ds.manifest = manifest;
  ds.name = manifest.parent_path().filename().string();
  const auto base = manifest.parent_path();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokens(strip_comment(line));
    if (toks.empty()) continue;
    if (toks.size() != 2) {
      throw ParseError(manifest.string(), line_no, "expected '<path> <label>', got " + std::to_string(toks.size()) +
                                                       " fields");
    }
    Sample s;
    s.path = std::string(toks[0]);
    s.label = parse_int(toks[1], manifest.string(), line_no);
    if (s.label < 0) throw ParseError(manifest.string(), line_no, "negative class label");
    s.cloud = load_cloud(base / s.path);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ParseError(manifest.string(), 0, "manifest lists no samples");
  return ds;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, Dataset& dataset) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "manifest.txt";
  std::ofstream out(manifest);
  if (!out) throw Error("cannot write " + manifest.string());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    auto& s = dataset.samples[i];
    if (s.path.empty()) {
      std::ostringstream name;
      name << "clouds/" << (s.label == kAneurysm ? "aneurysm" : "healthy") << '_' << std::setw(5)
           << std::setfill('0') << i << ".txt";
      s.path = name.str();
    }
    write_cloud(dir / s.path, s.cloud);
    out << s.path << ' ' << s.label << '\n';
  }
  dataset.manifest = manifest;
  return manifest;
}

PointCloud sample_points(const PointCloud& cloud, std::size_t count, RngStream& rng) {
  const std::size_t n = cloud.size();
  if (n == 0) throw ValueError("sample_points: empty cloud");
  if (count == 0) throw ValueError("sample_points: count must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with our own draws keeps the result independent of the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  if (count <= n) {
    order.resize(count);
  } else {
    for (std::size_t i = n; i < count; ++i) order.push_back(rng.below(n));
  }
  PointCloud out;
  out.coords.reserve(count);
  out.normals.reserve(count);
  if (cloud.labels) out.labels.emplace().reserve(count);
  for (auto i : order) {
    out.coords.push_back(cloud.coords[i]);
    out.normals.push_back(cloud.normals[i]);
    if (cloud.labels) out.labels->push_back((*cloud.labels)[i]);
  }
  return out;
}

void SplitSpec::validate() const {
  auto ok = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!ok(test_fraction) || test_fraction >= 1.0) throw ConfigError("split: test_fraction must be in (0, 1)");
  if (!ok(labeled_fraction)) throw ConfigError("split: labeled_fraction must be in (0, 1]");
}

std::vector<std::size_t> DatasetSplit::pretrain_pool() const {
  std::vector<std::size_t> pool = unlabeled;
  pool.insert(pool.end(), labeled.begin(), labeled.end());
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::size_t> stratified_counts(const std::vector<std::size_t>& class_sizes, double fraction) {
  std::vector<std::size_t> take(class_sizes.size(), 0);
  if (class_sizes.empty()) return take;
  const std::size_t total = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  // The epsilon keeps products like 2025 × 0.2 from flooring to 404.
  auto floor_of = [](double v) { return static_cast<std::size_t>(std::floor(v + 1e-9)); };
  const std::size_t target = floor_of(static_cast<double>(total) * fraction);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    take[c] = floor_of(static_cast<double>(class_sizes[c]) * fraction);
    assigned += take[c];
  }
  const auto largest = static_cast<std::size_t>(
      std::max_element(class_sizes.begin(), class_sizes.end()) - class_sizes.begin());
  take[largest] = std::min(class_sizes[largest], take[largest] + (target - assigned));
  return take;
}

namespace {

// Sample indices per class, each list shuffled by the given stream.
std::map<std::int32_t, std::vector<std::size_t>> by_class(const std::vector<std::int32_t>& labels,
                                                          const std::vector<std::size_t>& members, RngStream& rng) {
  std::map<std::int32_t, std::vector<std::size_t>> groups;
  for (auto i : members) groups[labels[i]].push_back(i);
  for (auto& [cls, idx] : groups) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  }
  return groups;
}

std::vector<std::size_t> sizes_of(const std::map<std::int32_t, std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> sizes;
  for (const auto& [cls, idx] : groups) sizes.push_back(idx.size());
  return sizes;
}

void split_labeled(const std::vector<std::int32_t>& labels, const std::vector<std::size_t>& remainder,
                   const SplitSpec& spec, DatasetSplit& out) {
  RngStream rng(spec.seed, "split.labeled");
  auto groups = by_class(labels, remainder, rng);
  const auto take = stratified_counts(sizes_of(groups), spec.labeled_fraction);
  std::size_t c = 0;
  for (auto& [cls, idx] : groups) {
    if (take[c] == 0) {
      throw ValueError("split: class " + std::to_string(cls) + " has no labeled samples at fraction " +
                       std::to_string(spec.labeled_fraction));
    }
    out.labeled.insert(out.labeled.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
    out.unlabeled.insert(out.unlabeled.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
    ++c;
  }
  std::sort(out.labeled.begin(), out.labeled.end());
  std::sort(out.unlabeled.begin(), out.unlabeled.end());
}

}  // namespace

DatasetSplit split_dataset(const std::vector<std::int32_t>& labels, const SplitSpec& spec) {
  spec.validate();
  if (labels.empty()) throw ValueError("split: empty dataset");
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  RngStream rng(spec.seed, "split.test");
  auto groups = by_class(labels, all, rng);
  const auto take = stratified_counts(sizes_of(groups), spec.test_fraction);

  DatasetSplit out;
  std::vector<std::size_t> remainder;
  std::size_t c = 0;
  for (auto& [cls, idx] : groups) {
    if (take[c] == 0 || take[c] == idx.size()) {
      throw ValueError("split: class " + std::to_string(cls) + " cannot populate both the test set and training data");
    }
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
    remainder.insert(remainder.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
    ++c;
  }
  std::sort(out.test.begin(), out.test.end());
  std::sort(remainder.begin(), remainder.end());
  split_labeled(labels, remainder, spec, out);
  return out;
}

DatasetSplit kfold_split(const std::vector<std::int32_t>& labels, std::size_t folds, std::size_t fold,
                         const SplitSpec& spec) {
  if (folds < 2 || fold >= folds) throw ConfigError("split: need folds >= 2 and fold < folds");
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0)) {
    throw ConfigError("split: labeled_fraction must be in (0, 1]");
  }
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  RngStream rng(spec.seed, "split.kfold");
  auto groups = by_class(labels, all, rng);
  DatasetSplit out;
  std::vector<std::size_t> remainder;
  for (auto& [cls, idx] : groups) {
    // Class members are dealt round-robin onto folds.
    for (std::size_t i = 0; i < idx.size(); ++i) (i % folds == fold ? out.test : remainder).push_back(idx[i]);
  }
  std::sort(out.test.begin(), out.test.end());
  std::sort(remainder.begin(), remainder.end());
  split_labeled(labels, remainder, spec, out);
  return out;
}

Dataset gen_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.healthy + spec.aneurysm == 0 || spec.points == 0) {
    throw ValueError("gen_synthetic: need at least one cloud with at least one point");
  }
  if (!(spec.bump_fraction >= 0.0 && spec.bump_fraction <= 1.0)) {
    throw ValueError("gen_synthetic: bump_fraction must be in [0, 1]");
  }
  auto noise = [&](RngStream& rng) { return spec.surface_noise > 0.0 ? rng.normal(0.0, spec.surface_noise) : 0.0; };
  Dataset ds;
  ds.name = "synthetic";
  const std::size_t total = spec.healthy + spec.aneurysm;
  for (std::size_t s = 0; s < total; ++s) {
    const bool aneurysm = s >= spec.healthy;
    RngStream rng(seed, "synth", 0, s);
    // Per-vessel variation in calibre and length.
    const double radius = spec.radius * rng.uniform(0.8, 1.2);
    const double length = spec.length * rng.uniform(0.8, 1.2);
    const double bump_theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double bump_y = rng.uniform(-0.25, 0.25) * length;
    const double bump_radius = radius * rng.uniform(0.6, 0.9);
    const Vec3 bump_normal{std::cos(bump_theta), 0.0, std::sin(bump_theta)};
    const Vec3 bump_centre{radius * bump_normal[0], bump_y, radius * bump_normal[2]};

    Sample sample;
    sample.label = aneurysm ? kAneurysm : kHealthy;
    PointCloud& cloud = sample.cloud;
    cloud.labels.emplace();
    for (std::size_t i = 0; i < spec.points; ++i) {
      if (aneurysm && rng.uniform() < spec.bump_fraction) {
        // Uniform direction on the outward hemisphere.
        Vec3 u{};
        double len = 0.0;
        do {
          u = {rng.normal(), rng.normal(), rng.normal()};
          len = std::sqrt(dot(u, u));
        } while (len < 1e-12);
        for (double& v : u) v /= len;
        if (dot(u, bump_normal) < 0.0) {
          const double d = 2.0 * dot(u, bump_normal);
          for (int a = 0; a < 3; ++a) u[a] -= d * bump_normal[a];
        }
        const double r = bump_radius + noise(rng);
        cloud.coords.push_back({bump_centre[0] + r * u[0], bump_centre[1] + r * u[1], bump_centre[2] + r * u[2]});
        cloud.normals.push_back(u);
        cloud.labels->push_back(1);
      } else {
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double y = rng.uniform(-0.5, 0.5) * length;
        const double r = radius + noise(rng);
        cloud.coords.push_back({r * std::cos(theta), y, r * std::sin(theta)});
        cloud.normals.push_back({std::cos(theta), 0.0, std::sin(theta)});
        cloud.labels->push_back(0);
      }
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace pcdu
