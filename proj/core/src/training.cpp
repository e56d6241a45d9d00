#include "pcdu/training.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <numeric>

#include "pcdu/augment.hpp"
#include "pcdu/contrastive.hpp"
#include "pcdu/errors.hpp"

namespace pcdu {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Fisher-Yates driven by the stream, so the order is identical everywhere.
std::vector<std::size_t> shuffled(std::size_t n, RngStream rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

}  // namespace

nlohmann::json EpochRecord::to_json() const {
  nlohmann::json j{{"record", "epoch"}, {"epoch", epoch}, {"lr", lr}, {"loss", loss}, {"wall_time", wall_time},
                   {"batches", batches}};
  if (accuracy) j["accuracy"] = *accuracy;
  return j;
}

void RunLog::write(const nlohmann::json& record) {
  if (!out_) return;
  *out_ << record.dump() << '\n';
  out_->flush();
}

// ---- checkpoint plumbing ----

void store_run_config(Checkpoint& ckpt, const RunConfig& config) {
  const std::string text = config.canonical();
  std::vector<Real> bytes;
  bytes.reserve(text.size());
  for (char c : text) bytes.push_back(static_cast<Real>(static_cast<unsigned char>(c)));
  const std::size_t n = bytes.size();
  ckpt.put("meta.config", Tensor({n}, std::move(bytes)));
}

RunConfig read_run_config(const Checkpoint& ckpt) {
  const Tensor& t = ckpt.at("meta.config");
  std::string text;
  text.reserve(t.size());
  for (Real v : t.values()) {
    if (!(v >= 0 && v < 256)) throw CheckpointError("checkpoint: corrupt meta.config");
    text.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  RunConfig cfg = parse_config(text, RunConfig{}, "meta.config");
  cfg.validate();
  return cfg;
}

void store_parameters(Checkpoint& ckpt, const std::vector<NamedParam>& params,
                      const std::vector<NamedBuffer>& buffers) {
  for (const auto& p : params) ckpt.put(p.name, p.var.value());
  for (const auto& b : buffers) ckpt.put(b.name, *b.tensor);
}

void restore_parameters(const Checkpoint& ckpt, const std::vector<NamedParam>& params,
                        const std::vector<NamedBuffer>& buffers) {
  auto copy_into = [&](const std::string& name, Tensor& dst) {
    const Tensor& src = ckpt.at(name);
    if (src.shape() != dst.shape()) {
      throw CheckpointError("checkpoint: tensor '" + name + "' has shape " + shape_string(src.shape()) +
                            ", model expects " + shape_string(dst.shape()));
    }
    dst = src;
  };
  for (const auto& p : params) {
    Var v = p.var;
    copy_into(p.name, v.mutable_value());
  }
  for (const auto& b : buffers) copy_into(b.name, *b.tensor);
}

void store_optimizer(Checkpoint& ckpt, const AdamState& state) {
  // step counts stay far below 2^24, exact even in 32-bit files
  ckpt.put("adam.step", Tensor::scalar(static_cast<Real>(state.step)));
  for (const auto& [name, m] : state.first_moment) ckpt.put("adam.m." + name, m);
  for (const auto& [name, v] : state.second_moment) ckpt.put("adam.v." + name, v);
}

void restore_optimizer(const Checkpoint& ckpt, AdamState& state) {
  state.step = static_cast<std::uint64_t>(ckpt.at("adam.step")[0]);
  state.first_moment.clear();
  state.second_moment.clear();
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("adam.m.", 0) == 0) state.first_moment[name.substr(7)] = t;
    if (name.rfind("adam.v.", 0) == 0) state.second_moment[name.substr(7)] = t;
  }
}

std::uint64_t parameter_checksum(const std::vector<NamedParam>& params, const std::vector<NamedBuffer>& buffers) {
  std::vector<std::pair<std::string, const Tensor*>> all;
  for (const auto& p : params) all.emplace_back(p.name, &p.var.value());
  for (const auto& b : buffers) all.emplace_back(b.name, b.tensor);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : all) {
    feed(name.data(), name.size());
    feed(t->data(), t->size() * sizeof(Real));
  }
  return h;
}

// ---- contrastive pretraining ----

Pretrainer::Pretrainer(RunConfig config, Dataset pool)
    : config_(std::move(config)), pool_(std::move(pool)), model_(config_.model, config_.seed) {
  config_.validate();
  if (pool_.samples.empty()) throw ValueError("pretrain: empty dataset pool");
  adam_.weight_decay = config_.weight_decay_pretrain;
  adam_.decoupled = false;
}

Pretrainer Pretrainer::resume(RunConfig config, Dataset pool, const Checkpoint& ckpt) {
  Pretrainer p(std::move(config), std::move(pool));
  restore_parameters(ckpt, p.model_.parameters(), p.model_.buffers());
  restore_optimizer(ckpt, p.adam_);
  p.epoch_ = ckpt.epoch;
  return p;
}

EpochRecord Pretrainer::run_epoch() {
  const auto t0 = Clock::now();
  const std::size_t e = epoch_;
  const double lr = lr_at(e, config_.base_lr);
  const std::size_t n = pool_.size();
  const std::size_t batch = std::min(config_.batch_size, n);
  const auto order = shuffled(n, RngStream(config_.seed, "shuffle", e));
  const auto params = model_.parameters();

  double loss_sum = 0.0;
  std::size_t batches = 0;
  if (batch < 2) {
    std::cerr << "warning: pretrain batch with fewer than 2 clouds skipped (epoch " << e << ")\n";
  }
  // the tail that does not fill a batch is dropped
  for (std::size_t start = 0; batch >= 2 && start + batch <= n; start += batch) {
    std::vector<PointCloud> views_a, views_b;
    views_a.reserve(batch);
    views_b.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k) {
      const std::size_t id = order[start + k];
      RngStream sample_rng(config_.seed, "sample", e, id);
      const PointCloud cloud = sample_points(pool_.samples[id].cloud, config_.points, sample_rng);
      RngStream rng_a(config_.seed, "view_a", e, id);
      RngStream rng_b(config_.seed, "view_b", e, id);
      AugmentedPair pair = make_pair(cloud, config_.augment, rng_a, rng_b, id);
      views_a.push_back(std::move(pair.view_a));
      views_b.push_back(std::move(pair.view_b));
    }
    zero_grads(params);
    const Var z = model_.embed_pairs(views_a, views_b, Mode::Train);
    const Var loss = ntxent_loss(EmbeddingBatch{z, config_.tau});
    backward(loss);
    adam_step(params, adam_, lr);
    loss_sum += loss.item();
    ++batches;
  }
  ++epoch_;
  EpochRecord rec;
  rec.epoch = e;
  rec.lr = lr;
  rec.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  rec.batches = batches;
  rec.wall_time = seconds_since(t0);
  return rec;
}

std::vector<EpochRecord> Pretrainer::run(std::size_t epochs, RunLog* log) {
  std::vector<EpochRecord> out;
  while (epoch_ < epochs) {
    out.push_back(run_epoch());
    if (log) log->write(out.back().to_json());
  }
  return out;
}

Checkpoint Pretrainer::checkpoint(bool with_optimizer) {
  Checkpoint ckpt;
  store_run_config(ckpt, config_);
  store_parameters(ckpt, model_.parameters(), model_.buffers());
  if (with_optimizer) store_optimizer(ckpt, adam_);
  ckpt.config_hash = config_.hash();
  ckpt.epoch = static_cast<std::uint32_t>(epoch_);
  return ckpt;
}

std::vector<EpochRecord> pretrain(const RunConfig& config, const Dataset& pool, Checkpoint* out, RunLog* log) {
  Pretrainer p(config, pool);
  auto records = p.run(config.epochs, log);
  if (out) *out = p.checkpoint();
  return records;
}

EncoderModel load_encoder(const Checkpoint& ckpt) {
  const RunConfig cfg = read_run_config(ckpt);
  EncoderModel model(cfg.model, cfg.seed);
  restore_parameters(ckpt, model.parameters(), model.buffers());
  return model;
}

// ---- downstream ----

RepresentationCache compute_representations(EncoderModel& encoder, const Dataset& data, const RunConfig& config,
                                            const char* purpose) {
  if (encoder.config().task != config.task) {
    throw ConfigError("downstream: encoder was built for task " + to_string(encoder.config().task) +
                      ", run asks for " + to_string(config.task));
  }
  RepresentationCache cache;
  cache.task = config.task;
  const auto classes = static_cast<std::int32_t>(config.model.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    RngStream rng(config.seed, purpose, 0, i);
    const PointCloud cloud = sample_points(s.cloud, config.points, rng);
    const Representations reps = encoder.represent(std::span<const PointCloud>(&cloud, 1), Mode::Eval);
    if (config.task == Task::Classification) {
      if (s.label < 0 || s.label >= classes) {
        throw ValueError("downstream: sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                         " outside [0, " + std::to_string(classes) + ")");
      }
      cache.features.push_back(reps.concat_pooled().value());
      cache.labels.push_back({s.label});
    } else {
      if (!cloud.labels) throw ValueError("downstream: segmentation sample " + std::to_string(i) + " has no point labels");
      for (auto l : *cloud.labels) {
        if (l < 0 || l >= classes) {
          throw ValueError("downstream: sample " + std::to_string(i) + " has point label " + std::to_string(l) +
                           " outside [0, " + std::to_string(classes) + ")");
        }
      }
      cache.features.push_back(reps.concat_per_point().value());
      cache.labels.push_back(*cloud.labels);
    }
  }
  return cache;
}

namespace {
// encoder layout from the checkpoint, head settings from the run
ModelConfig head_model(const EncoderModel& encoder, const RunConfig& config) {
  ModelConfig m = encoder.config();
  m.num_classes = config.model.num_classes;
  m.head_hidden_widths = config.model.head_hidden_widths;
  return m;
}
}  // namespace

DownstreamTrainer::DownstreamTrainer(RunConfig config, EncoderModel& encoder, const Dataset& labeled)
    : DownstreamTrainer(config, compute_representations(encoder, labeled, config), head_model(encoder, config)) {}

DownstreamTrainer::DownstreamTrainer(RunConfig config, RepresentationCache cache, const ModelConfig& model)
    : config_(std::move(config)),
      model_config_(model),
      cache_(std::move(cache)),
      head_(DownstreamHead::for_model(model, config_.seed)) {
  if (cache_.features.empty()) throw ValueError("train-downstream: empty labeled set");
  if (cache_.task != model.task) throw ConfigError("train-downstream: cached representations are for another task");
  for (const auto& f : cache_.features) {
    if (f.cols() != head_.input_width()) {
      throw DimensionError("train-downstream", "representation",
                           "width " + std::to_string(f.cols()) + " vs head input " + std::to_string(head_.input_width()));
    }
  }
  adam_.weight_decay = config_.weight_decay_downstream;
  adam_.decoupled = config_.decoupled_decay_downstream;
}

namespace {

// Stacks the selected cached entries into one matrix plus the matching labels.
std::pair<Tensor, std::vector<std::int32_t>> stack(const RepresentationCache& cache,
                                                   std::span<const std::size_t> which) {
  std::size_t rows = 0;
  for (auto i : which) rows += cache.features[i].rows();
  const std::size_t cols = cache.features[which.front()].cols();
  Tensor x({rows, cols});
  std::vector<std::int32_t> labels;
  labels.reserve(rows);
  std::size_t r = 0;
  for (auto i : which) {
    const Tensor& f = cache.features[i];
    std::copy(f.values().begin(), f.values().end(), x.data() + r * cols);
    r += f.rows();
    labels.insert(labels.end(), cache.labels[i].begin(), cache.labels[i].end());
  }
  return {std::move(x), std::move(labels)};
}

}  // namespace

EpochRecord DownstreamTrainer::run_epoch() {
  const auto t0 = Clock::now();
  const std::size_t e = epoch_;
  const double lr = lr_at(e, config_.base_lr);
  const std::size_t n = cache_.features.size();
  const auto order = shuffled(n, RngStream(config_.seed, "shuffle.downstream", e));
  const auto params = head_.parameters();

  double loss_sum = 0.0;
  std::size_t batches = 0, correct = 0, total = 0;
  for (std::size_t start = 0; start < n; start += config_.batch_size) {
    const std::size_t len = std::min(config_.batch_size, n - start);
    auto [x, labels] = stack(cache_, std::span<const std::size_t>(order.data() + start, len));
    zero_grads(params);
    const Var logits = head_.forward(Var(std::move(x), false), Mode::Train);
    const Var loss = cross_entropy(logits, labels);
    backward(loss);
    adam_step(params, adam_, lr);
    const auto pred = argmax_rows(logits.value());
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    total += pred.size();
    loss_sum += loss.item();
    ++batches;
  }
  ++epoch_;
  EpochRecord rec;
  rec.epoch = e;
  rec.lr = lr;
  rec.loss = loss_sum / static_cast<double>(batches);
  rec.batches = batches;
  rec.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  rec.wall_time = seconds_since(t0);
  return rec;
}

std::vector<EpochRecord> DownstreamTrainer::run(std::size_t epochs, RunLog* log) {
  std::vector<EpochRecord> out;
  while (epoch_ < epochs) {
    out.push_back(run_epoch());
    if (log) log->write(out.back().to_json());
  }
  return out;
}

Checkpoint DownstreamTrainer::checkpoint(bool with_optimizer) {
  Checkpoint ckpt;
  RunConfig cfg = config_;
  cfg.model = model_config_;
  store_run_config(ckpt, cfg);
  store_parameters(ckpt, head_.parameters(), head_.buffers());
  if (with_optimizer) store_optimizer(ckpt, adam_);
  ckpt.config_hash = cfg.hash();
  ckpt.epoch = static_cast<std::uint32_t>(epoch_);
  return ckpt;
}

DownstreamHead load_head(const Checkpoint& ckpt) {
  const RunConfig cfg = read_run_config(ckpt);
  DownstreamHead head = DownstreamHead::for_model(cfg.model, cfg.seed);
  restore_parameters(ckpt, head.parameters(), head.buffers());
  return head;
}

std::vector<std::vector<std::int32_t>> predict(DownstreamHead& head, const RepresentationCache& cache) {
  std::vector<std::vector<std::int32_t>> out;
  out.reserve(cache.features.size());
  for (const auto& f : cache.features) {
    out.push_back(argmax_rows(head.forward(Var(f, false), Mode::Eval).value()));
  }
  return out;
}

MetricsReport evaluate(DownstreamHead& head, const RepresentationCache& cache) {
  if (cache.features.empty()) throw ValueError("evaluate: empty test set");
  if (head.task() != cache.task) throw ConfigError("evaluate: head and representations disagree on the task");
  const auto pred = predict(head, cache);
  if (cache.task == Task::Classification) {
    std::vector<std::int32_t> p, t;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p.push_back(pred[i].front());
      t.push_back(cache.labels[i].front());
    }
    return classification_report(p, t, head.classes());
  }
  std::vector<std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>>> clouds;
  for (std::size_t i = 0; i < pred.size(); ++i) clouds.emplace_back(pred[i], cache.labels[i]);
  return segmentation_report(clouds);
}

MetricsReport evaluate(EncoderModel& encoder, DownstreamHead& head, const Dataset& test, const RunConfig& config) {
  if (test.samples.empty()) throw ValueError("evaluate: empty test set");
  RunConfig cfg = config;
  cfg.model.num_classes = head.classes();
  return evaluate(head, compute_representations(encoder, test, cfg, "sample.evaluate"));
}

}  // namespace pcdu
