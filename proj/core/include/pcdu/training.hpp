#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdu/checkpoint.hpp"
#include "pcdu/config.hpp"
#include "pcdu/data.hpp"
#include "pcdu/downstream.hpp"
#include "pcdu/encoders.hpp"
#include "pcdu/metrics.hpp"
#include "pcdu/optim.hpp"

namespace pcdu {

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double wall_time = 0.0;  // seconds
  std::size_t batches = 0;
  std::optional<double> accuracy;  // downstream training only, percent

  nlohmann::json to_json() const;
};

/// Writes one JSON object per line when a stream is attached.
class RunLog {
 public:
  explicit RunLog(std::ostream* out = nullptr) : out_(out) {}
  void write(const nlohmann::json& record);

 private:
  std::ostream* out_;
};

/// The canonical run config travels inside the checkpoint as "meta.config"
/// (one byte per element) so a checkpoint can rebuild its own model.
void store_run_config(Checkpoint& ckpt, const RunConfig& config);
RunConfig read_run_config(const Checkpoint& ckpt);

void store_parameters(Checkpoint& ckpt, const std::vector<NamedParam>& params,
                      const std::vector<NamedBuffer>& buffers);
/// Copies every named tensor into the model; missing names or shape changes throw.
void restore_parameters(const Checkpoint& ckpt, const std::vector<NamedParam>& params,
                        const std::vector<NamedBuffer>& buffers);
void store_optimizer(Checkpoint& ckpt, const AdamState& state);
void restore_optimizer(const Checkpoint& ckpt, AdamState& state);

/// FNV-1a over every parameter and buffer value, in name order.
std::uint64_t parameter_checksum(const std::vector<NamedParam>& params, const std::vector<NamedBuffer>& buffers);

/// Contrastive pretraining of the dual-branch encoders and projection head.
///
/// Each epoch shuffles the pool, drops the last incomplete batch, builds one
/// augmented pair per cloud, embeds view_a through branch 1 and view_b
/// through branch 2, and takes one Adam step on the NT-Xent loss. All
/// randomness is keyed by (seed, purpose, epoch, sample).
class Pretrainer {
 public:
  Pretrainer(RunConfig config, Dataset pool);
  /// Continues from a checkpoint written by `checkpoint()`.
  static Pretrainer resume(RunConfig config, Dataset pool, const Checkpoint& ckpt);

  EpochRecord run_epoch();
  /// Runs until `epochs` epochs have completed in total.
  std::vector<EpochRecord> run(std::size_t epochs, RunLog* log = nullptr);

  std::size_t completed_epochs() const { return epoch_; }
  EncoderModel& model() { return model_; }
  const RunConfig& config() const { return config_; }
  Checkpoint checkpoint(bool with_optimizer = true);

 private:
  RunConfig config_;
  Dataset pool_;
  EncoderModel model_;
  AdamState adam_;
  std::size_t epoch_ = 0;
};

std::vector<EpochRecord> pretrain(const RunConfig& config, const Dataset& pool, Checkpoint* out = nullptr,
                                  RunLog* log = nullptr);

/// Loads encoders (and projection head) from an encoder checkpoint.
EncoderModel load_encoder(const Checkpoint& ckpt);

/// Frozen representations of a dataset, one entry per sample. Classification
/// rows are the concatenated pooled vectors; segmentation entries are the
/// per-point concatenations with per-point labels.
struct RepresentationCache {
  Task task = Task::Classification;
  std::vector<Tensor> features;
  std::vector<std::vector<std::int32_t>> labels;
};

/// Encoders run in eval mode on clouds resampled to `config.points`
/// (stream purpose `purpose`, keyed by sample index).
RepresentationCache compute_representations(EncoderModel& encoder, const Dataset& data, const RunConfig& config,
                                            const char* purpose = "sample.downstream");

/// Supervised head training on cached representations. The encoder is only
/// read, never updated.
class DownstreamTrainer {
 public:
  DownstreamTrainer(RunConfig config, EncoderModel& encoder, const Dataset& labeled);
  DownstreamTrainer(RunConfig config, RepresentationCache cache, const ModelConfig& model);

  EpochRecord run_epoch();
  std::vector<EpochRecord> run(std::size_t epochs, RunLog* log = nullptr);

  DownstreamHead& head() { return head_; }
  const RepresentationCache& cache() const { return cache_; }
  std::size_t completed_epochs() const { return epoch_; }
  Checkpoint checkpoint(bool with_optimizer = false);

 private:
  RunConfig config_;
  ModelConfig model_config_;
  RepresentationCache cache_;
  DownstreamHead head_;
  AdamState adam_;
  std::size_t epoch_ = 0;
};

DownstreamHead load_head(const Checkpoint& ckpt);

/// Predictions of a head over cached representations, eval mode.
std::vector<std::vector<std::int32_t>> predict(DownstreamHead& head, const RepresentationCache& cache);

MetricsReport evaluate(DownstreamHead& head, const RepresentationCache& cache);
MetricsReport evaluate(EncoderModel& encoder, DownstreamHead& head, const Dataset& test, const RunConfig& config);

}  // namespace pcdu
