// pcdu: command-line driver for pretraining, downstream training, evaluation,
// synthetic data and the two ablation sweeps.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <streambuf>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdu/contrastive.hpp"
#include "pcdu/errors.hpp"
#include "pcdu/layers.hpp"
#include "pcdu/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pcdu;

namespace {

struct Options {
  std::string task;
  std::size_t points = 0;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "pcdu_out";
  std::string data;
  std::vector<std::string> sets;
  std::string encoder;
  std::string head;
  std::string resume;
  std::size_t save_every = 10;
  // gen-synth
  std::size_t healthy = 8;
  std::size_t aneurysm = 8;
  std::size_t cloud_points = 2048;
};

// copies everything written to it into two buffers
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const bool ok = a_->sputc(static_cast<char>(c)) != EOF && b_->sputc(static_cast<char>(c)) != EOF;
    return ok ? c : EOF;
  }
  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

// JSON lines to stdout and to <out>/<name>.jsonl
class RecordSink {
 public:
  RecordSink(const fs::path& dir, const std::string& name)
      : file_(dir / (name + ".jsonl")), tee_(std::cout.rdbuf(), file_.rdbuf()), stream_(&tee_), log_(&stream_) {
    if (!file_) throw Error("cannot open " + (dir / (name + ".jsonl")).string() + " for writing");
  }
  RunLog* log() { return &log_; }
  void write(const json& j) { log_.write(j); }

 private:
  std::ofstream file_;
  TeeBuf tee_;
  std::ostream stream_;
  RunLog log_;
};

RunConfig build_config(const Options& o) {
  const Task task = o.task.empty() ? Task::Classification : parse_task(o.task);
  RunConfig cfg = RunConfig::defaults(task, o.points ? o.points : 1024);
  if (!o.config.empty()) cfg = load_config(o.config, cfg);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg = parse_config(kv.substr(0, eq) + " = " + kv.substr(eq + 1), cfg, "--set");
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

json final_record(const std::string& command, const RunConfig& cfg) {
  return json{{"record", "final"}, {"command", command}, {"config_hash", hex(cfg.hash())}, {"seed", cfg.seed}};
}

Dataset require_data(const Options& o) {
  if (o.data.empty()) throw ConfigError("--data <manifest> is required");
  return load_manifest(o.data);
}

DatasetSplit split_for(const Dataset& ds, const RunConfig& cfg) {
  SplitSpec spec = cfg.split;
  spec.seed = cfg.seed;
  if (cfg.folds > 0) return kfold_split(ds.labels(), cfg.folds, cfg.fold, spec);
  return split_dataset(ds.labels(), spec);
}

fs::path path_or(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

Checkpoint run_pretrain(const RunConfig& cfg, const Dataset& pool, const Options& o, const fs::path& dir,
                        RunLog* log) {
  std::optional<Pretrainer> trainer;
  if (!o.resume.empty()) {
    trainer.emplace(Pretrainer::resume(cfg, pool, load_checkpoint(o.resume)));
    std::cerr << "resuming at epoch " << trainer->completed_epochs() << "\n";
  } else {
    trainer.emplace(cfg, pool);
  }
  const fs::path ckpt_path = dir / "encoder.pcdu";
  while (trainer->completed_epochs() < cfg.epochs) {
    log->write(trainer->run_epoch().to_json());
    const std::size_t done = trainer->completed_epochs();
    if (o.save_every && done % o.save_every == 0 && done < cfg.epochs)
      save_checkpoint(trainer->checkpoint(true), ckpt_path);
  }
  Checkpoint ckpt = trainer->checkpoint(true);
  save_checkpoint(ckpt, ckpt_path);
  return ckpt;
}

void check_task(const RunConfig& cfg, const Checkpoint& ckpt, const std::string& what) {
  const RunConfig stored = read_run_config(ckpt);
  if (stored.task != cfg.task)
    throw ConfigError(what + " checkpoint was trained for task " + to_string(stored.task) + ", run asks for " +
                      to_string(cfg.task));
}

// Pretrain on A+B, train the head on B, evaluate on the test split.
json full_run(RunConfig cfg, const Dataset& ds, const Options& o, const fs::path& dir, RunLog* log,
              std::map<std::vector<std::size_t>, Checkpoint>* encoder_cache = nullptr) {
  fs::create_directories(dir);
  const DatasetSplit split = split_for(ds, cfg);
  const auto pool_idx = split.pretrain_pool();
  Checkpoint enc_ck;
  if (encoder_cache && encoder_cache->count(pool_idx)) {
    enc_ck = encoder_cache->at(pool_idx);
    save_checkpoint(enc_ck, dir / "encoder.pcdu");
  } else {
    Options fresh = o;
    fresh.resume.clear();
    enc_ck = run_pretrain(cfg, ds.subset(pool_idx), fresh, dir, log);
    if (encoder_cache) encoder_cache->emplace(pool_idx, enc_ck);
  }
  EncoderModel enc = load_encoder(enc_ck);
  DownstreamTrainer trainer(cfg, enc, ds.subset(split.labeled));
  trainer.run(cfg.epochs, log);
  save_checkpoint(trainer.checkpoint(), dir / "head.pcdu");
  const MetricsReport report = evaluate(enc, trainer.head(), ds.subset(split.test), cfg);
  std::cerr << report.table();
  json rec = report.to_json();
  rec["labeled"] = split.labeled.size();
  rec["unlabeled"] = split.unlabeled.size();
  rec["test"] = split.test.size();
  return rec;
}

int cmd_gen_synth(const Options& o) {
  SynthSpec spec;
  spec.healthy = o.healthy;
  spec.aneurysm = o.aneurysm;
  spec.points = o.cloud_points;
  const std::uint64_t seed = o.seed.value_or(0);
  Dataset ds = gen_synthetic(spec, seed);
  const fs::path manifest = write_dataset(o.out, ds);
  std::cout << json{{"record", "final"}, {"command", "gen-synth"}, {"seed", seed}, {"manifest", manifest.string()},
                    {"healthy", spec.healthy}, {"aneurysm", spec.aneurysm}, {"points", spec.points}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_pretrain(const Options& o) {
  const RunConfig cfg = build_config(o);
  const Dataset ds = require_data(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  RecordSink sink(dir, "pretrain");
  const DatasetSplit split = split_for(ds, cfg);
  const Checkpoint ckpt = run_pretrain(cfg, ds.subset(split.pretrain_pool()), o, dir, sink.log());
  json rec = final_record("pretrain", cfg);
  rec["pool"] = split.pretrain_pool().size();
  rec["epochs"] = ckpt.epoch;
  rec["checkpoint"] = (dir / "encoder.pcdu").string();
  sink.write(rec);
  return 0;
}

int cmd_train_downstream(const Options& o) {
  const RunConfig cfg = build_config(o);
  const Dataset ds = require_data(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const Checkpoint enc_ck = load_checkpoint(path_or(o.encoder, dir / "encoder.pcdu"));
  check_task(cfg, enc_ck, "encoder");
  EncoderModel enc = load_encoder(enc_ck);
  const DatasetSplit split = split_for(ds, cfg);
  RecordSink sink(dir, "train-downstream");
  DownstreamTrainer trainer(cfg, enc, ds.subset(split.labeled));
  trainer.run(cfg.epochs, sink.log());
  const fs::path head_path = path_or(o.head, dir / "head.pcdu");
  save_checkpoint(trainer.checkpoint(), head_path);
  json rec = final_record("train-downstream", cfg);
  rec["labeled"] = split.labeled.size();
  rec["train_metrics"] = evaluate(trainer.head(), trainer.cache()).to_json();
  rec["encoder_checksum"] = parameter_checksum(enc.parameters(), enc.buffers());
  rec["checkpoint"] = head_path.string();
  sink.write(rec);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const RunConfig cfg = build_config(o);
  const Dataset ds = require_data(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const Checkpoint enc_ck = load_checkpoint(path_or(o.encoder, dir / "encoder.pcdu"));
  const Checkpoint head_ck = load_checkpoint(path_or(o.head, dir / "head.pcdu"));
  check_task(cfg, enc_ck, "encoder");
  check_task(cfg, head_ck, "head");
  EncoderModel enc = load_encoder(enc_ck);
  DownstreamHead head = load_head(head_ck);
  const DatasetSplit split = split_for(ds, cfg);
  const MetricsReport report = evaluate(enc, head, ds.subset(split.test), cfg);
  std::cerr << report.table();
  RecordSink sink(dir, "evaluate");
  json rec = final_record("evaluate", cfg);
  rec["metrics"] = report.to_json();
  sink.write(rec);
  return 0;
}

int cmd_gradcheck(const Options& o) {
  if (sizeof(Real) != 8) std::cerr << "warning: single-precision build, central differences will be noisy\n";
  const std::uint64_t seed = o.seed.value_or(1);
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rnd = [&](Shape s) {
    Tensor t(std::move(s));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(g);
    return Var::parameter(std::move(t));
  };
  const double tol = 1e-4;
  bool ok = true;
  auto report = [&](const std::string& name, double err) {
    ok = ok && err < tol;
    std::cout << json{{"record", "gradcheck"}, {"check", name}, {"max_rel_error", err}, {"pass", err < tol}}.dump()
              << "\n";
  };
  auto vars = [](const std::vector<NamedParam>& ps) {
    std::vector<Var> v;
    for (const auto& p : ps) v.push_back(p.var);
    return v;
  };

  Var z = rnd({8, 5});
  report("ntxent_loss", grad_check([&] { return ntxent_loss(EmbeddingBatch{z, 0.5}); }, {z}));
  Var logits = rnd({6, 2});
  const std::vector<std::int32_t> y6{0, 1, 1, 0, 1, 0};
  report("cross_entropy", grad_check([&] { return cross_entropy(logits, y6); }, {logits}));

  SynthSpec spec;
  spec.healthy = 2;
  spec.aneurysm = 2;
  spec.points = 16;
  const Dataset clouds = gen_synthetic(spec, seed);
  const std::vector<PointCloud> va{clouds.samples[0].cloud, clouds.samples[2].cloud};
  const std::vector<PointCloud> vb{clouds.samples[1].cloud, clouds.samples[3].cloud};
  for (Task task : {Task::Classification, Task::Segmentation}) {
    const std::string tag = to_string(task);
    const ModelConfig mc = ModelConfig::tiny(task, 16);
    EncoderModel enc(mc, seed);
    DownstreamHead head = DownstreamHead::for_model(mc, seed + 1);
    // eval-mode batch norm with non-trivial running statistics
    auto scramble = [&](const std::vector<NamedBuffer>& bufs) {
      for (const auto& b : bufs) {
        const bool var = b.name.find("running_var") != std::string::npos;
        for (std::size_t i = 0; i < b.tensor->size(); ++i) (*b.tensor)[i] = var ? 1.0 + 0.5 * u(g) : 0.2 * u(g);
      }
    };
    scramble(enc.buffers());
    scramble(head.buffers());
    report(tag + ".pretrain",
           grad_check([&] { return ntxent_loss(EmbeddingBatch{enc.embed_pairs(va, vb, Mode::Eval), 0.5}); },
                      vars(enc.parameters())));
    std::vector<Var> all = vars(enc.parameters());
    for (auto& v : vars(head.parameters())) all.push_back(v);
    if (task == Task::Classification) {
      const std::vector<std::int32_t> y{clouds.samples[0].label, clouds.samples[2].label};
      report(tag + ".downstream",
             grad_check([&] { return cross_entropy(classify(enc.represent(va, Mode::Eval).concat_pooled(), head,
                                                            Mode::Eval),
                                                   y); },
                        all));
    } else {
      std::vector<std::int32_t> y = *va[0].labels;
      y.insert(y.end(), va[1].labels->begin(), va[1].labels->end());
      report(tag + ".downstream",
             grad_check([&] { return cross_entropy(segment(enc.represent(va, Mode::Eval).concat_per_point(), head,
                                                           Mode::Eval),
                                                   y); },
                        all));
    }
  }
  return ok ? 0 : 1;
}

int cmd_ablate_augment(const Options& o) {
  const RunConfig base = build_config(o);
  const Dataset ds = require_data(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  RecordSink sink(dir, "ablate-augment");
  for (AugmentKind kind :
       {AugmentKind::Rotation, AugmentKind::Perturbation, AugmentKind::JitterPerturbation, AugmentKind::Jitter}) {
    RunConfig cfg = base;
    cfg.augment.kind = kind;
    std::string name = to_string(kind);
    std::replace(name.begin(), name.end(), '+', '_');
    std::cerr << "== augment " << to_string(kind) << "\n";
    json rec = final_record("ablate-augment", cfg);
    rec["augment"] = to_string(kind);
    rec["metrics"] = full_run(cfg, ds, o, dir / name, sink.log());
    sink.write(rec);
  }
  return 0;
}

int cmd_ablate_labels(const Options& o) {
  const RunConfig base = build_config(o);
  const Dataset ds = require_data(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  RecordSink sink(dir, "ablate-labels");
  // A+B does not depend on the labeled fraction, so one encoder serves every row
  std::map<std::vector<std::size_t>, Checkpoint> encoders;
  for (double frac : {0.1, 0.05, 0.01}) {
    RunConfig cfg = base;
    cfg.split.labeled_fraction = frac;
    const std::string name = "labeled_" + std::to_string(static_cast<int>(frac * 100 + 0.5)) + "pct";
    std::cerr << "== labeled fraction " << frac << "\n";
    json rec = final_record("ablate-labels", cfg);
    rec["labeled_fraction"] = frac;
    rec["metrics"] = full_run(cfg, ds, o, dir / name, sink.log(), &encoders);
    sink.write(rec);
  }
  return 0;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--task", o.task, "cls or seg")->check(CLI::IsMember({"cls", "seg"}));
  sub->add_option("--points", o.points, "points per cloud (512, 1024 or 2048 for the published setups)");
  sub->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "run seed");
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--data", o.data, "dataset manifest")->check(CLI::ExistingFile);
  sub->add_option("--set", o.sets, "extra key=value overrides, applied after --config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive dual-branch point-cloud pretraining and downstream heads"};
  app.require_subcommand(1);
  Options o;

  auto* pretrain = app.add_subcommand("pretrain", "contrastive pretraining of the dual encoders");
  add_common(pretrain, o);
  pretrain->add_option("--resume", o.resume, "continue from an encoder checkpoint")->check(CLI::ExistingFile);
  pretrain->add_option("--save-every", o.save_every, "checkpoint interval in epochs (0: only at the end)")
      ->capture_default_str();

  auto* downstream = app.add_subcommand("train-downstream", "train a head on frozen representations");
  add_common(downstream, o);
  downstream->add_option("--encoder", o.encoder, "encoder checkpoint (default <out>/encoder.pcdu)");
  downstream->add_option("--head", o.head, "where to write the head (default <out>/head.pcdu)");

  auto* eval = app.add_subcommand("evaluate", "metrics on the test split");
  add_common(eval, o);
  eval->add_option("--encoder", o.encoder, "encoder checkpoint (default <out>/encoder.pcdu)");
  eval->add_option("--head", o.head, "head checkpoint (default <out>/head.pcdu)");

  auto* gradcheck = app.add_subcommand("gradcheck", "central-difference checks of both pipelines");
  add_common(gradcheck, o);

  auto* synth = app.add_subcommand("gen-synth", "write a synthetic vessel dataset");
  add_common(synth, o);
  synth->add_option("--healthy", o.healthy, "healthy vessel segments")->capture_default_str();
  synth->add_option("--aneurysm", o.aneurysm, "aneurysm segments")->capture_default_str();
  synth->add_option("--cloud-points", o.cloud_points, "points per generated cloud")->capture_default_str();

  auto* ab_aug = app.add_subcommand("ablate-augment", "rerun the pipeline for each augmentation");
  add_common(ab_aug, o);
  auto* ab_lab = app.add_subcommand("ablate-labels", "rerun the pipeline at 10%, 5% and 1% labels");
  add_common(ab_lab, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) return cmd_pretrain(o);
    if (downstream->parsed()) return cmd_train_downstream(o);
    if (eval->parsed()) return cmd_evaluate(o);
    if (gradcheck->parsed()) return cmd_gradcheck(o);
    if (synth->parsed()) return cmd_gen_synth(o);
    if (ab_aug->parsed()) return cmd_ablate_augment(o);
    if (ab_lab->parsed()) return cmd_ablate_labels(o);
  } catch (const pcdu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
