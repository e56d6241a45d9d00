#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "pcdu/checkpoint.hpp"
#include "pcdu/config.hpp"
#include "pcdu/errors.hpp"
#include "pcdu/optim.hpp"
#include "pcdu/training.hpp"

using namespace pcdu;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(Task task) {
  RunConfig c = RunConfig::defaults(task, 32);
  c.set("model", "tiny");
  c.batch_size = 4;
  c.epochs = 3;
  c.seed = 5;
  return c;
}

Dataset tiny_data(std::size_t per_class, std::uint64_t seed, std::size_t healthy = SIZE_MAX) {
  SynthSpec s;
  s.healthy = healthy == SIZE_MAX ? per_class : healthy;
  s.aneurysm = per_class;
  s.points = 48;
  return gen_synthetic(s, seed);
}

}  // namespace

TEST(Schedule, StepDecay) {
  EXPECT_EQ(lr_at(0), 1e-3);
  EXPECT_EQ(lr_at(9), 1e-3);
  EXPECT_EQ(lr_at(10), 5e-4);
  EXPECT_EQ(lr_at(25), 2.5e-4);  // two halvings: epochs 10 and 20
  for (std::size_t e = 1; e < 100; ++e) {
    EXPECT_LE(lr_at(e), lr_at(e - 1));
    if (e % 10 == 0) EXPECT_EQ(lr_at(e), lr_at(e - 1) / 2);
  }
}

TEST(Adam, ZeroGradientIsIdentity) {
  Var p = Var::parameter(Tensor::vector({1.5, -2}));
  std::vector<NamedParam> params{{"p", p}};
  AdamState st;
  adam_step(params, st, 1e-3);
  EXPECT_EQ(p.value(), Tensor::vector({1.5, -2}));
}

TEST(Adam, OneStepMatchesHandFormula) {
  Var p = Var::parameter(Tensor::vector({1.0}));
  std::vector<NamedParam> params{{"p", p}};
  AdamState st;
  backward(ops::sum(p));  // g = 1
  adam_step(params, st, 1e-3);
  oracle::AdamScalar ref;
  EXPECT_NEAR(p.value()[0], ref.step(1.0, 1.0, 1e-3), 1e-12);
  EXPECT_NEAR(p.value()[0], 0.999, 1e-8);
}

TEST(Adam, MultiStepAgainstOracle) {
  Var p = Var::parameter(Tensor::vector({0.3}));
  std::vector<NamedParam> params{{"p", p}};
  AdamState st;
  st.weight_decay = 0.01;
  oracle::AdamScalar ref;
  double theta = 0.3;
  for (int i = 0; i < 20; ++i) {
    zero_grads(params);
    backward(ops::sum_squares(p));
    const double g = 2 * theta;
    theta = ref.step(theta, g, 1e-2, 0.01);
    adam_step(params, st, 1e-2);
    EXPECT_NEAR(p.value()[0], theta, 1e-12);
  }
}

TEST(Adam, DecayActsThroughGradient) {
  Var p = Var::parameter(Tensor::vector({1.0}));
  std::vector<NamedParam> params{{"p", p}};
  AdamState st;
  st.weight_decay = 0.1;
  adam_step(params, st, 1e-3);
  EXPECT_LT(p.value()[0], 1.0);
  Var q = Var::parameter(Tensor::vector({1.0}));
  std::vector<NamedParam> qs{{"q", q}};
  AdamState dec;
  dec.weight_decay = 0.1;
  dec.decoupled = true;
  adam_step(qs, dec, 1e-3);
  EXPECT_NEAR(q.value()[0], 1.0 - 1e-3 * 0.1, 1e-15);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Var p = Var::parameter(Tensor::vector({1.0}));
  std::vector<NamedParam> params{{"layer.weight", p}};
  backward(ops::scale(ops::sum(p), std::numeric_limits<Real>::infinity()));
  AdamState st;
  try {
    adam_step(params, st, 1e-3);
    FAIL();
  } catch (const ValueError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.weight"), std::string::npos);
  }
}

TEST(Config, ParseAndUnknownKeys) {
  const auto c = parse_config("task = seg\npoints = 512\n# comment\nbatch_size = 8\ntau = 0.1\n",
                              RunConfig::defaults(Task::Classification));
  EXPECT_EQ(c.task, Task::Segmentation);
  EXPECT_EQ(c.points, 512u);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.tau, 0.1);
  EXPECT_EQ(c.weight_decay_downstream, 1.0);
  EXPECT_TRUE(c.decoupled_decay_downstream);
  EXPECT_EQ(c.model.levels[0].centroids, 256u);
  try {
    parse_config("batch_size = 8\nlearning_rate = 1\n", RunConfig{});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_config("tau = -1\n", RunConfig{}).validate(), Error);
  EXPECT_THROW(parse_config("batch_size 8\n", RunConfig{}), ParseError);
}

TEST(Config, CanonicalRoundTripAndHash) {
  RunConfig c = tiny_config(Task::Segmentation);
  c.set("augment", "rotation");
  const auto back = parse_config(c.canonical(), RunConfig{});
  EXPECT_EQ(back.canonical(), c.canonical());
  EXPECT_EQ(back.hash(), c.hash());
  RunConfig d = c;
  d.seed += 1;
  EXPECT_NE(d.hash(), c.hash());
  EXPECT_EQ(hex(c.hash()).size(), 64u);
}

TEST(Checkpoint, RoundTripBitExact) {
  Checkpoint ck;
  ck.put("a.weight", Tensor::matrix(2, 2, {1.0 / 3, -2, 1e-300, 7}));
  ck.put("b", Tensor::vector({0.1}));
  ck.epoch = 17;
  ck.config_hash[0] = 0xab;
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(ck)), ck);
  const fs::path p = fs::temp_directory_path() / "pcdu_ckpt_test.bin";
  save_checkpoint(ck, p);
  EXPECT_EQ(load_checkpoint(p), ck);
}

TEST(Checkpoint, Float32LayoutFollowsFormat) {
  Checkpoint ck;
  ck.version = kCheckpointVersionF32;
  ck.put("x", Tensor::vector({0.5, 2}));
  const auto bytes = encode_checkpoint(ck);
  // magic 4 + version 4 + count 4 + name len 2 + "x" 1 + rank 1 + dim 4 + 2 floats 8 + hash 32 + epoch 4
  EXPECT_EQ(bytes.size(), 64u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PCDU");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(decode_checkpoint(bytes), ck);
}

TEST(Checkpoint, RejectsCorruption) {
  Checkpoint ck;
  ck.put("x", Tensor::vector({1, 2, 3}));
  auto bytes = encode_checkpoint(ck);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_checkpoint(bad_magic);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("PCDU"), std::string::npos);
  }
  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  EXPECT_THROW(decode_checkpoint(truncated), CheckpointError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), CheckpointError);
}

TEST(Pretrain, DeterministicAndResumable) {
  const RunConfig c = tiny_config(Task::Classification);
  const Dataset ds = tiny_data(4, 1);
  Checkpoint a, b;
  const auto ra = pretrain(c, ds, &a);
  const auto rb = pretrain(c, ds, &b);
  ASSERT_EQ(ra.size(), 3u);
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(ra[i].loss, rb[i].loss);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
  EXPECT_EQ(ra[0].batches, 2u);

  Pretrainer first(c, ds);
  first.run(1);
  const auto bytes = encode_checkpoint(first.checkpoint());
  Pretrainer resumed = Pretrainer::resume(c, ds, decode_checkpoint(bytes));
  const auto rest = resumed.run(3);
  ASSERT_EQ(rest.size(), 2u);
  EXPECT_EQ(rest[0].loss, ra[1].loss);
  EXPECT_EQ(rest[1].loss, ra[2].loss);
  EXPECT_EQ(encode_checkpoint(resumed.checkpoint()), encode_checkpoint(a));
}

TEST(Pretrain, DropsTailAndWarnsOnSingleton) {
  RunConfig c = tiny_config(Task::Classification);
  c.epochs = 1;
  const auto r = pretrain(c, tiny_data(3, 2));  // 6 clouds, batch 4 → one batch
  EXPECT_EQ(r[0].batches, 1u);
  Dataset one = tiny_data(1, 3, 0);
  const auto s = pretrain(c, one);
  EXPECT_EQ(s[0].batches, 0u);
  EXPECT_THROW(pretrain(c, Dataset{}), ValueError);
}

TEST(Pretrain, LogWritesJsonLines) {
  RunConfig c = tiny_config(Task::Classification);
  c.epochs = 2;
  std::ostringstream out;
  RunLog log(&out);
  pretrain(c, tiny_data(2, 4), nullptr, &log);
  std::istringstream in(out.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], n);
    EXPECT_TRUE(j.contains("lr") && j.contains("loss") && j.contains("wall_time"));
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Downstream, FrozenEncoderAndDeterminism) {
  const RunConfig c = tiny_config(Task::Classification);
  const Dataset ds = tiny_data(3, 5);
  Checkpoint enc_ck;
  pretrain(c, ds, &enc_ck);
  EncoderModel enc = load_encoder(enc_ck);
  const auto before = parameter_checksum(enc.parameters(), enc.buffers());
  DownstreamTrainer t1(c, enc, ds);
  t1.run(5);
  EXPECT_EQ(parameter_checksum(enc.parameters(), enc.buffers()), before);
  DownstreamTrainer t2(c, enc, ds);
  t2.run(5);
  EXPECT_EQ(encode_checkpoint(t1.checkpoint()), encode_checkpoint(t2.checkpoint()));

  DownstreamHead h = load_head(decode_checkpoint(encode_checkpoint(t1.checkpoint())));
  const auto m1 = evaluate(enc, h, ds, c);
  const auto m2 = evaluate(enc, t1.head(), ds, c);
  EXPECT_EQ(m1, m2);
  EXPECT_THROW(evaluate(enc, h, Dataset{}, c), ValueError);
}

TEST(Downstream, LabelOutOfRangeRejected) {
  const RunConfig c = tiny_config(Task::Classification);
  EncoderModel enc(c.model, 1);
  Dataset ds = tiny_data(2, 6);
  ds.samples[0].label = 5;
  EXPECT_THROW(DownstreamTrainer(c, enc, ds), ValueError);
}

TEST(Downstream, TaskMismatchRejected) {
  const RunConfig cls = tiny_config(Task::Classification);
  const RunConfig seg = tiny_config(Task::Segmentation);
  EncoderModel enc(cls.model, 1);
  EXPECT_THROW(DownstreamTrainer(seg, enc, tiny_data(2, 7)), ConfigError);
}

TEST(Downstream, SegmentationRuns) {
  const RunConfig c = tiny_config(Task::Segmentation);
  EncoderModel enc(c.model, 2);
  const Dataset ds = tiny_data(2, 8, 0);
  DownstreamTrainer t(c, enc, ds);
  const auto r = t.run(2);
  EXPECT_TRUE(std::isfinite(r.back().loss));
  const auto m = evaluate(t.head(), t.cache());
  EXPECT_EQ(m.task, "seg");
  EXPECT_EQ(m.population, 2u * 32u);
}

TEST(Downstream, HeadClassCountComesFromRun) {
  RunConfig c = tiny_config(Task::Classification);
  EncoderModel enc(c.model, 3);  // built for two classes
  Dataset ds = tiny_data(3, 9);
  ds.samples[1].label = 2;
  c.set("num_classes", "3");
  DownstreamTrainer t(c, enc, ds);
  EXPECT_EQ(t.head().classes(), 3u);
  t.run(1);
  const auto m = evaluate(enc, t.head(), ds, c);
  EXPECT_EQ(m.classes, 3u);
  EXPECT_EQ(m.counts.tp.size(), 3u);
}
