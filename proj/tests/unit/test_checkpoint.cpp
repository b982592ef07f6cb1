#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "endgen/checkpoint.hpp"
#include "endgen/errors.hpp"
#include "test_support.hpp"

using namespace endgen;
using namespace endgen::train;
using endgen::testing::make_toy;
using endgen::testing::temp_dir;

namespace {

Checkpoint sample() {
  auto toy = make_toy(4, 3, 5);
  Checkpoint c;
  c.config.hidden_dim = 3;
  c.config.embed_dim = 4;
  c.config.seed = 77;
  c.params = toy.params;
  c.adam = opt::AdamState(c.params.store);
  c.adam.t = 12;
  c.adam.m[0][1] = 0.25;
  c.adam.v[2][0] = 1e-7;
  c.progress.phase = Phase::kFinetune;
  c.progress.epoch = 3;
  c.progress.step_in_epoch = 2;
  c.progress.global_step = 41;
  c.progress.best_val = 0.125;
  c.progress.bad_evals = 1;
  c.progress.epoch_losses = {3.5, 2.25, 1.0};
  c.vocab_hash = toy.vocab.hash();
  c.vocab_path = "vocab.txt";
  return c;
}

void expect_same(const Checkpoint& a, const Checkpoint& b) {
  EXPECT_EQ(a.params.store, b.params.store);
  EXPECT_EQ(a.params.config, b.params.config);
  EXPECT_EQ(a.adam, b.adam);
  EXPECT_EQ(a.progress, b.progress);
  EXPECT_EQ(a.vocab_hash, b.vocab_hash);
  EXPECT_EQ(a.vocab_path, b.vocab_path);
  EXPECT_EQ(train::to_json(a.config), train::to_json(b.config));
}

}  // namespace

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const Checkpoint c = sample();
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = deserialize_checkpoint(bytes);
  expect_same(c, back);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.params.embedding, c.params.embedding);
  EXPECT_EQ(back.params.gen_bias, c.params.gen_bias);
}

TEST(Checkpoint, FileRoundTripAndHeader) {
  const auto dir = temp_dir("ckpt");
  const Checkpoint c = sample();
  save_checkpoint(c, dir / "a.ckpt");
  expect_same(c, load_checkpoint(dir / "a.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
  auto header = nlohmann::json::parse(read_checkpoint_header(dir / "a.ckpt"));
  EXPECT_EQ(header["progress"]["global_step"], 41);
  EXPECT_EQ(header["config"]["seed"], 77);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST(Checkpoint, EveryTruncationIsRejected) {
  const std::string bytes = serialize_checkpoint(sample());
  for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + cut / 7) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), CheckpointError) << cut;
  }
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), CheckpointError);
}

TEST(Checkpoint, CorruptFieldsAreRejected) {
  const std::string bytes = serialize_checkpoint(sample());
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic), CheckpointError);

  std::string version = bytes;
  version[8] = static_cast<char>(kCheckpointVersion + 1);
  try {
    deserialize_checkpoint(version);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }

  std::string length = bytes;
  length[12] = static_cast<char>(0xff);  // header length low byte
  length[15] = static_cast<char>(0x7f);
  EXPECT_THROW(deserialize_checkpoint(length), CheckpointError);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  Checkpoint c = sample();
  std::string bytes = serialize_checkpoint(c);
  // The header declares the dims; change the stored embedding width.
  Checkpoint wide = c;
  wide.config.embed_dim = 5;
  auto toy = make_toy(5, 3, 5);
  wide.params = toy.params;
  wide.adam = opt::AdamState(wide.params.store);
  std::string other = serialize_checkpoint(wide);
  // Splice c's header onto the other's payload.
  auto header_end = [](const std::string& b) {
    std::uint64_t n = 0;
    for (int i = 7; i >= 0; --i) n = (n << 8) | static_cast<unsigned char>(b[12 + static_cast<std::size_t>(i)]);
    return 20 + n;
  };
  std::string spliced = bytes.substr(0, header_end(bytes)) + other.substr(header_end(other));
  EXPECT_THROW(deserialize_checkpoint(spliced), CheckpointError);
}

TEST(Checkpoint, NonFiniteProgressIsRefused) {
  Checkpoint c = sample();
  c.progress.window_loss_sum = 2.5;
  c.progress.window_reward_sum = 0.75;
  c.progress.window_batches = 3;
  expect_same(c, deserialize_checkpoint(serialize_checkpoint(c)));
  c.progress.window_reward_sum = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(serialize_checkpoint(c), CheckpointError);
  c = sample();
  c.progress.epoch_losses.push_back(std::numeric_limits<double>::infinity());
  EXPECT_THROW(serialize_checkpoint(c), CheckpointError);
}
