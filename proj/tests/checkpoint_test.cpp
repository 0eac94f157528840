#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lsdm/checkpoint.hpp"
#include "lsdm/synthetic.hpp"
#include "support.hpp"

namespace lsdm {
namespace {

Split checkpoint_split() {
  SyntheticSpec spec;
  spec.num_users = 5;
  spec.num_items = 8;
  spec.horizon_days = 18;
  spec.periodic_rules = {{1, 2, 0}, {3, 4, 1}};
  spec.noise_rate = 0.3;
  spec.seed = 13;
  return split_leave_last(generate_synthetic(spec).log);
}

TrainConfig checkpoint_config() {
  TrainConfig c;
  c.scales = {TimeScale::item(), TimeScale::week()};
  c.dim = 4;
  c.epochs = 4;
  c.batch_size = 2;
  c.learning_rate = 0.02;
  c.seed = 21;
  return c;
}

TEST(NamedTensors, RoundTripAndCorruption) {
  const NamedTensors in{{"a", Tensor::vector({1.5, -2.0})}, {"b/c", Tensor::matrix(2, 1, {3.0, 4.0})}};
  std::stringstream buf;
  write_named_tensors(buf, in);
  EXPECT_EQ(read_named_tensors(buf), in);

  std::string bytes;
  {
    std::stringstream again;
    write_named_tensors(again, in);
    bytes = again.str();
  }
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_named_tensors(truncated), Error);
  std::stringstream bad_magic("XXXX" + bytes.substr(4));
  EXPECT_THROW(read_named_tensors(bad_magic), Error);
}

TEST(Checkpoint, SaveLoadRestoresEverything) {
  testing::TempDir dir;
  const Split split = checkpoint_split();
  const TrainConfig config = checkpoint_config();
  const TrainState state = train(split, config);
  const auto epoch_dir = save_checkpoint(dir.path(), state, config);
  EXPECT_EQ(epoch_dir.filename(), "epoch-4");
  EXPECT_EQ(latest_checkpoint(dir.path()), epoch_dir);

  const TrainState loaded = load_checkpoint(epoch_dir);
  EXPECT_EQ(flatten(loaded.model.params), flatten(state.model.params));
  EXPECT_EQ(flatten(loaded.optimizer.first_moment), flatten(state.optimizer.first_moment));
  EXPECT_EQ(flatten(loaded.optimizer.second_moment), flatten(state.optimizer.second_moment));
  EXPECT_EQ(loaded.optimizer.step, state.optimizer.step);
  EXPECT_EQ(loaded.epochs_done, 4u);
  ASSERT_EQ(loaded.history.size(), 4u);
  EXPECT_EQ(loaded.history[3].loss.total, state.history[3].loss.total);
  EXPECT_EQ(loaded.model.scales(), config.scales);
  EXPECT_NO_THROW(check_resumable(loaded, config));
}

TEST(Checkpoint, ResumeFromDiskMatchesUninterruptedRun) {
  testing::TempDir dir;
  const Split split = checkpoint_split();
  const TrainConfig config = checkpoint_config();
  const TrainState full = train(split, config);

  TrainConfig half = config;
  half.epochs = 2;
  save_checkpoint(dir.path(), train(split, half), half);
  TrainState resumed = load_checkpoint(*latest_checkpoint(dir.path()));
  check_resumable(resumed, config);
  train(resumed, split, config);
  EXPECT_EQ(flatten(resumed.model.params), flatten(full.model.params));
  for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(resumed.history[e].loss.total, full.history[e].loss.total);
}

TEST(Checkpoint, FreshStateHasNoOptimizerFile) {
  testing::TempDir dir;
  const Split split = checkpoint_split();
  const TrainConfig config = checkpoint_config();
  const auto path = save_checkpoint(dir.path(), init_training(split, config), config);
  EXPECT_FALSE(std::filesystem::exists(path / "optimizer.lsdc"));
  const TrainState loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.optimizer.step, 0u);
  EXPECT_EQ(loaded.epochs_done, 0u);
}

TEST(Checkpoint, MismatchesAreRejected) {
  testing::TempDir dir;
  const Split split = checkpoint_split();
  const TrainConfig config = checkpoint_config();
  const TrainState state = init_training(split, config);
  auto changed = [&](auto mutate) {
    TrainConfig c = config;
    mutate(c);
    return c;
  };
  EXPECT_THROW(check_resumable(state, changed([](TrainConfig& c) { c.dim = 5; })), InvalidArgument);
  EXPECT_THROW(check_resumable(state, changed([](TrainConfig& c) { c.join = JoinStrategy::Max; })),
               InvalidArgument);
  EXPECT_THROW(check_resumable(state, changed([](TrainConfig& c) { c.scales = {TimeScale::item()}; })),
               InvalidArgument);

  const auto path = save_checkpoint(dir.path(), state, config);
  EXPECT_EQ(latest_checkpoint(dir.path() / "nothing"), std::nullopt);
  std::filesystem::remove(path / "params.lsdc");
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Checkpoint, TamperedTensorShapeIsShapeError) {
  testing::TempDir dir;
  const Split split = checkpoint_split();
  const TrainConfig config = checkpoint_config();
  const auto path = save_checkpoint(dir.path(), init_training(split, config), config);
  NamedTensors tensors;
  {
    std::ifstream in(path / "params.lsdc", std::ios::binary);
    tensors = read_named_tensors(in);
  }
  tensors[0].second = Tensor::vector({1.0});
  {
    std::ofstream out(path / "params.lsdc", std::ios::binary);
    write_named_tensors(out, tensors);
  }
  EXPECT_THROW(load_checkpoint(path), ShapeError);
}

}  // namespace
}  // namespace lsdm
