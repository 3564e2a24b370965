#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "eqa/checkpoint.hpp"
#include "eqa/networks.hpp"

namespace eqa {
namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("eqa_checkpoint_" + name);
}

TEST(Parameters, StreamRoundTripIsBitExact) {
  const EquivariantNet net(NetworkConfig{}, 21);
  std::stringstream ss;
  write_parameters(ss, net.parameters());
  EXPECT_TRUE(read_parameters(ss) == net.parameters());
}

TEST(Parameters, DuplicateNamesRejected) {
  ParameterSet p;
  p.add("w", Tensor(Shape{1}));
  EXPECT_THROW(p.add("w", Tensor(Shape{1})), std::invalid_argument);
}

TEST(Checkpoint, RoundTripBothArchitectures) {
  for (Architecture arch : {Architecture::kEquivariant, Architecture::kRegretNet}) {
    Checkpoint c;
    c.network = NetworkConfig{2, 4, 1, 8};
    c.bidders = 2;
    c.items = 3;
    c.mechanism = make_mechanism(arch, 2, 3, c.network, 5);
    c.lagrangian = LagrangianState{{0.5, 1.25}, 3.0, 77};
    c.config_hash = "0123456789abcdef";
    c.seed = 99;
    c.epoch = 4;
    c.config = nlohmann::json{{"name", "x"}};
    const auto path = temp_file(to_string(arch) + ".ckpt");
    save_checkpoint(path, c);
    const Checkpoint d = load_checkpoint(path);
    EXPECT_EQ(d.mechanism->architecture(), arch);
    EXPECT_TRUE(d.mechanism->parameters() == c.mechanism->parameters());
    EXPECT_EQ(d.network, c.network);
    EXPECT_EQ(d.lagrangian, c.lagrangian);
    EXPECT_EQ(d.config_hash, c.config_hash);
    EXPECT_EQ(d.seed, 99u);
    EXPECT_EQ(d.epoch, 4u);
    EXPECT_EQ(d.config, c.config);
    std::filesystem::remove(path);
  }
}

TEST(Checkpoint, TruncatedFileRejected) {
  Checkpoint c;
  c.mechanism = make_mechanism(Architecture::kEquivariant, 1, 2, NetworkConfig{}, 1);
  c.bidders = 1;
  c.items = 2;
  c.lagrangian.lambda = {1.0};
  const auto path = temp_file("truncated.ckpt");
  save_checkpoint(path, c);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace eqa
