#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eqa/networks.hpp"
#include "eqa/parameters.hpp"

namespace eqa {

std::string code_version();

struct LagrangianState {
  std::vector<double> lambda;
  double rho = 1.0;
  std::uint64_t iteration = 0;

  friend bool operator==(const LagrangianState&, const LagrangianState&) = default;
};

// Flat binary parameter record: count, then per tensor its name, rank,
// extents and raw little-endian doubles. Round trips are bit-exact.
void write_parameters(std::ostream& os, const ParameterSet& params);
ParameterSet read_parameters(std::istream& is);

struct Checkpoint {
  std::unique_ptr<LearnedMechanism> mechanism;
  NetworkConfig network;
  std::size_t bidders = 0;  // training size
  std::size_t items = 0;
  LagrangianState lagrangian;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  nlohmann::json config;  // experiment config that produced it (may be null)
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eqa
