#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eqa/mechanism.hpp"
#include "eqa/tensor.hpp"

namespace eqa {

enum class DistributionKind {
  kUniform01,         // every value i.i.d. U[0,1]
  kHeavyTail,         // two items with densities 5/(1+x)^6 and 6/(1+y)^7
  kExponentialScale,  // item j exponential with mean scales[j]
};

std::string to_string(DistributionKind k);
DistributionKind distribution_kind_from_string(const std::string& s);

struct DistributionSpec {
  DistributionKind kind = DistributionKind::kUniform01;
  std::size_t bidders = 1;
  std::size_t items = 1;
  std::vector<double> scales;  // only for kExponentialScale, one per item

  static DistributionSpec uniform(std::size_t bidders, std::size_t items);
  static DistributionSpec heavy_tail(std::size_t bidders);
  static DistributionSpec exponential(std::size_t bidders, std::vector<double> scales);

  // Throws std::invalid_argument on a malformed spec.
  void validate() const;

  // Inverse CDF of the item's marginal at u in [0, 1).
  double quantile(std::size_t item, double u) const;
  double cdf(std::size_t item, double x) const;

  // Upper end of the item's support (infinity when unbounded).
  double support_upper(std::size_t item) const;

  // Same family at another size. Fails when the family fixes the item count
  // (heavy tail) or the per-item scales are not all equal.
  DistributionSpec resized(std::size_t bidders, std::size_t items) const;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

// Invariant under relabeling bidders and items.
bool is_symmetric(const DistributionSpec& spec);

// Clamps each entry of [.., n, m] values into the item's support box.
void project_to_support(const DistributionSpec& spec, std::span<double> values);

struct SampleBatch {
  DistributionSpec spec;
  std::uint64_t seed = 0;
  Tensor values;  // [count, n, m]

  std::size_t count() const { return values.dim(0); }
  std::size_t bidders() const { return values.dim(1); }
  std::size_t items() const { return values.dim(2); }
  ValuationProfile profile(std::size_t index) const;
  SampleBatch subset(std::size_t first, std::size_t count) const;
};

// Profile `index` depends only on (spec, seed, index).
void sample_profile(const DistributionSpec& spec, std::uint64_t seed, std::size_t index, std::span<double> out);
SampleBatch sample(const DistributionSpec& spec, std::size_t count, std::uint64_t seed);

void save_batch(const SampleBatch& batch, const std::filesystem::path& path);
SampleBatch load_batch(const std::filesystem::path& path);

}  // namespace eqa
