#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "eqa/rng.hpp"
#include "eqa/tensor.hpp"

namespace eqa {

using Permutation = std::vector<std::size_t>;

// Relabeling of both axes: permuted[i][j] = original[bidders[i]][items[j]].
struct PermutationPair {
  Permutation bidders;
  Permutation items;
};

enum class PermutationMode { kExhaustive, kSampled };

std::string to_string(PermutationMode mode);
PermutationMode permutation_mode_from_string(const std::string& s);

struct PermutationOptions {
  PermutationMode mode = PermutationMode::kExhaustive;
  std::uint64_t cap = 5040;  // largest enumeration allowed in exhaustive mode
  std::size_t samples = 100;  // pairs drawn in sampled mode (identity included)
  std::uint64_t seed = 0;
};

class PermutationCapExceeded : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Permutation identity_permutation(std::size_t n);
Permutation inverse(const Permutation& p);
Permutation random_permutation(std::size_t n, Rng& rng);
std::vector<Permutation> all_permutations(std::size_t n);

// n!, saturating at UINT64_MAX.
std::uint64_t factorial(std::size_t n);

// Exhaustive: every (bidder, item) relabeling, identity first; throws
// PermutationCapExceeded when n! * m! > cap. Sampled: identity followed by
// samples-1 uniform draws.
std::vector<PermutationPair> permutation_pairs(std::size_t n, std::size_t m, const PermutationOptions& options);

// Bidder relabelings only (items fixed), same mode rules with n! against cap.
std::vector<PermutationPair> bidder_permutations(std::size_t n, std::size_t m, const PermutationOptions& options);

// Applies a pair to [.., n, m] values (any leading batch axes).
Tensor permute_profiles(const Tensor& values, const PermutationPair& pair);

}  // namespace eqa
