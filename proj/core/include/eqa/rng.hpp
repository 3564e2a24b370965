#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace eqa {

// SplitMix64 generator. Child streams are derived by hashing keys into a new
// seed, so any (seed, key path) identifies a reproducible stream regardless of
// how many values were drawn elsewhere.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer on [0, n); n must be positive.
  std::size_t below(std::size_t n);

  Rng split(std::uint64_t key) const;

 private:
  std::uint64_t state_;
};

// Stream tags keep independent uses of one experiment seed apart.
enum class Stream : std::uint64_t {
  kTrainData = 1,
  kTestData = 2,
  kInit = 3,
  kShuffle = 4,
  kRestarts = 5,
  kPermutations = 6,
  kProfiles = 7,
};

Rng make_stream(std::uint64_t seed, Stream tag, std::initializer_list<std::uint64_t> keys = {});

std::uint64_t mix64(std::uint64_t x);

}  // namespace eqa

namespace eqa {

// A fresh 64-bit seed for an independent purpose (train set, test set, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, Stream tag) { return make_stream(seed, tag)(); }

}  // namespace eqa
