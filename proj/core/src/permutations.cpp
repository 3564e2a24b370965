#include "eqa/permutations.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace eqa {

std::string to_string(PermutationMode mode) { return mode == PermutationMode::kExhaustive ? "exhaustive" : "sampled"; }

PermutationMode permutation_mode_from_string(const std::string& s) {
  if (s == "exhaustive") return PermutationMode::kExhaustive;
  if (s == "sampled") return PermutationMode::kSampled;
  throw std::invalid_argument("unknown permutation mode: " + s + " (expected exhaustive|sampled)");
}

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

Permutation inverse(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv.at(p[i]) = i;
  return inv;
}

Permutation random_permutation(std::size_t n, Rng& rng) {
  Permutation p = identity_permutation(n);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

std::vector<Permutation> all_permutations(std::size_t n) {
  std::vector<Permutation> out;
  Permutation p = identity_permutation(n);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::uint64_t factorial(std::size_t n) {
  std::uint64_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) {
    if (f > std::numeric_limits<std::uint64_t>::max() / k) return std::numeric_limits<std::uint64_t>::max();
    f *= k;
  }
  return f;
}

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::vector<PermutationPair> sampled_pairs(std::size_t n, std::size_t m, const PermutationOptions& o,
                                           bool permute_items) {
  if (o.samples == 0) throw std::invalid_argument("sampled permutation mode needs at least one sample");
  Rng rng = make_stream(o.seed, Stream::kPermutations, {n, m});
  std::vector<PermutationPair> out;
  out.push_back({identity_permutation(n), identity_permutation(m)});
  while (out.size() < o.samples) {
    Permutation rows = random_permutation(n, rng);
    Permutation cols = permute_items ? random_permutation(m, rng) : identity_permutation(m);
    out.push_back({std::move(rows), std::move(cols)});
  }
  return out;
}

}  // namespace

std::vector<PermutationPair> permutation_pairs(std::size_t n, std::size_t m, const PermutationOptions& o) {
  if (o.mode == PermutationMode::kSampled) return sampled_pairs(n, m, o, true);
  const std::uint64_t total = saturating_mul(factorial(n), factorial(m));
  if (total > o.cap) {
    throw PermutationCapExceeded("exhaustive enumeration needs " + std::to_string(n) + "!*" + std::to_string(m) +
                                 "! permutations, above the cap of " + std::to_string(o.cap) +
                                 "; use sampled mode");
  }
  std::vector<PermutationPair> out;
  for (const auto& rows : all_permutations(n)) {
    for (const auto& cols : all_permutations(m)) out.push_back({rows, cols});
  }
  return out;
}

std::vector<PermutationPair> bidder_permutations(std::size_t n, std::size_t m, const PermutationOptions& o) {
  if (o.mode == PermutationMode::kSampled) return sampled_pairs(n, m, o, false);
  if (factorial(n) > o.cap) {
    throw PermutationCapExceeded("exhaustive enumeration needs " + std::to_string(n) + "! bidder permutations, above the cap of " +
                                 std::to_string(o.cap) + "; use sampled mode");
  }
  std::vector<PermutationPair> out;
  for (auto& rows : all_permutations(n)) out.push_back({std::move(rows), identity_permutation(m)});
  return out;
}

Tensor permute_profiles(const Tensor& values, const PermutationPair& pair) {
  const Shape& s = values.shape();
  if (s.size() < 2) throw ShapeError("permute_profiles: need [..,n,m] values, got " + shape_to_string(s));
  const std::size_t n = s[s.size() - 2];
  const std::size_t m = s[s.size() - 1];
  if (pair.bidders.size() != n || pair.items.size() != m) {
    throw ShapeError("permute_profiles: permutation sizes do not match " + shape_to_string(s));
  }
  const std::size_t profiles = values.size() / (n * m);
  Tensor out(s);
  for (std::size_t b = 0; b < profiles; ++b) {
    const double* src = values.data().data() + b * n * m;
    double* dst = out.data().data() + b * n * m;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) dst[i * m + j] = src[pair.bidders[i] * m + pair.items[j]];
    }
  }
  return out;
}

}  // namespace eqa
