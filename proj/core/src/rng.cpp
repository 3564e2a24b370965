#include "eqa/rng.hpp"

#include <stdexcept>

namespace eqa {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::result_type Rng::operator()() {
  state_ += kGolden;
  return mix64(state_);
}

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = (*this)();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

Rng Rng::split(std::uint64_t key) const { return Rng(mix64(state_ ^ mix64(key + kGolden))); }

Rng make_stream(std::uint64_t seed, Stream tag, std::initializer_list<std::uint64_t> keys) {
  Rng r = Rng(mix64(seed)).split(static_cast<std::uint64_t>(tag));
  for (std::uint64_t k : keys) r = r.split(k);
  return r;
}

}  // namespace eqa
