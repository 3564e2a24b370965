#include "eqa/valuations.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "eqa/rng.hpp"

namespace eqa {

std::string to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::kUniform01: return "uniform01";
    case DistributionKind::kHeavyTail: return "heavytail_iv";
    case DistributionKind::kExponentialScale: return "exponential_scale";
  }
  return "unknown";
}

DistributionKind distribution_kind_from_string(const std::string& s) {
  if (s == "uniform01") return DistributionKind::kUniform01;
  if (s == "heavytail_iv") return DistributionKind::kHeavyTail;
  if (s == "exponential_scale") return DistributionKind::kExponentialScale;
  throw std::invalid_argument("unknown distribution kind: " + s);
}

DistributionSpec DistributionSpec::uniform(std::size_t bidders, std::size_t items) {
  DistributionSpec s{DistributionKind::kUniform01, bidders, items, {}};
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::heavy_tail(std::size_t bidders) {
  DistributionSpec s{DistributionKind::kHeavyTail, bidders, 2, {}};
  s.validate();
  return s;
}

DistributionSpec DistributionSpec::exponential(std::size_t bidders, std::vector<double> scales) {
  DistributionSpec s{DistributionKind::kExponentialScale, bidders, scales.size(), std::move(scales)};
  s.validate();
  return s;
}

void DistributionSpec::validate() const {
  if (bidders == 0 || items == 0) throw std::invalid_argument("distribution needs at least one bidder and item");
  switch (kind) {
    case DistributionKind::kUniform01:
      if (!scales.empty()) throw std::invalid_argument("uniform01 takes no scales");
      break;
    case DistributionKind::kHeavyTail:
      if (items != 2) throw std::invalid_argument("heavytail_iv is defined for exactly 2 items");
      if (!scales.empty()) throw std::invalid_argument("heavytail_iv takes no scales");
      break;
    case DistributionKind::kExponentialScale:
      if (scales.size() != items) throw std::invalid_argument("exponential_scale needs one scale per item");
      for (double s : scales) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("exponential scales must be positive");
      }
      break;
  }
}

double DistributionSpec::quantile(std::size_t item, double u) const {
  switch (kind) {
    case DistributionKind::kUniform01:
      return u;
    case DistributionKind::kHeavyTail:
      return std::pow(1.0 - u, item == 0 ? -1.0 / 5.0 : -1.0 / 6.0) - 1.0;
    case DistributionKind::kExponentialScale:
      return -scales[item] * std::log1p(-u);
  }
  return 0.0;
}

double DistributionSpec::cdf(std::size_t item, double x) const {
  if (x <= 0.0) return 0.0;
  switch (kind) {
    case DistributionKind::kUniform01:
      return std::min(x, 1.0);
    case DistributionKind::kHeavyTail:
      return 1.0 - std::pow(1.0 + x, item == 0 ? -5.0 : -6.0);
    case DistributionKind::kExponentialScale:
      return -std::expm1(-x / scales[item]);
  }
  return 0.0;
}

double DistributionSpec::support_upper(std::size_t) const {
  return kind == DistributionKind::kUniform01 ? 1.0 : std::numeric_limits<double>::infinity();
}

DistributionSpec DistributionSpec::resized(std::size_t n, std::size_t m) const {
  DistributionSpec out = *this;
  out.bidders = n;
  out.items = m;
  if (kind == DistributionKind::kExponentialScale && m != items) {
    if (std::adjacent_find(scales.begin(), scales.end(), std::not_equal_to<>()) != scales.end()) {
      throw std::invalid_argument("cannot resize exponential_scale with unequal item scales");
    }
    out.scales.assign(m, scales.front());
  }
  out.validate();
  return out;
}

bool is_symmetric(const DistributionSpec& spec) {
  switch (spec.kind) {
    case DistributionKind::kUniform01: return true;
    case DistributionKind::kHeavyTail: return false;
    case DistributionKind::kExponentialScale:
      return std::adjacent_find(spec.scales.begin(), spec.scales.end(), std::not_equal_to<>()) == spec.scales.end();
  }
  return false;
}

void project_to_support(const DistributionSpec& spec, std::span<double> values) {
  const std::size_t m = spec.items;
  for (std::size_t e = 0; e < values.size(); ++e) {
    const double hi = spec.support_upper(e % m);
    values[e] = std::clamp(values[e], 0.0, hi);
  }
}

ValuationProfile SampleBatch::profile(std::size_t index) const {
  if (index >= count()) throw std::out_of_range("SampleBatch::profile index out of range");
  const std::size_t nm = bidders() * items();
  const auto first = values.storage().begin() + static_cast<std::ptrdiff_t>(index * nm);
  return ValuationProfile(bidders(), items(), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(nm)));
}

SampleBatch SampleBatch::subset(std::size_t first, std::size_t n) const {
  if (first + n > count() || n == 0) throw std::out_of_range("SampleBatch::subset range");
  const std::size_t nm = bidders() * items();
  const auto begin = values.storage().begin() + static_cast<std::ptrdiff_t>(first * nm);
  return SampleBatch{spec, seed,
                     Tensor(Shape{n, bidders(), items()},
                            std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n * nm)))};
}

void sample_profile(const DistributionSpec& spec, std::uint64_t seed, std::size_t index, std::span<double> out) {
  if (out.size() != spec.bidders * spec.items) throw ShapeError("sample_profile: output size mismatch");
  Rng rng = make_stream(seed, Stream::kProfiles, {static_cast<std::uint64_t>(index)});
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = spec.quantile(e % spec.items, rng.uniform());
}

SampleBatch sample(const DistributionSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  if (count == 0) throw std::invalid_argument("sample: count must be at least 1");
  const std::size_t nm = spec.bidders * spec.items;
  Tensor values(Shape{count, spec.bidders, spec.items});
  for (std::size_t l = 0; l < count; ++l) sample_profile(spec, seed, l, values.data().subspan(l * nm, nm));
  return SampleBatch{spec, seed, std::move(values)};
}

namespace {

constexpr char kBatchMagic[8] = {'E', 'Q', 'A', 'B', 'A', 'T', 'C', 'H'};
constexpr std::uint32_t kBatchVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("sample batch file truncated");
  return v;
}

}  // namespace

void save_batch(const SampleBatch& batch, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(kBatchMagic, sizeof(kBatchMagic));
  put(os, kBatchVersion);
  put<std::uint64_t>(os, batch.bidders());
  put<std::uint64_t>(os, batch.items());
  put<std::uint64_t>(os, batch.count());
  put<std::uint64_t>(os, batch.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(batch.spec.kind));
  put<std::uint64_t>(os, batch.spec.scales.size());
  for (double s : batch.spec.scales) put(os, s);
  os.write(reinterpret_cast<const char*>(batch.values.data().data()),
           static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

SampleBatch load_batch(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kBatchMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a sample batch file: " + path.string());
  }
  if (get<std::uint32_t>(is) != kBatchVersion) throw std::runtime_error("unsupported sample batch version");
  const auto n = get<std::uint64_t>(is);
  const auto m = get<std::uint64_t>(is);
  const auto count = get<std::uint64_t>(is);
  SampleBatch batch;
  batch.seed = get<std::uint64_t>(is);
  const auto kind = get<std::uint32_t>(is);
  if (kind > static_cast<std::uint32_t>(DistributionKind::kExponentialScale)) {
    throw std::runtime_error("unknown distribution kind in batch file");
  }
  batch.spec.kind = static_cast<DistributionKind>(kind);
  batch.spec.bidders = n;
  batch.spec.items = m;
  const auto nscales = get<std::uint64_t>(is);
  if (nscales > m) throw std::runtime_error("corrupt sample batch header");
  for (std::uint64_t i = 0; i < nscales; ++i) batch.spec.scales.push_back(get<double>(is));
  batch.spec.validate();
  if (count == 0) throw std::runtime_error("sample batch file holds no profiles");
  batch.values = Tensor(Shape{count, n, m});
  is.read(reinterpret_cast<char*>(batch.values.data().data()),
          static_cast<std::streamsize>(batch.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("sample batch file truncated");
  validate_bids(batch.values);
  return batch;
}

}  // namespace eqa
