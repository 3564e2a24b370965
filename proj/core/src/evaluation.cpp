#include "eqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "eqa/networks.hpp"
#include "eqa/rng.hpp"

namespace eqa {

namespace {

constexpr std::size_t kChunkProfiles = 1024;

Tensor slice_profiles(const Tensor& values, std::size_t first, std::size_t count) {
  const std::size_t nm = values.dim(1) * values.dim(2);
  const auto begin = values.storage().begin() + static_cast<std::ptrdiff_t>(first * nm);
  return Tensor(Shape{count, values.dim(1), values.dim(2)},
                std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * nm)));
}

void require_profiles(const Tensor& values) {
  if (values.rank() != 3) throw ShapeError("expected valuations [batch,n,m], got " + shape_to_string(values.shape()));
}

}  // namespace

void RegretEvalConfig::validate() const {
  if (steps == 0 || restarts == 0) throw std::invalid_argument("regret evaluation needs steps >= 1 and restarts >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("regret evaluation step size must be > 0");
}

std::vector<double> sample_revenues(const Mechanism& mechanism, const Tensor& values) {
  require_profiles(values);
  const std::size_t L = values.dim(0), n = values.dim(1);
  std::vector<double> out(L);
  for (std::size_t first = 0; first < L; first += kChunkProfiles) {
    const std::size_t count = std::min(kChunkProfiles, L - first);
    const MechanismOutput o = evaluate(mechanism, slice_profiles(values, first, count));
    for (std::size_t b = 0; b < count; ++b) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += o.payments[b * n + i];
      out[first + b] = total;
    }
  }
  return out;
}

double revenue(const Mechanism& mechanism, const Tensor& values) {
  const auto r = sample_revenues(mechanism, values);
  double total = 0.0;
  for (double x : r) total += x;
  return total / static_cast<double>(r.size());
}

RegretReport test_regret(const Mechanism& mechanism, const SampleBatch& batch, const RegretEvalConfig& config) {
  config.validate();
  const std::size_t n = batch.bidders(), m = batch.items();
  const std::size_t L = config.max_samples == 0 ? batch.count() : std::min(config.max_samples, batch.count());
  const std::size_t K = config.restarts;
  const std::size_t chunk = std::max<std::size_t>(1, kChunkProfiles / (K * n));
  const AscentOptions ascent{config.steps, config.step_size, AscentRule::kAdam};

  RegretReport report;
  report.samples = L;
  report.per_bidder.assign(n, 0.0);
  std::vector<double> draw(n * m);
  for (std::size_t first = 0; first < L; first += chunk) {
    const std::size_t c = std::min(chunk, L - first);
    const Tensor values = slice_profiles(batch.values, first, c);
    Tensor replicated(Shape{c * K, n, m});
    Tensor misreports(Shape{c * K, n, m});
    for (std::size_t s = 0; s < c; ++s) {
      const double* v = values.data().data() + s * n * m;
      for (std::size_t k = 0; k < K; ++k) {
        double* rep = replicated.data().data() + (s * K + k) * n * m;
        double* mis = misreports.data().data() + (s * K + k) * n * m;
        std::copy_n(v, n * m, rep);
        if (k == 0) {
          std::copy_n(v, n * m, mis);
        } else {
          Rng rng = make_stream(config.seed, Stream::kRestarts, {first + s, k});
          for (std::size_t e = 0; e < n * m; ++e) mis[e] = batch.spec.quantile(e % m, rng.uniform());
        }
      }
    }
    Tensor best;
    misreport_ascent(mechanism, replicated, misreports, batch.spec, ascent, &best);
    const Tensor truth = truthful_utilities(mechanism, values);
    for (std::size_t s = 0; s < c; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) top = std::max(top, best[(s * K + k) * n + i]);
        report.per_bidder[i] += std::max(0.0, top - truth[s * n + i]);
      }
    }
  }
  double total = 0.0;
  for (double& r : report.per_bidder) {
    r /= static_cast<double>(L);
    total += r;
  }
  report.mean = total / static_cast<double>(n);
  return report;
}

SensitivityReport permutation_sensitivity(const Mechanism& mechanism, const Tensor& values,
                                          const PermutationOptions& options) {
  require_profiles(values);
  const std::size_t L = values.dim(0);
  const auto pairs = permutation_pairs(values.dim(1), values.dim(2), options);
  std::vector<double> lo(L, std::numeric_limits<double>::infinity());
  std::vector<double> hi(L, -std::numeric_limits<double>::infinity());
  for (const auto& pair : pairs) {
    const auto r = sample_revenues(mechanism, permute_profiles(values, pair));
    for (std::size_t l = 0; l < L; ++l) {
      lo[l] = std::min(lo[l], r[l]);
      hi[l] = std::max(hi[l], r[l]);
    }
  }
  SensitivityReport report;
  report.mode = options.mode;
  report.permutations = pairs.size();
  report.h.resize(L);
  for (std::size_t l = 0; l < L; ++l) report.h[l] = hi[l] - lo[l];
  report.max = *std::max_element(report.h.begin(), report.h.end());
  std::vector<double> sorted = report.h;
  std::sort(sorted.begin(), sorted.end());
  report.median = L % 2 ? sorted[L / 2] : 0.5 * (sorted[L / 2 - 1] + sorted[L / 2]);
  constexpr std::size_t kBins = 50;
  report.bin_edges.resize(kBins + 1);
  for (std::size_t b = 0; b <= kBins; ++b) report.bin_edges[b] = report.max * static_cast<double>(b) / kBins;
  report.histogram.assign(kBins, 0);
  for (double h : report.h) {
    std::size_t bin = report.max > 0.0 ? static_cast<std::size_t>(h / report.max * kBins) : 0;
    ++report.histogram[std::min(bin, kBins - 1)];
  }
  return report;
}

ExploitabilityReport exploitability(const Mechanism& mechanism, const Tensor& values,
                                    const PermutationOptions& options) {
  require_profiles(values);
  const std::size_t L = values.dim(0);
  const auto pairs = bidder_permutations(values.dim(1), values.dim(2), options);
  const auto base = sample_revenues(mechanism, values);
  std::vector<double> worst = base;
  for (const auto& pair : pairs) {
    const auto r = sample_revenues(mechanism, permute_profiles(values, pair));
    for (std::size_t l = 0; l < L; ++l) worst[l] = std::min(worst[l], r[l]);
  }
  ExploitabilityReport report;
  report.mode = options.mode;
  report.permutations = pairs.size();
  for (std::size_t l = 0; l < L; ++l) {
    report.r_opt += base[l];
    report.r_adv += worst[l];
  }
  report.r_opt /= static_cast<double>(L);
  report.r_adv /= static_cast<double>(L);
  if (report.r_opt == 0.0) {
    report.defined = false;
    report.loss_percent = std::numeric_limits<double>::quiet_NaN();
  } else {
    report.loss_percent = 100.0 * (report.r_opt - report.r_adv) / report.r_opt;
  }
  return report;
}

SymmetrizedMechanism::SymmetrizedMechanism(std::shared_ptr<const Mechanism> inner, PermutationOptions options)
    : inner_(std::move(inner)), options_(options) {
  if (!inner_) throw std::invalid_argument("symmetrize: null mechanism");
}

std::vector<PermutationPair> SymmetrizedMechanism::pairs(std::size_t n, std::size_t m) const {
  PermutationOptions o = options_;
  o.mode = factorial(n) <= o.cap && factorial(m) <= o.cap && factorial(n) * factorial(m) <= o.cap
               ? PermutationMode::kExhaustive
               : PermutationMode::kSampled;
  return permutation_pairs(n, m, o);
}

MechanismVars SymmetrizedMechanism::forward(ad::Tape& tape, ad::Var bids) const {
  const Shape s = bids.shape();
  if (s.size() != 3) throw ShapeError("symmetrized mechanism: bids must be [batch,n,m]");
  const auto all = pairs(s[1], s[2]);
  ad::Var g_sum, p_sum;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto& pr = all[k];
    ad::Var permuted = ad::index_select(ad::index_select(bids, 1, pr.bidders), 2, pr.items);
    const MechanismVars out = inner_->forward(tape, permuted);
    const Permutation rows = inverse(pr.bidders);
    ad::Var g = ad::index_select(ad::index_select(out.allocation, 1, rows), 2, inverse(pr.items));
    ad::Var p = ad::index_select(out.payments, 1, rows);
    g_sum = k == 0 ? g : g_sum + g;
    p_sum = k == 0 ? p : p_sum + p;
  }
  const double w = 1.0 / static_cast<double>(all.size());
  return {ad::scale(g_sum, w), ad::scale(p_sum, w)};
}

std::shared_ptr<SymmetrizedMechanism> symmetrize(std::shared_ptr<const Mechanism> mechanism,
                                                 std::size_t num_perm_samples, std::uint64_t seed,
                                                 std::uint64_t cap) {
  PermutationOptions o;
  o.cap = cap;
  o.samples = num_perm_samples;
  o.seed = seed;
  return std::make_shared<SymmetrizedMechanism>(std::move(mechanism), o);
}

double equivariance_deviation(const Mechanism& mechanism, const Tensor& values,
                              const std::vector<PermutationPair>& pairs) {
  require_profiles(values);
  const std::size_t L = values.dim(0), n = values.dim(1);
  const MechanismOutput base = evaluate(mechanism, values);
  double worst = 0.0;
  for (const auto& pair : pairs) {
    const MechanismOutput out = evaluate(mechanism, permute_profiles(values, pair));
    worst = std::max(worst, max_abs_diff(out.allocation, permute_profiles(base.allocation, pair)));
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(out.payments[l * n + i] - base.payments[l * n + pair.bidders[i]]));
      }
    }
  }
  return worst;
}

CrossSizeResult cross_size_eval(const LearnedMechanism& mechanism, const SampleBatch& batch,
                                const RegretEvalConfig& config) {
  if (mechanism.architecture() != Architecture::kEquivariant) {
    throw SizeBoundArchitecture("size-bound architecture: " + mechanism.name() +
                                " cannot be evaluated at another size");
  }
  CrossSizeResult r;
  r.bidders = batch.bidders();
  r.items = batch.items();
  r.revenue = revenue(mechanism, batch.values);
  r.regret = test_regret(mechanism, batch, config);
  return r;
}

}  // namespace eqa
