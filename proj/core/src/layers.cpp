#include "eqa/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace eqa {

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + s);
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(Shape{fan_in, fan_out});
  for (double& v : t.storage()) v = a * (2.0 * rng.uniform() - 1.0);
  return t;
}

namespace {

ad::Var activate(ad::Var z, Activation activation) {
  return activation == Activation::kTanh ? ad::tanh(z) : z;
}

// Y[rows, O] += X[rows, K] * W[K, O]
void gemm_acc(const double* X, const double* W, double* Y, std::size_t rows, std::size_t k, std::size_t o) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = Y + r * o;
    const double* x = X + r * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double xv = x[kk];
      const double* w = W + kk * o;
      for (std::size_t c = 0; c < o; ++c) y[c] += xv * w[c];
    }
  }
}

// GW[K, O] += X[rows, K]^T * G[rows, O]
void gemm_at_acc(const double* X, const double* G, double* GW, std::size_t rows, std::size_t k, std::size_t o) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = X + r * k;
    const double* g = G + r * o;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double xv = x[kk];
      double* gw = GW + kk * o;
      for (std::size_t c = 0; c < o; ++c) gw[c] += xv * g[c];
    }
  }
}

// GX[rows, K] = G[rows, O] * W[K, O]^T (overwrites)
void gemm_bt(const double* G, const double* W, double* GX, std::size_t rows, std::size_t k, std::size_t o) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = G + r * o;
    double* gx = GX + r * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* w = W + kk * o;
      double acc = 0.0;
      for (std::size_t c = 0; c < o; ++c) acc += g[c] * w[c];
      gx[kk] = acc;
    }
  }
}

struct ExchangeableDims {
  std::size_t batch, n, m, k, o;
};

ExchangeableDims exchangeable_dims(const Shape& in, const ExchangeableVars& w) {
  if (in.size() != 4) throw ShapeError("exchangeable: expected [batch,n,m,K] input, got " + shape_to_string(in));
  const Shape& ws = w.entry.shape();
  if (ws.size() != 2 || ws[0] != in[3]) {
    throw ShapeError("exchangeable: channel mismatch, input " + shape_to_string(in) + " vs weights " +
                     shape_to_string(ws));
  }
  for (const ad::Var* v : {&w.bidder_pool, &w.item_pool, &w.global_pool}) {
    if (v->shape() != ws) {
      throw ShapeError("exchangeable: pooled weight " + shape_to_string(v->shape()) + " differs from " +
                       shape_to_string(ws));
    }
  }
  if (w.bias.shape() != Shape{ws[1]}) {
    throw ShapeError("exchangeable: bias " + shape_to_string(w.bias.shape()) + " does not match " +
                     shape_to_string(ws));
  }
  return {in[0], in[1], in[2], ws[0], ws[1]};
}

// Rank-3 inputs are handled by adding a unit batch axis.
template <class F>
ad::Var with_batch_axis(ad::Var input, F f) {
  const Shape s = input.shape();
  if (s.size() != 3) return f(input);
  ad::Var y = f(ad::reshape(input, Shape{1, s[0], s[1], s[2]}));
  const Shape ys = y.shape();
  return ad::reshape(y, Shape{ys[1], ys[2], ys[3]});
}

ad::Var exchangeable_fused(ad::Var input, const ExchangeableVars& w, Activation activation) {
  const ExchangeableDims d = exchangeable_dims(input.shape(), w);
  const std::size_t nm = d.n * d.m;
  const double* X = input.value().data().data();

  // Pools: over bidders -> [batch, m, K]; over items -> [batch, n, K]; global -> [batch, K].
  std::vector<double> bidder_mean(d.batch * d.m * d.k, 0.0);
  std::vector<double> item_mean(d.batch * d.n * d.k, 0.0);
  std::vector<double> global_mean(d.batch * d.k, 0.0);
  const double inv_n = 1.0 / static_cast<double>(d.n);
  const double inv_m = 1.0 / static_cast<double>(d.m);
  const double inv_nm = 1.0 / static_cast<double>(nm);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t i = 0; i < d.n; ++i) {
      for (std::size_t j = 0; j < d.m; ++j) {
        const double* x = X + ((b * d.n + i) * d.m + j) * d.k;
        double* bm = bidder_mean.data() + (b * d.m + j) * d.k;
        double* im = item_mean.data() + (b * d.n + i) * d.k;
        double* gm = global_mean.data() + b * d.k;
        for (std::size_t c = 0; c < d.k; ++c) {
          bm[c] += x[c] * inv_n;
          im[c] += x[c] * inv_m;
          gm[c] += x[c] * inv_nm;
        }
      }
    }
  }

  std::vector<double> bidder_term(d.batch * d.m * d.o, 0.0);
  std::vector<double> item_term(d.batch * d.n * d.o, 0.0);
  std::vector<double> global_term(d.batch * d.o, 0.0);
  gemm_acc(bidder_mean.data(), w.bidder_pool.value().data().data(), bidder_term.data(), d.batch * d.m, d.k, d.o);
  gemm_acc(item_mean.data(), w.item_pool.value().data().data(), item_term.data(), d.batch * d.n, d.k, d.o);
  gemm_acc(global_mean.data(), w.global_pool.value().data().data(), global_term.data(), d.batch, d.k, d.o);

  Tensor out(Shape{d.batch, d.n, d.m, d.o});
  double* Y = out.data().data();
  gemm_acc(X, w.entry.value().data().data(), Y, d.batch * nm, d.k, d.o);
  const double* bias = w.bias.value().data().data();
  const bool use_tanh = activation == Activation::kTanh;
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* gt = global_term.data() + b * d.o;
    for (std::size_t i = 0; i < d.n; ++i) {
      const double* it = item_term.data() + (b * d.n + i) * d.o;
      for (std::size_t j = 0; j < d.m; ++j) {
        const double* bt = bidder_term.data() + (b * d.m + j) * d.o;
        double* y = Y + ((b * d.n + i) * d.m + j) * d.o;
        for (std::size_t c = 0; c < d.o; ++c) {
          const double z = y[c] + bt[c] + it[c] + gt[c] + bias[c];
          y[c] = use_tanh ? std::tanh(z) : z;
        }
      }
    }
  }

  const std::size_t ix = input.id();
  const std::size_t iw1 = w.entry.id();
  const std::size_t iw2 = w.bidder_pool.id();
  const std::size_t iw3 = w.item_pool.id();
  const std::size_t iw4 = w.global_pool.id();
  const std::size_t ib = w.bias.id();
  return input.tape().record(
      std::move(out), {ix, iw1, iw2, iw3, iw4, ib},
      [=, bidder_mean = std::move(bidder_mean), item_mean = std::move(item_mean),
       global_mean = std::move(global_mean)](ad::Tape& t, std::size_t self) {
        const double* G = t.grad(self).data().data();
        const double* Yv = t.value(self).data().data();
        const std::size_t total = d.batch * nm * d.o;
        std::vector<double> dz(G, G + total);
        if (use_tanh) {
          for (std::size_t e = 0; e < total; ++e) dz[e] *= 1.0 - Yv[e] * Yv[e];
        }
        // Reduce dz onto the pooled terms.
        std::vector<double> d_bidder(d.batch * d.m * d.o, 0.0);
        std::vector<double> d_item(d.batch * d.n * d.o, 0.0);
        std::vector<double> d_global(d.batch * d.o, 0.0);
        for (std::size_t b = 0; b < d.batch; ++b) {
          for (std::size_t i = 0; i < d.n; ++i) {
            for (std::size_t j = 0; j < d.m; ++j) {
              const double* g = dz.data() + ((b * d.n + i) * d.m + j) * d.o;
              double* db = d_bidder.data() + (b * d.m + j) * d.o;
              double* di = d_item.data() + (b * d.n + i) * d.o;
              double* dg = d_global.data() + b * d.o;
              for (std::size_t c = 0; c < d.o; ++c) {
                db[c] += g[c];
                di[c] += g[c];
                dg[c] += g[c];
              }
            }
          }
        }
        if (t.requires_grad(ib)) {
          double* gb = t.grad(ib).data().data();
          for (std::size_t b = 0; b < d.batch; ++b) {
            for (std::size_t c = 0; c < d.o; ++c) gb[c] += d_global[b * d.o + c];
          }
        }
        const double* Xv = t.value(ix).data().data();
        if (t.requires_grad(iw1)) gemm_at_acc(Xv, dz.data(), t.grad(iw1).data().data(), d.batch * nm, d.k, d.o);
        if (t.requires_grad(iw2)) {
          gemm_at_acc(bidder_mean.data(), d_bidder.data(), t.grad(iw2).data().data(), d.batch * d.m, d.k, d.o);
        }
        if (t.requires_grad(iw3)) {
          gemm_at_acc(item_mean.data(), d_item.data(), t.grad(iw3).data().data(), d.batch * d.n, d.k, d.o);
        }
        if (t.requires_grad(iw4)) {
          gemm_at_acc(global_mean.data(), d_global.data(), t.grad(iw4).data().data(), d.batch, d.k, d.o);
        }
        if (!t.requires_grad(ix)) return;
        std::vector<double> dx(d.batch * nm * d.k);
        std::vector<double> dbm(d.batch * d.m * d.k);
        std::vector<double> dim(d.batch * d.n * d.k);
        std::vector<double> dgm(d.batch * d.k);
        gemm_bt(dz.data(), t.value(iw1).data().data(), dx.data(), d.batch * nm, d.k, d.o);
        gemm_bt(d_bidder.data(), t.value(iw2).data().data(), dbm.data(), d.batch * d.m, d.k, d.o);
        gemm_bt(d_item.data(), t.value(iw3).data().data(), dim.data(), d.batch * d.n, d.k, d.o);
        gemm_bt(d_global.data(), t.value(iw4).data().data(), dgm.data(), d.batch, d.k, d.o);
        double* GX = t.grad(ix).data().data();
        for (std::size_t b = 0; b < d.batch; ++b) {
          for (std::size_t i = 0; i < d.n; ++i) {
            for (std::size_t j = 0; j < d.m; ++j) {
              const std::size_t row = (b * d.n + i) * d.m + j;
              const double* a = dx.data() + row * d.k;
              const double* bm = dbm.data() + (b * d.m + j) * d.k;
              const double* im = dim.data() + (b * d.n + i) * d.k;
              const double* gm = dgm.data() + b * d.k;
              double* gx = GX + row * d.k;
              for (std::size_t c = 0; c < d.k; ++c) {
                gx[c] += a[c] + bm[c] * inv_n + im[c] * inv_m + gm[c] * inv_nm;
              }
            }
          }
        }
      });
}

ad::Var exchangeable_from_primitives(ad::Var x, const ExchangeableVars& w, Activation activation) {
  const ExchangeableDims d = exchangeable_dims(x.shape(), w);
  ad::Var entry = ad::matmul(x, w.entry);
  ad::Var over_bidders = ad::matmul(ad::mean(x, 1), w.bidder_pool);
  ad::Var over_items = ad::matmul(ad::mean(x, 2), w.item_pool);
  ad::Var global = ad::matmul(ad::mean(ad::mean(x, 1), 2), w.global_pool);
  ad::Var z = entry + over_bidders + over_items + global + ad::reshape(w.bias, Shape{1, 1, 1, d.o});
  return activate(z, activation);
}

}  // namespace

ad::Var exchangeable(ad::Var input, const ExchangeableVars& w, Activation activation) {
  return with_batch_axis(input, [&](ad::Var x) { return exchangeable_fused(x, w, activation); });
}

ad::Var exchangeable_composed(ad::Var input, const ExchangeableVars& w, Activation activation) {
  return with_batch_axis(input, [&](ad::Var x) { return exchangeable_from_primitives(x, w, activation); });
}

ad::Var dense(ad::Var input, ad::Var weight, ad::Var bias, Activation activation) {
  const Shape& ws = weight.shape();
  if (ws.size() != 2 || input.shape().empty() || input.shape().back() != ws[0]) {
    throw ShapeError("dense: input " + shape_to_string(input.shape()) + " does not match weight " +
                     shape_to_string(ws));
  }
  if (bias.shape() != Shape{ws[1]}) {
    throw ShapeError("dense: bias " + shape_to_string(bias.shape()) + " does not match weight " + shape_to_string(ws));
  }
  Shape bshape(input.shape().size(), 1);
  bshape.back() = ws[1];
  return activate(ad::matmul(input, weight) + ad::reshape(bias, bshape), activation);
}

ExchangeableLayer::ExchangeableLayer(std::size_t in_channels, std::size_t out_channels, Activation activation)
    : entry(Shape{in_channels, out_channels}),
      bidder_pool(Shape{in_channels, out_channels}),
      item_pool(Shape{in_channels, out_channels}),
      global_pool(Shape{in_channels, out_channels}),
      bias(Shape{out_channels}),
      in_(in_channels),
      out_(out_channels),
      activation_(activation) {}

ExchangeableLayer ExchangeableLayer::glorot(std::size_t in_channels, std::size_t out_channels, Activation activation,
                                            Rng& rng) {
  ExchangeableLayer layer(in_channels, out_channels, activation);
  layer.entry = glorot_uniform(in_channels, out_channels, rng);
  layer.bidder_pool = glorot_uniform(in_channels, out_channels, rng);
  layer.item_pool = glorot_uniform(in_channels, out_channels, rng);
  layer.global_pool = glorot_uniform(in_channels, out_channels, rng);
  return layer;
}

ExchangeableVars ExchangeableLayer::bind(ad::Tape& tape, bool track) const {
  auto put = [&](const Tensor& t) { return track ? tape.variable(t) : tape.constant(t); };
  return {put(entry), put(bidder_pool), put(item_pool), put(global_pool), put(bias)};
}

Tensor ExchangeableLayer::forward(const Tensor& input) const {
  ad::Tape tape;
  ad::Var x = tape.constant(input);
  return exchangeable(x, bind(tape, false), activation_).value();
}

void ExchangeableLayer::append_to(ParameterSet& params, const std::string& prefix) const {
  params.add(prefix + ".w1", entry);
  params.add(prefix + ".w2", bidder_pool);
  params.add(prefix + ".w3", item_pool);
  params.add(prefix + ".w4", global_pool);
  params.add(prefix + ".b", bias);
}

DenseLayer::DenseLayer(std::size_t in_width, std::size_t out_width, Activation activation)
    : weight(Shape{in_width, out_width}), bias(Shape{out_width}), in_(in_width), out_(out_width),
      activation_(activation) {}

DenseLayer DenseLayer::glorot(std::size_t in_width, std::size_t out_width, Activation activation, Rng& rng) {
  DenseLayer layer(in_width, out_width, activation);
  layer.weight = glorot_uniform(in_width, out_width, rng);
  return layer;
}

Tensor DenseLayer::forward(const Tensor& input) const {
  ad::Tape tape;
  return dense(tape.constant(input), tape.constant(weight), tape.constant(bias), activation_).value();
}

void DenseLayer::append_to(ParameterSet& params, const std::string& prefix) const {
  params.add(prefix + ".W", weight);
  params.add(prefix + ".b", bias);
}

}  // namespace eqa
