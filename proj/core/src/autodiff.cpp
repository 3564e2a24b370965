#include "eqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace eqa::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (std::size_t id : inputs) needs = needs || nodes_.at(id).requires_grad;
  Node node{std::move(value), Tensor(), false, needs, nullptr};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to a different tape");
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_to_string(loss.shape()));
  }
  backward_done_ = true;
  grad(loss.id()).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.has_grad || !node.backward) continue;
    node.backward(*this, id);
  }
}

Tensor Tape::gradient(Var var) const {
  const Node& node = nodes_.at(var.id());
  if (!node.has_grad) return Tensor(node.value.shape(), 0.0);
  return node.grad;
}

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

namespace {

void same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool trivial = false;
};

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

Broadcast make_broadcast(const Shape& a, const Shape& b, const char* op) {
  auto fail = [&] {
    return ShapeError(std::string(op) + ": cannot broadcast " + shape_to_string(a) + " with " +
                      shape_to_string(b));
  };
  if (a.size() != b.size()) throw fail();
  Broadcast bc;
  bc.trivial = (a == b);
  const auto sa = row_major_strides(a);
  const auto sb = row_major_strides(b);
  bc.out.resize(a.size());
  bc.stride_a.resize(a.size());
  bc.stride_b.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1) throw fail();
    bc.out[i] = std::max(a[i], b[i]);
    bc.stride_a[i] = a[i] == 1 ? 0 : sa[i];
    bc.stride_b[i] = b[i] == 1 ? 0 : sb[i];
  }
  return bc;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
  const std::size_t total = shape_size(bc.out);
  if (bc.trivial) {
    for (std::size_t o = 0; o < total; ++o) f(o, o, o);
    return;
  }
  const std::size_t r = bc.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < total; ++o) {
    f(o, ia, ib);
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      ia += bc.stride_a[ax];
      ib += bc.stride_b[ax];
      if (idx[ax] < bc.out[ax]) break;
      ia -= bc.stride_a[ax] * bc.out[ax];
      ib -= bc.stride_b[ax] * bc.out[ax];
      idx[ax] = 0;
    }
  }
}

enum class BinOp { kAdd, kSub, kMul };

Var binary(Var a, Var b, BinOp op, const char* name) {
  same_tape(a, b, name);
  Tape& tape = a.tape();
  auto bc = make_broadcast(a.shape(), b.shape(), name);
  const auto& av = a.value().storage();
  const auto& bv = b.value().storage();
  Tensor out(bc.out);
  auto& ov = out.storage();
  switch (op) {
    case BinOp::kAdd:
      for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) { ov[o] = av[i] + bv[j]; });
      break;
    case BinOp::kSub:
      for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) { ov[o] = av[i] - bv[j]; });
      break;
    case BinOp::kMul:
      for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) { ov[o] = av[i] * bv[j]; });
      break;
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(std::move(out), {ia, ib}, [ia, ib, op, bc = std::move(bc)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    if (t.requires_grad(ia)) {
      auto& ga = t.grad(ia).storage();
      if (op == BinOp::kMul) {
        const auto& bv = t.value(ib).storage();
        for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) { ga[i] += g[o] * bv[j]; });
      } else {
        for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t) { ga[i] += g[o]; });
      }
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib).storage();
      if (op == BinOp::kMul) {
        const auto& av = t.value(ia).storage();
        for_each_broadcast(bc, [&](std::size_t o, std::size_t i, std::size_t j) { gb[j] += g[o] * av[i]; });
      } else if (op == BinOp::kSub) {
        for_each_broadcast(bc, [&](std::size_t o, std::size_t, std::size_t j) { gb[j] -= g[o]; });
      } else {
        for_each_broadcast(bc, [&](std::size_t o, std::size_t, std::size_t j) { gb[j] += g[o]; });
      }
    }
  });
}

// Elementwise op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = a.tape();
  Tensor out(a.shape());
  const auto& av = a.value().storage();
  auto& ov = out.storage();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {ia}, [ia, deriv](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    const auto& x = t.value(ia).storage();
    const auto& y = t.value(self).storage();
    auto& ga = t.grad(ia).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

Shape keepdim_shape(const Shape& s, std::size_t axis) {
  Shape out = s;
  out[axis] = 1;
  return out;
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinOp::kAdd, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::kSub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::kMul, "mul"); }

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var matmul(Var a, Var w) {
  same_tape(a, w, "matmul");
  const Shape& as = a.shape();
  const Shape& ws = w.shape();
  if (as.empty() || ws.size() != 2 || as.back() != ws[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(as) + " and " + shape_to_string(ws));
  }
  const std::size_t k = ws[0];
  const std::size_t o = ws[1];
  const std::size_t rows = a.value().size() / k;
  Shape out_shape = as;
  out_shape.back() = o;
  Tensor out(out_shape);
  const double* A = a.value().data().data();
  const double* W = w.value().data().data();
  double* Y = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = Y + r * o;
    const double* x = A + r * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double xv = x[kk];
      const double* wr = W + kk * o;
      for (std::size_t c = 0; c < o; ++c) y[c] += xv * wr[c];
    }
  }
  const std::size_t ia = a.id();
  const std::size_t iw = w.id();
  return a.tape().record(std::move(out), {ia, iw}, [ia, iw, rows, k, o](Tape& t, std::size_t self) {
    const double* G = t.grad(self).data().data();
    if (t.requires_grad(ia)) {
      const double* W = t.value(iw).data().data();
      double* GA = t.grad(ia).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G + r * o;
        double* ga = GA + r * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* wr = W + kk * o;
          double acc = 0.0;
          for (std::size_t c = 0; c < o; ++c) acc += g[c] * wr[c];
          ga[kk] += acc;
        }
      }
    }
    if (t.requires_grad(iw)) {
      const double* A = t.value(ia).data().data();
      double* GW = t.grad(iw).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = G + r * o;
        const double* x = A + r * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double xv = x[kk];
          double* gw = GW + kk * o;
          for (std::size_t c = 0; c < o; ++c) gw[c] += xv * g[c];
        }
      }
    }
  });
}

namespace {

Var reduce_sum(Var a, std::size_t axis, double factor) {
  const AxisSplit s = split_axis(a.shape(), axis);
  Tensor out(keepdim_shape(a.shape(), axis));
  const auto& av = a.value().storage();
  auto& ov = out.storage();
  for (std::size_t p = 0; p < s.outer; ++p) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = av.data() + (p * s.extent + e) * s.inner;
      double* dst = ov.data() + p * s.inner;
      for (std::size_t q = 0; q < s.inner; ++q) dst[q] += src[q];
    }
  }
  if (factor != 1.0) {
    for (double& v : ov) v *= factor;
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, s, factor](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    auto& ga = t.grad(ia).storage();
    for (std::size_t p = 0; p < s.outer; ++p) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        double* dst = ga.data() + (p * s.extent + e) * s.inner;
        const double* src = g.data() + p * s.inner;
        for (std::size_t q = 0; q < s.inner; ++q) dst[q] += factor * src[q];
      }
    }
  });
}

}  // namespace

Var sum(Var a, std::size_t axis) { return reduce_sum(a, axis, 1.0); }

Var mean(Var a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  return reduce_sum(a, axis, 1.0 / static_cast<double>(s.extent));
}

Var max(Var a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  Tensor out(keepdim_shape(a.shape(), axis));
  std::vector<std::size_t> arg(s.outer * s.inner, 0);
  const auto& av = a.value().storage();
  auto& ov = out.storage();
  for (std::size_t p = 0; p < s.outer; ++p) {
    for (std::size_t q = 0; q < s.inner; ++q) {
      std::size_t best = 0;
      double bv = av[p * s.extent * s.inner + q];
      for (std::size_t e = 1; e < s.extent; ++e) {
        const double v = av[(p * s.extent + e) * s.inner + q];
        if (v > bv) {
          bv = v;
          best = e;
        }
      }
      ov[p * s.inner + q] = bv;
      arg[p * s.inner + q] = best;
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, s, arg = std::move(arg)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    auto& ga = t.grad(ia).storage();
    for (std::size_t p = 0; p < s.outer; ++p) {
      for (std::size_t q = 0; q < s.inner; ++q) {
        const std::size_t o = p * s.inner + q;
        ga[(p * s.extent + arg[o]) * s.inner + q] += g[o];
      }
    }
  });
}

Var sum_all(Var a) {
  double total = 0.0;
  for (double v : a.value().storage()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(total), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ia).storage()) v += g;
  });
}

Var softmax(Var a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  Tensor out(a.shape());
  const auto& av = a.value().storage();
  auto& ov = out.storage();
  for (std::size_t p = 0; p < s.outer; ++p) {
    for (std::size_t q = 0; q < s.inner; ++q) {
      const std::size_t base = p * s.extent * s.inner + q;
      double mx = av[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, av[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double ex = std::exp(av[base + e * s.inner] - mx);
        ov[base + e * s.inner] = ex;
        z += ex;
      }
      for (std::size_t e = 0; e < s.extent; ++e) ov[base + e * s.inner] /= z;
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, s](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    const auto& y = t.value(self).storage();
    auto& ga = t.grad(ia).storage();
    for (std::size_t p = 0; p < s.outer; ++p) {
      for (std::size_t q = 0; q < s.inner; ++q) {
        const std::size_t base = p * s.extent * s.inner + q;
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) dot += g[base + e * s.inner] * y[base + e * s.inner];
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          ga[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    auto& ga = t.grad(ia).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var index_select(Var a, std::size_t axis, std::vector<std::size_t> indices) {
  const AxisSplit s = split_axis(a.shape(), axis);
  if (indices.empty()) throw ShapeError("index_select: empty index list");
  for (std::size_t idx : indices) {
    if (idx >= s.extent) {
      throw ShapeError("index_select: index " + std::to_string(idx) + " out of range for axis of extent " +
                       std::to_string(s.extent));
    }
  }
  Shape out_shape = a.shape();
  out_shape[axis] = indices.size();
  Tensor out(out_shape);
  const auto& av = a.value().storage();
  auto& ov = out.storage();
  const std::size_t k = indices.size();
  for (std::size_t p = 0; p < s.outer; ++p) {
    for (std::size_t e = 0; e < k; ++e) {
      const double* src = av.data() + (p * s.extent + indices[e]) * s.inner;
      double* dst = ov.data() + (p * k + e) * s.inner;
      std::copy(src, src + s.inner, dst);
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, s, indices = std::move(indices)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self).storage();
    auto& ga = t.grad(ia).storage();
    const std::size_t k = indices.size();
    for (std::size_t p = 0; p < s.outer; ++p) {
      for (std::size_t e = 0; e < k; ++e) {
        const double* src = g.data() + (p * k + e) * s.inner;
        double* dst = ga.data() + (p * s.extent + indices[e]) * s.inner;
        for (std::size_t q = 0; q < s.inner; ++q) dst[q] += src[q];
      }
    }
  });
}

}  // namespace eqa::ad
