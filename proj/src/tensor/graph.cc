#include "rfmt/tensor/graph.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rfmt/simd/kernels.h"
#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

// Number of times `b` tiles over `a` when b's shape is a suffix of a's shape;
// 0 if it is not.
std::size_t suffix_repeats(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return 0;
  if (!std::equal(b.rbegin(), b.rend(), a.rbegin())) return 0;
  const std::size_t nb = numel(b);
  return nb == 0 ? 0 : numel(a) / nb;
}

void transpose_into(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

struct MatmulDims {
  std::size_t batch, m, k, n;
  bool shared_b;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b, bool transpose_b) {
  if (a.size() < 2 || b.size() < 2) {
    shape_fail(OpKind::kMatmul, "operands need rank >= 2, got " + shape_string(a) + " x " + shape_string(b));
  }
  MatmulDims d{};
  d.m = a[a.size() - 2];
  d.k = a[a.size() - 1];
  d.batch = numel(a) / (d.m * d.k == 0 ? 1 : d.m * d.k);
  const std::size_t bk = transpose_b ? b[b.size() - 1] : b[b.size() - 2];
  d.n = transpose_b ? b[b.size() - 2] : b[b.size() - 1];
  if (bk != d.k) {
    shape_fail(OpKind::kMatmul, "inner dims differ: " + shape_string(a) + " x " + shape_string(b) +
                                    (transpose_b ? " (b transposed)" : ""));
  }
  if (b.size() == 2) {
    d.shared_b = true;
  } else {
    if (b.size() != a.size() || !std::equal(a.begin(), a.end() - 2, b.begin())) {
      shape_fail(OpKind::kMatmul, "batch dims differ: " + shape_string(a) + " x " + shape_string(b));
    }
    d.shared_b = false;
  }
  return d;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLayerNorm: return "layernorm";
    case OpKind::kGelu: return "gelu";
    case OpKind::kEmbeddingGather: return "embedding_gather";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kDropout: return "dropout";
    case OpKind::kCrossEntropyLs: return "cross_entropy_ls";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kReshape: return "reshape";
    case OpKind::kPermute: return "permute";
    case OpKind::kGatherLast: return "gather_last";
    case OpKind::kSumLast: return "sum_last";
  }
  return "unknown";
}

Graph::Graph(Mode mode, std::uint64_t dropout_seed) : mode_(mode), dropout_seed_(dropout_seed) {
  nodes_.reserve(256);
}

const Tensor& Graph::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::value(Var v) const {
  if (v.id >= nodes_.size()) throw Error("graph: unknown node " + std::to_string(v.id));
  return val(v.id);
}

bool Graph::any_grad(std::initializer_list<Var> vars) const {
  for (Var v : vars) {
    if (nodes_[v.id].requires_grad) return true;
  }
  return false;
}

Var Graph::push(Node node, const char* op) {
  for (std::uint32_t in : node.inputs) {
    if (in >= nodes_.size()) throw Error(std::string(op) + ": input node out of range");
  }
  const Tensor& out = node.external ? *node.external : node.value;
  if (!out.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output of shape " + shape_string(out.shape));
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor t) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(t);
  return push(std::move(n), "constant");
}

Var Graph::parameter(const ParameterStore& store, std::size_t id) {
  Node n;
  n.kind = OpKind::kParameter;
  n.requires_grad = true;
  n.param_id = id;
  n.external = &store.at(id).value;
  n.value = Tensor(Shape{0});
  return push(std::move(n), "parameter");
}

Var Graph::matmul(Var a, Var b, bool transpose_b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const MatmulDims d = matmul_dims(ta.shape, tb.shape, transpose_b);
  const auto& kern = simd::kernels();

  Shape out_shape(ta.shape.begin(), ta.shape.end() - 1);
  out_shape.push_back(d.n);
  Node node;
  node.kind = OpKind::kMatmul;
  node.inputs = {a.id, b.id};
  node.requires_grad = any_grad({a, b});
  node.flag = transpose_b;
  node.value = Tensor(out_shape);

  std::vector<double> bt;
  for (std::size_t g = 0; g < d.batch; ++g) {
    const double* A = ta.data.data() + g * d.m * d.k;
    const double* B = tb.data.data() + (d.shared_b ? 0 : g * d.k * d.n);
    if (transpose_b && (g == 0 || !d.shared_b)) {
      bt.resize(d.k * d.n);
      transpose_into(B, d.n, d.k, bt.data());
    }
    const double* Bkn = transpose_b ? bt.data() : B;
    double* C = node.value.data.data() + g * d.m * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      for (std::size_t kk = 0; kk < d.k; ++kk) kern.axpy(A[i * d.k + kk], Bkn + kk * d.n, C + i * d.n, d.n);
    }
  }
  return push(std::move(node), "matmul");
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const std::size_t reps = suffix_repeats(ta.shape, tb.shape);
  if (reps == 0) shape_fail(OpKind::kAdd, shape_string(ta.shape) + " + " + shape_string(tb.shape));
  Node node;
  node.kind = OpKind::kAdd;
  node.inputs = {a.id, b.id};
  node.requires_grad = any_grad({a, b});
  node.value = Tensor(ta.shape);
  const std::size_t nb = tb.size();
  const auto& kern = simd::kernels();
  for (std::size_t r = 0; r < reps; ++r) {
    kern.add(ta.data.data() + r * nb, tb.data.data(), node.value.data.data() + r * nb, nb);
  }
  return push(std::move(node), "add");
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const std::size_t reps = suffix_repeats(ta.shape, tb.shape);
  if (reps == 0) shape_fail(OpKind::kMul, shape_string(ta.shape) + " * " + shape_string(tb.shape));
  Node node;
  node.kind = OpKind::kMul;
  node.inputs = {a.id, b.id};
  node.requires_grad = any_grad({a, b});
  node.value = Tensor(ta.shape);
  const std::size_t nb = tb.size();
  const auto& kern = simd::kernels();
  for (std::size_t r = 0; r < reps; ++r) {
    kern.mul(ta.data.data() + r * nb, tb.data.data(), node.value.data.data() + r * nb, nb);
  }
  return push(std::move(node), "mul");
}

Var Graph::scale(Var a, double factor) {
  const Tensor& ta = value(a);
  Node node;
  node.kind = OpKind::kScale;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.scalar = factor;
  node.value = Tensor(ta.shape);
  simd::kernels().scale(ta.data.data(), factor, node.value.data.data(), ta.size());
  return push(std::move(node), "scale");
}

Var Graph::softmax(Var a, std::size_t axis) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_at(ta.shape, axis);
  Node node;
  node.kind = OpKind::kSoftmax;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.axis = axis;
  node.value = Tensor(ta.shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = ta.data[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, ta.data[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(ta.data[base + e * s.inner] - mx);
        node.value.data[base + e * s.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) node.value.data[base + e * s.inner] /= z;
    }
  }
  return push(std::move(node), "softmax");
}

Var Graph::log_softmax(Var a, std::size_t axis) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_at(ta.shape, axis);
  Node node;
  node.kind = OpKind::kLogSoftmax;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.axis = axis;
  node.value = Tensor(ta.shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = ta.data[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, ta.data[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) z += std::exp(ta.data[base + e * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t e = 0; e < s.extent; ++e) {
        node.value.data[base + e * s.inner] = ta.data[base + e * s.inner] - lse;
      }
    }
  }
  return push(std::move(node), "log_softmax");
}

Var Graph::layernorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gamma);
  const Tensor& tbeta = value(beta);
  if (tx.rank() == 0) shape_fail(OpKind::kLayerNorm, "scalar input");
  const std::size_t d = tx.shape.back();
  if (tg.shape != Shape{d} || tbeta.shape != Shape{d}) {
    shape_fail(OpKind::kLayerNorm, "gamma/beta " + shape_string(tg.shape) + "/" + shape_string(tbeta.shape) +
                                       " for input " + shape_string(tx.shape));
  }
  const std::size_t rows = tx.size() / d;
  Node node;
  node.kind = OpKind::kLayerNorm;
  node.inputs = {x.id, gamma.id, beta.id};
  node.requires_grad = any_grad({x, gamma, beta});
  node.scalar = eps;
  node.value = Tensor(tx.shape);
  node.saved.resize(rows);
  node.saved2.resize(tx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = tx.data.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += in[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    node.saved[r] = rstd;
    double* xhat = node.saved2.data() + r * d;
    double* out = node.value.data.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      xhat[i] = (in[i] - mu) * rstd;
      out[i] = xhat[i] * tg.data[i] + tbeta.data[i];
    }
  }
  return push(std::move(node), "layernorm");
}

Var Graph::gelu(Var a) {
  const Tensor& ta = value(a);
  Node node;
  node.kind = OpKind::kGelu;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = Tensor(ta.shape);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const double x = ta.data[i];
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    node.value.data[i] = 0.5 * x * (1.0 + t);
  }
  return push(std::move(node), "gelu");
}

Var Graph::embedding_gather(Var table, std::span<const std::int64_t> ids, const Shape& index_shape) {
  const Tensor& tt = value(table);
  if (tt.rank() != 2) shape_fail(OpKind::kEmbeddingGather, "table must be rank 2, got " + shape_string(tt.shape));
  if (numel(index_shape) != ids.size()) {
    shape_fail(OpKind::kEmbeddingGather,
               "index shape " + shape_string(index_shape) + " vs " + std::to_string(ids.size()) + " ids");
  }
  const std::size_t vocab = tt.shape[0];
  const std::size_t d = tt.shape[1];
  Shape out_shape = index_shape;
  out_shape.push_back(d);
  Node node;
  node.kind = OpKind::kEmbeddingGather;
  node.inputs = {table.id};
  node.requires_grad = any_grad({table});
  node.ints.assign(ids.begin(), ids.end());
  node.value = Tensor(out_shape);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw DataError("embedding_gather: id " + std::to_string(ids[r]) + " outside table of " +
                      std::to_string(vocab) + " rows");
    }
    std::copy_n(tt.data.data() + ids[r] * d, d, node.value.data.data() + r * d);
  }
  return push(std::move(node), "embedding_gather");
}

Var Graph::concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_fail(OpKind::kConcat, "no inputs");
  const Shape& first = value(parts[0]).shape;
  if (axis >= first.size()) shape_fail(OpKind::kConcat, "axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  Node node;
  node.kind = OpKind::kConcat;
  node.axis = axis;
  for (Var p : parts) {
    const Shape& s = value(p).shape;
    if (s.size() != first.size()) shape_fail(OpKind::kConcat, shape_string(s) + " vs " + shape_string(first));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        shape_fail(OpKind::kConcat, shape_string(s) + " vs " + shape_string(first));
      }
    }
    out_shape[axis] += s[axis];
    node.inputs.push_back(p.id);
    node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
  }
  node.value = Tensor(out_shape);
  const AxisSplit so = split_at(out_shape, axis);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    const std::size_t block = tp.shape[axis] * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(tp.data.data() + o * block, block,
                  node.value.data.data() + o * so.extent * so.inner + offset * so.inner);
    }
    offset += tp.shape[axis];
  }
  return push(std::move(node), "concat");
}

Var Graph::slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_at(ta.shape, axis);
  if (begin > end || end > s.extent) {
    shape_fail(OpKind::kSlice, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                                   std::to_string(axis) + " of " + shape_string(ta.shape));
  }
  Shape out_shape = ta.shape;
  out_shape[axis] = end - begin;
  Node node;
  node.kind = OpKind::kSlice;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.axis = axis;
  node.begin = begin;
  node.value = Tensor(out_shape);
  const std::size_t block = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(ta.data.data() + o * s.extent * s.inner + begin * s.inner, block,
                node.value.data.data() + o * block);
  }
  return push(std::move(node), "slice");
}

Var Graph::dropout(Var a, double p) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout: probability must be in [0, 1)");
  const Tensor& ta = value(a);
  Node node;
  node.kind = OpKind::kDropout;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = ta;
  if (mode_ == Mode::kTrain && p > 0.0) {
    Rng rng(derive_seed(dropout_seed_, nodes_.size()));
    const double keep_scale = 1.0 / (1.0 - p);
    node.saved.resize(ta.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
      node.saved[i] = rng.uniform() < p ? 0.0 : keep_scale;
      node.value.data[i] *= node.saved[i];
    }
  }
  return push(std::move(node), "dropout");
}

Var Graph::cross_entropy_ls(Var logits, std::span<const std::int64_t> targets, double eps, bool sum_reduction) {
  const Tensor& tl = value(logits);
  if (tl.rank() == 0) shape_fail(OpKind::kCrossEntropyLs, "scalar logits");
  const std::size_t vocab = tl.shape.back();
  const std::size_t rows = tl.size() / vocab;
  if (targets.size() != rows) {
    shape_fail(OpKind::kCrossEntropyLs,
               std::to_string(targets.size()) + " targets for logits " + shape_string(tl.shape));
  }
  Node node;
  node.kind = OpKind::kCrossEntropyLs;
  node.inputs = {logits.id};
  node.requires_grad = any_grad({logits});
  node.scalar = eps;
  node.flag = sum_reduction;
  node.ints.assign(targets.begin(), targets.end());
  node.saved.assign(tl.size(), 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int64_t t = targets[r];
    if (t < 0) continue;
    if (static_cast<std::size_t>(t) >= vocab) {
      throw DataError("cross_entropy_ls: target " + std::to_string(t) + " outside vocab of " + std::to_string(vocab));
    }
    const double* x = tl.data.data() + r * vocab;
    double mx = x[0];
    double mean_x = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      mx = std::max(mx, x[v]);
      mean_x += x[v];
    }
    mean_x /= static_cast<double>(vocab);
    double z = 0.0;
    double* p = node.saved.data() + r * vocab;
    for (std::size_t v = 0; v < vocab; ++v) {
      p[v] = std::exp(x[v] - mx);
      z += p[v];
    }
    for (std::size_t v = 0; v < vocab; ++v) p[v] /= z;
    const double lse = mx + std::log(z);
    total += (1.0 - eps) * (lse - x[t]) + eps * (lse - mean_x);
    ++count;
  }
  node.begin = count;
  const double loss = sum_reduction || count == 0 ? total : total / static_cast<double>(count);
  node.value = Tensor::scalar(loss);
  return push(std::move(node), "cross_entropy_ls");
}

Var Graph::sum(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.data) s += v;
  Node node;
  node.kind = OpKind::kSum;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = Tensor::scalar(s);
  return push(std::move(node), "sum");
}

Var Graph::mean(Var a) {
  const Tensor& ta = value(a);
  if (ta.size() == 0) shape_fail(OpKind::kMean, "empty tensor");
  double s = 0.0;
  for (double v : ta.data) s += v;
  Node node;
  node.kind = OpKind::kMean;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = Tensor::scalar(s / static_cast<double>(ta.size()));
  return push(std::move(node), "mean");
}

Var Graph::reshape(Var a, Shape shape) {
  const Tensor& ta = value(a);
  if (numel(shape) != ta.size()) {
    shape_fail(OpKind::kReshape, shape_string(ta.shape) + " -> " + shape_string(shape));
  }
  Node node;
  node.kind = OpKind::kReshape;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = Tensor(std::move(shape), ta.data);
  return push(std::move(node), "reshape");
}

Var Graph::permute(Var a, std::span<const std::size_t> perm) {
  const Tensor& ta = value(a);
  const std::size_t rank = ta.rank();
  if (perm.size() != rank) shape_fail(OpKind::kPermute, "permutation rank mismatch for " + shape_string(ta.shape));
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (perm[i] >= rank || seen[perm[i]]) shape_fail(OpKind::kPermute, "invalid permutation");
    seen[perm[i]] = true;
    out_shape[i] = ta.shape[perm[i]];
  }
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * ta.shape[i];

  Node node;
  node.kind = OpKind::kPermute;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = Tensor(out_shape);
  // source offset of each output element; reused by backward
  node.ints.resize(ta.size());
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t out = 0; out < ta.size(); ++out) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += idx[i] * in_strides[perm[i]];
    node.ints[out] = static_cast<std::int64_t>(src);
    node.value.data[out] = ta.data[src];
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return push(std::move(node), "permute");
}

Var Graph::gather_last(Var a, std::span<const std::int64_t> ids) {
  const Tensor& ta = value(a);
  if (ta.rank() == 0) shape_fail(OpKind::kGatherLast, "scalar input");
  const std::size_t v = ta.shape.back();
  const std::size_t rows = ta.size() / v;
  if (ids.size() != rows) {
    shape_fail(OpKind::kGatherLast, std::to_string(ids.size()) + " ids for " + shape_string(ta.shape));
  }
  Shape out_shape(ta.shape.begin(), ta.shape.end() - 1);
  Node node;
  node.kind = OpKind::kGatherLast;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.ints.assign(ids.begin(), ids.end());
  node.value = Tensor(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    if (ids[r] < 0) continue;
    if (static_cast<std::size_t>(ids[r]) >= v) {
      throw DataError("gather_last: id " + std::to_string(ids[r]) + " outside last dim " + std::to_string(v));
    }
    node.value.data[r] = ta.data[r * v + ids[r]];
  }
  return push(std::move(node), "gather_last");
}

Var Graph::sum_last(Var a) {
  const Tensor& ta = value(a);
  if (ta.rank() == 0) shape_fail(OpKind::kSumLast, "scalar input");
  const std::size_t v = ta.shape.back();
  const std::size_t rows = ta.size() / v;
  Node node;
  node.kind = OpKind::kSumLast;
  node.inputs = {a.id};
  node.requires_grad = any_grad({a});
  node.value = Tensor(Shape(ta.shape.begin(), ta.shape.end() - 1));
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < v; ++i) s += ta.data[r * v + i];
    node.value.data[r] = s;
  }
  return push(std::move(node), "sum_last");
}

GradientMap Graph::backward(Var loss) const {
  if (loss.id >= nodes_.size()) throw Error("backward: unknown node");
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_string(value(loss).shape));
  }
  std::vector<Tensor> grads(nodes_.size(), Tensor(Shape{0}));
  grads[loss.id] = Tensor(value(loss).shape, 1.0);

  GradientMap out;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (grads[i].data.empty() || !nodes_[i].requires_grad) continue;
    const Node& n = nodes_[i];
    if (n.kind == OpKind::kParameter) {
      auto [it, inserted] = out.try_emplace(n.param_id, std::move(grads[i]));
      if (!inserted) simd::kernels().accumulate(grads[i].data.data(), it->second.data.data(), it->second.size());
      continue;
    }
    backward_node(i, grads);
    grads[i] = Tensor(Shape{0});
  }
  return out;
}

void Graph::backward_node(std::size_t index, std::vector<Tensor>& grads) const {
  const Node& n = nodes_[index];
  const Tensor& g = grads[index];
  const auto& kern = simd::kernels();

  auto grad_of = [&](std::uint32_t id) -> Tensor* {
    if (!nodes_[id].requires_grad) return nullptr;
    if (grads[id].data.empty()) grads[id] = Tensor(val(id).shape);
    return &grads[id];
  };

  switch (n.kind) {
    case OpKind::kConstant:
    case OpKind::kParameter:
      break;

    case OpKind::kMatmul: {
      const Tensor& ta = val(n.inputs[0]);
      const Tensor& tb = val(n.inputs[1]);
      const bool tr = n.flag;
      const MatmulDims d = matmul_dims(ta.shape, tb.shape, tr);
      Tensor* ga = grad_of(n.inputs[0]);
      Tensor* gb = grad_of(n.inputs[1]);
      std::vector<double> bnk;
      for (std::size_t b = 0; b < d.batch; ++b) {
        const double* A = ta.data.data() + b * d.m * d.k;
        const double* B = tb.data.data() + (d.shared_b ? 0 : b * d.k * d.n);
        const double* G = g.data.data() + b * d.m * d.n;
        if (ga) {
          // dA = dC . B^T, with B^T laid out [N, K]
          const double* Bt = B;
          if (!tr) {
            if (b == 0 || !d.shared_b) {
              bnk.resize(d.k * d.n);
              transpose_into(B, d.k, d.n, bnk.data());
            }
            Bt = bnk.data();
          }
          double* GA = ga->data.data() + b * d.m * d.k;
          for (std::size_t i = 0; i < d.m; ++i) {
            for (std::size_t j = 0; j < d.n; ++j) kern.axpy(G[i * d.n + j], Bt + j * d.k, GA + i * d.k, d.k);
          }
        }
        if (gb) {
          double* GB = gb->data.data() + (d.shared_b ? 0 : b * d.k * d.n);
          if (!tr) {
            for (std::size_t i = 0; i < d.m; ++i) {
              for (std::size_t kk = 0; kk < d.k; ++kk) kern.axpy(A[i * d.k + kk], G + i * d.n, GB + kk * d.n, d.n);
            }
          } else {
            for (std::size_t i = 0; i < d.m; ++i) {
              for (std::size_t j = 0; j < d.n; ++j) kern.axpy(G[i * d.n + j], A + i * d.k, GB + j * d.k, d.k);
            }
          }
        }
      }
      break;
    }

    case OpKind::kAdd: {
      if (Tensor* ga = grad_of(n.inputs[0])) kern.accumulate(g.data.data(), ga->data.data(), g.size());
      if (Tensor* gb = grad_of(n.inputs[1])) {
        const std::size_t nb = gb->size();
        for (std::size_t r = 0; r < g.size() / nb; ++r) kern.accumulate(g.data.data() + r * nb, gb->data.data(), nb);
      }
      break;
    }

    case OpKind::kMul: {
      const Tensor& ta = val(n.inputs[0]);
      const Tensor& tb = val(n.inputs[1]);
      const std::size_t nb = tb.size();
      const std::size_t reps = g.size() / nb;
      std::vector<double> tmp(nb);
      if (Tensor* ga = grad_of(n.inputs[0])) {
        for (std::size_t r = 0; r < reps; ++r) {
          kern.mul(g.data.data() + r * nb, tb.data.data(), tmp.data(), nb);
          kern.accumulate(tmp.data(), ga->data.data() + r * nb, nb);
        }
      }
      if (Tensor* gb = grad_of(n.inputs[1])) {
        for (std::size_t r = 0; r < reps; ++r) {
          kern.mul(g.data.data() + r * nb, ta.data.data() + r * nb, tmp.data(), nb);
          kern.accumulate(tmp.data(), gb->data.data(), nb);
        }
      }
      break;
    }

    case OpKind::kScale: {
      if (Tensor* ga = grad_of(n.inputs[0])) kern.axpy(n.scalar, g.data.data(), ga->data.data(), g.size());
      break;
    }

    case OpKind::kSoftmax: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const Tensor& y = n.value;
      const AxisSplit s = split_at(y.shape, n.axis);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          double dot = 0.0;
          for (std::size_t e = 0; e < s.extent; ++e) dot += g.data[base + e * s.inner] * y.data[base + e * s.inner];
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            ga->data[k] += y.data[k] * (g.data[k] - dot);
          }
        }
      }
      break;
    }

    case OpKind::kLogSoftmax: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const Tensor& y = n.value;
      const AxisSplit s = split_at(y.shape, n.axis);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          double gsum = 0.0;
          for (std::size_t e = 0; e < s.extent; ++e) gsum += g.data[base + e * s.inner];
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            ga->data[k] += g.data[k] - std::exp(y.data[k]) * gsum;
          }
        }
      }
      break;
    }

    case OpKind::kLayerNorm: {
      const Tensor& tg = val(n.inputs[1]);
      const std::size_t d = tg.size();
      const std::size_t rows = g.size() / d;
      Tensor* gx = grad_of(n.inputs[0]);
      Tensor* ggamma = grad_of(n.inputs[1]);
      Tensor* gbeta = grad_of(n.inputs[2]);
      std::vector<double> gxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* go = g.data.data() + r * d;
        const double* xhat = n.saved2.data() + r * d;
        if (ggamma) {
          for (std::size_t i = 0; i < d; ++i) ggamma->data[i] += go[i] * xhat[i];
        }
        if (gbeta) kern.accumulate(go, gbeta->data.data(), d);
        if (gx) {
          double m1 = 0.0;
          double m2 = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            gxhat[i] = go[i] * tg.data[i];
            m1 += gxhat[i];
            m2 += gxhat[i] * xhat[i];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          const double rstd = n.saved[r];
          double* out = gx->data.data() + r * d;
          for (std::size_t i = 0; i < d; ++i) out[i] += rstd * (gxhat[i] - m1 - xhat[i] * m2);
        }
      }
      break;
    }

    case OpKind::kGelu: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const Tensor& tx = val(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = tx.data[i];
        const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        ga->data[i] += g.data[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
      }
      break;
    }

    case OpKind::kEmbeddingGather: {
      Tensor* gt = grad_of(n.inputs[0]);
      if (!gt) break;
      const std::size_t d = gt->shape[1];
      for (std::size_t r = 0; r < n.ints.size(); ++r) {
        kern.accumulate(g.data.data() + r * d, gt->data.data() + n.ints[r] * d, d);
      }
      break;
    }

    case OpKind::kConcat: {
      const AxisSplit so = split_at(n.value.shape, n.axis);
      std::size_t offset = 0;
      for (std::uint32_t in : n.inputs) {
        const std::size_t ext = val(in).shape[n.axis];
        if (Tensor* gp = grad_of(in)) {
          const std::size_t block = ext * so.inner;
          for (std::size_t o = 0; o < so.outer; ++o) {
            kern.accumulate(g.data.data() + o * so.extent * so.inner + offset * so.inner,
                            gp->data.data() + o * block, block);
          }
        }
        offset += ext;
      }
      break;
    }

    case OpKind::kSlice: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const AxisSplit s = split_at(ga->shape, n.axis);
      const std::size_t len = n.value.shape[n.axis];
      const std::size_t block = len * s.inner;
      for (std::size_t o = 0; o < s.outer; ++o) {
        kern.accumulate(g.data.data() + o * block, ga->data.data() + o * s.extent * s.inner + n.begin * s.inner, block);
      }
      break;
    }

    case OpKind::kDropout: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      if (n.saved.empty()) {
        kern.accumulate(g.data.data(), ga->data.data(), g.size());
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) ga->data[i] += g.data[i] * n.saved[i];
      }
      break;
    }

    case OpKind::kCrossEntropyLs: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const std::size_t vocab = ga->shape.back();
      const double eps = n.scalar;
      const std::size_t count = n.begin;
      const double scale = (n.flag || count == 0 ? 1.0 : 1.0 / static_cast<double>(count)) * g.data[0];
      const double uniform = eps / static_cast<double>(vocab);
      for (std::size_t r = 0; r < n.ints.size(); ++r) {
        const std::int64_t t = n.ints[r];
        if (t < 0) continue;
        const double* p = n.saved.data() + r * vocab;
        double* out = ga->data.data() + r * vocab;
        for (std::size_t v = 0; v < vocab; ++v) out[v] += scale * (p[v] - uniform);
        out[t] -= scale * (1.0 - eps);
      }
      break;
    }

    case OpKind::kSum: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      for (double& v : ga->data) v += g.data[0];
      break;
    }

    case OpKind::kMean: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const double share = g.data[0] / static_cast<double>(ga->size());
      for (double& v : ga->data) v += share;
      break;
    }

    case OpKind::kReshape: {
      if (Tensor* ga = grad_of(n.inputs[0])) kern.accumulate(g.data.data(), ga->data.data(), g.size());
      break;
    }

    case OpKind::kPermute: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      for (std::size_t out = 0; out < g.size(); ++out) ga->data[n.ints[out]] += g.data[out];
      break;
    }

    case OpKind::kGatherLast: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const std::size_t v = ga->shape.back();
      for (std::size_t r = 0; r < n.ints.size(); ++r) {
        if (n.ints[r] >= 0) ga->data[r * v + n.ints[r]] += g.data[r];
      }
      break;
    }

    case OpKind::kSumLast: {
      Tensor* ga = grad_of(n.inputs[0]);
      if (!ga) break;
      const std::size_t v = ga->shape.back();
      for (std::size_t r = 0; r < g.size(); ++r) {
        for (std::size_t i = 0; i < v; ++i) ga->data[r * v + i] += g.data[r];
      }
      break;
    }
  }
}

}  // namespace rfmt
