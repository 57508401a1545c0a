#pragma once

// Eager reverse-mode autodiff over Tensor values.
//
// Every op computes its forward value immediately and appends one node to the
// tape. Inputs of node i always have ids < i; backward walks the tape in strict
// reverse order. A graph is single-threaded; distinct graphs share nothing
// mutable (parameters are read through const pointers).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "rfmt/tensor/parameter.h"
#include "rfmt/tensor/tensor.h"

namespace rfmt {

enum class Mode { kTrain, kEval };

enum class OpKind : std::uint8_t {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kMul,
  kScale,
  kSoftmax,
  kLogSoftmax,
  kLayerNorm,
  kGelu,
  kEmbeddingGather,
  kConcat,
  kSlice,
  kDropout,
  kCrossEntropyLs,
  kSum,
  kMean,
  kReshape,
  kPermute,
  kGatherLast,
  kSumLast,
};

std::string_view op_name(OpKind kind);

struct Var {
  std::uint32_t id = 0;
};

class Graph {
 public:
  explicit Graph(Mode mode = Mode::kEval, std::uint64_t dropout_seed = 0);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Mode mode() const { return mode_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor t);
  // The parameter must outlive the graph.
  Var parameter(const ParameterStore& store, std::size_t id);

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // a: [..., M, K]; b: [K, N] shared across the batch, or [..., K, N] with the
  // same leading dims. With transpose_b, b is given as [N, K] / [..., N, K].
  Var matmul(Var a, Var b, bool transpose_b = false);
  // b must equal a's shape or a suffix of it (broadcast over leading dims).
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var softmax(Var a, std::size_t axis);
  Var log_softmax(Var a, std::size_t axis);
  // Normalizes over the last axis; gamma and beta have shape [last dim].
  Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
  // tanh approximation
  Var gelu(Var a);
  // table: [V, D]; result shape = index_shape + [D].
  Var embedding_gather(Var table, std::span<const std::int64_t> ids, const Shape& index_shape);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
  // Identity in eval mode or for p == 0. The mask is a pure function of
  // (graph seed, node index), so reruns are bit-identical.
  Var dropout(Var a, double p);
  // logits: [..., V] flattened to [N, V]; targets has N entries, -1 = ignore.
  // Per token: (1 - eps) * NLL + eps * mean_v(-log p_v). Returns the mean over
  // non-ignored tokens, or the sum when `sum_reduction` is set.
  Var cross_entropy_ls(Var logits, std::span<const std::int64_t> targets, double eps,
                       bool sum_reduction = false);
  Var sum(Var a);
  Var mean(Var a);
  Var reshape(Var a, Shape shape);
  Var permute(Var a, std::span<const std::size_t> perm);
  // a: [..., V]; picks a[r, ids[r]] for each leading row r, 0 where ids[r] == -1.
  Var gather_last(Var a, std::span<const std::int64_t> ids);
  // Sum over the last axis.
  Var sum_last(Var a);

  // Gradients of a scalar node with respect to every parameter leaf reached.
  // Does not mutate the graph: repeated calls return identical maps.
  GradientMap backward(Var loss) const;

 private:
  struct Node {
    OpKind kind = OpKind::kConstant;
    bool requires_grad = false;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    const Tensor* external = nullptr;  // parameter value, not copied
    std::size_t param_id = 0;
    std::size_t axis = 0;
    std::size_t begin = 0;
    double scalar = 0.0;
    bool flag = false;
    std::vector<std::int64_t> ints;
    std::vector<double> saved;
    std::vector<double> saved2;
  };

  Var push(Node node, const char* op);
  const Tensor& val(std::uint32_t id) const;
  bool any_grad(std::initializer_list<Var> vars) const;

  void backward_node(std::size_t index, std::vector<Tensor>& grads) const;

  Mode mode_;
  std::uint64_t dropout_seed_;
  std::vector<Node> nodes_;
};

}  // namespace rfmt
