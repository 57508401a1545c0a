#pragma once

// Pre-norm transformer building blocks over a ParameterStore.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rfmt/tensor/graph.h"
#include "rfmt/tensor/parameter.h"
#include "rfmt/text/vocab.h"
#include "rfmt/util/rng.h"

namespace rfmt {

struct TransformerDims {
  std::size_t d_model = 64;
  std::size_t heads = 2;
  std::size_t d_ff = 128;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  double dropout = 0.2;

  std::string describe() const;
};

struct LinearIds {
  std::size_t weight = 0;                      // [in, out]
  std::size_t bias = static_cast<std::size_t>(-1);  // [out], absent for key projections
};

struct NormIds {
  std::size_t gamma = 0;
  std::size_t beta = 0;
};

struct AttentionIds {
  LinearIds q, k, v, o;
};

struct FeedForwardIds {
  LinearIds in, out;
};

struct EncoderLayerIds {
  NormIds norm_attn, norm_ff;
  AttentionIds attn;
  FeedForwardIds ff;
};

struct DecoderLayerIds {
  NormIds norm_self, norm_cross, norm_ff;
  AttentionIds self_attn, cross_attn;
  FeedForwardIds ff;
};

// Registers parameters with initial values drawn from `rng`.
LinearIds add_linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
                     Rng& rng);
NormIds add_norm(ParameterStore& store, const std::string& name, std::size_t d);
AttentionIds add_attention(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng);
FeedForwardIds add_feed_forward(ParameterStore& store, const std::string& name, std::size_t d, std::size_t ff,
                                Rng& rng);
EncoderLayerIds add_encoder_layer(ParameterStore& store, const std::string& name, const TransformerDims& dims,
                                  Rng& rng);
DecoderLayerIds add_decoder_layer(ParameterStore& store, const std::string& name, const TransformerDims& dims,
                                  Rng& rng);

// Padded token batch, row-major [rows, len].
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t len = 0;
  std::vector<std::int64_t> ids;

  static TokenBatch pack(const std::vector<std::vector<TokenId>>& seqs);
  bool is_pad(std::size_t row, std::size_t pos) const { return ids[row * len + pos] == kPad; }
};

// Additive attention masks [rows, heads, q_len, k_len] with -1e9 on blocked keys.
Tensor key_padding_mask(const TokenBatch& keys, std::size_t heads, std::size_t q_len);
Tensor causal_mask(std::size_t rows, std::size_t heads, std::size_t len);

Tensor sinusoidal_positions(std::size_t len, std::size_t d);

class Blocks {
 public:
  Blocks(Graph& g, const ParameterStore& store, const TransformerDims& dims) : g_(g), store_(store), dims_(dims) {}

  Var linear(const LinearIds& ids, Var x);
  Var norm(const NormIds& ids, Var x);
  Var dropout(Var x);
  // q_in: [B, Tq, d]; kv_in: [B, Tk, d]; mask: [B, H, Tq, Tk] constant.
  Var attention(const AttentionIds& ids, Var q_in, Var kv_in, Var mask);
  Var feed_forward(const FeedForwardIds& ids, Var x);
  Var encoder_layer(const EncoderLayerIds& ids, Var x, Var mask);
  Var decoder_layer(const DecoderLayerIds& ids, Var x, Var memory, Var self_mask, Var cross_mask);
  // Scaled token embeddings plus sinusoidal positions: [B, T, d].
  Var embed(std::size_t table, const TokenBatch& batch);

  Graph& graph() { return g_; }

 private:
  Var split_heads(Var x, std::size_t rows, std::size_t len);
  Var merge_heads(Var x, std::size_t rows, std::size_t len);

  Graph& g_;
  const ParameterStore& store_;
  const TransformerDims& dims_;
};

}  // namespace rfmt
