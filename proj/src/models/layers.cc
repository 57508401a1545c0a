#include "rfmt/models/layers.h"

#include <cmath>
#include <sstream>

#include "rfmt/util/error.h"

namespace rfmt {
namespace {

constexpr double kBlocked = -1e9;
constexpr std::size_t kNoBias = static_cast<std::size_t>(-1);

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal() * stddev;
  return t;
}

}  // namespace

std::string TransformerDims::describe() const {
  std::ostringstream s;
  s << "d" << d_model << "-h" << heads << "-ff" << d_ff << "-enc" << encoder_layers << "-dec" << decoder_layers;
  return s.str();
}

LinearIds add_linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias,
                     Rng& rng) {
  LinearIds ids;
  // Xavier-uniform scale expressed as a normal
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  ids.weight = store.add(name + ".w", normal_tensor({in, out}, stddev, rng));
  if (bias) ids.bias = store.add(name + ".b", Tensor(Shape{out}));
  return ids;
}

NormIds add_norm(ParameterStore& store, const std::string& name, std::size_t d) {
  return NormIds{store.add(name + ".g", Tensor(Shape{d}, 1.0)), store.add(name + ".b", Tensor(Shape{d}))};
}

AttentionIds add_attention(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng) {
  AttentionIds ids;
  ids.q = add_linear(store, name + ".q", d, d, true, rng);
  // A key bias only shifts every score of a query by the same amount, which
  // softmax ignores; leaving it out keeps its gradient from being pure noise.
  ids.k = add_linear(store, name + ".k", d, d, false, rng);
  ids.v = add_linear(store, name + ".v", d, d, true, rng);
  ids.o = add_linear(store, name + ".o", d, d, true, rng);
  return ids;
}

FeedForwardIds add_feed_forward(ParameterStore& store, const std::string& name, std::size_t d, std::size_t ff,
                                Rng& rng) {
  return FeedForwardIds{add_linear(store, name + ".in", d, ff, true, rng),
                        add_linear(store, name + ".out", ff, d, true, rng)};
}

EncoderLayerIds add_encoder_layer(ParameterStore& store, const std::string& name, const TransformerDims& dims,
                                  Rng& rng) {
  EncoderLayerIds ids;
  ids.norm_attn = add_norm(store, name + ".norm_attn", dims.d_model);
  ids.attn = add_attention(store, name + ".attn", dims.d_model, rng);
  ids.norm_ff = add_norm(store, name + ".norm_ff", dims.d_model);
  ids.ff = add_feed_forward(store, name + ".ff", dims.d_model, dims.d_ff, rng);
  return ids;
}

DecoderLayerIds add_decoder_layer(ParameterStore& store, const std::string& name, const TransformerDims& dims,
                                  Rng& rng) {
  DecoderLayerIds ids;
  ids.norm_self = add_norm(store, name + ".norm_self", dims.d_model);
  ids.self_attn = add_attention(store, name + ".self_attn", dims.d_model, rng);
  ids.norm_cross = add_norm(store, name + ".norm_cross", dims.d_model);
  ids.cross_attn = add_attention(store, name + ".cross_attn", dims.d_model, rng);
  ids.norm_ff = add_norm(store, name + ".norm_ff", dims.d_model);
  ids.ff = add_feed_forward(store, name + ".ff", dims.d_model, dims.d_ff, rng);
  return ids;
}

TokenBatch TokenBatch::pack(const std::vector<std::vector<TokenId>>& seqs) {
  TokenBatch b;
  b.rows = seqs.size();
  for (const auto& s : seqs) b.len = std::max(b.len, s.size());
  b.ids.assign(b.rows * b.len, kPad);
  for (std::size_t r = 0; r < b.rows; ++r) {
    for (std::size_t t = 0; t < seqs[r].size(); ++t) b.ids[r * b.len + t] = seqs[r][t];
  }
  return b;
}

Tensor key_padding_mask(const TokenBatch& keys, std::size_t heads, std::size_t q_len) {
  Tensor m(Shape{keys.rows, heads, q_len, keys.len});
  for (std::size_t r = 0; r < keys.rows; ++r) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t q = 0; q < q_len; ++q) {
        double* row = m.data.data() + ((r * heads + h) * q_len + q) * keys.len;
        for (std::size_t k = 0; k < keys.len; ++k) row[k] = keys.is_pad(r, k) ? kBlocked : 0.0;
      }
    }
  }
  return m;
}

Tensor causal_mask(std::size_t rows, std::size_t heads, std::size_t len) {
  Tensor m(Shape{rows, heads, len, len});
  for (std::size_t b = 0; b < rows * heads; ++b) {
    for (std::size_t q = 0; q < len; ++q) {
      double* row = m.data.data() + (b * len + q) * len;
      for (std::size_t k = q + 1; k < len; ++k) row[k] = kBlocked;
    }
  }
  return m;
}

Tensor sinusoidal_positions(std::size_t len, std::size_t d) {
  Tensor p(Shape{len, d});
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      p.data[pos * d + i] = std::sin(angle);
      if (i + 1 < d) p.data[pos * d + i + 1] = std::cos(angle);
    }
  }
  return p;
}

Var Blocks::linear(const LinearIds& ids, Var x) {
  Var y = g_.matmul(x, g_.parameter(store_, ids.weight));
  if (ids.bias != kNoBias) y = g_.add(y, g_.parameter(store_, ids.bias));
  return y;
}

Var Blocks::norm(const NormIds& ids, Var x) {
  return g_.layernorm(x, g_.parameter(store_, ids.gamma), g_.parameter(store_, ids.beta));
}

Var Blocks::dropout(Var x) {
  if (g_.mode() != Mode::kTrain || dims_.dropout <= 0.0) return x;
  return g_.dropout(x, dims_.dropout);
}

Var Blocks::split_heads(Var x, std::size_t rows, std::size_t len) {
  const std::size_t dh = dims_.d_model / dims_.heads;
  static constexpr std::size_t kPerm[] = {0, 2, 1, 3};
  return g_.permute(g_.reshape(x, {rows, len, dims_.heads, dh}), kPerm);
}

Var Blocks::merge_heads(Var x, std::size_t rows, std::size_t len) {
  static constexpr std::size_t kPerm[] = {0, 2, 1, 3};
  return g_.reshape(g_.permute(x, kPerm), {rows, len, dims_.d_model});
}

Var Blocks::attention(const AttentionIds& ids, Var q_in, Var kv_in, Var mask) {
  const Shape& qs = g_.value(q_in).shape;
  const Shape& ks = g_.value(kv_in).shape;
  if (dims_.d_model % dims_.heads != 0) throw ShapeError("attention: d_model not divisible by heads");
  const std::size_t rows = qs[0];
  const std::size_t tq = qs[1];
  const std::size_t tk = ks[1];
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dims_.d_model / dims_.heads));

  Var q = split_heads(linear(ids.q, q_in), rows, tq);
  Var k = split_heads(linear(ids.k, kv_in), rows, tk);
  Var v = split_heads(linear(ids.v, kv_in), rows, tk);
  Var scores = g_.add(g_.scale(g_.matmul(q, k, /*transpose_b=*/true), inv_sqrt), mask);
  Var weights = dropout(g_.softmax(scores, 3));
  Var ctx = merge_heads(g_.matmul(weights, v), rows, tq);
  return linear(ids.o, ctx);
}

Var Blocks::feed_forward(const FeedForwardIds& ids, Var x) {
  return linear(ids.out, dropout(g_.gelu(linear(ids.in, x))));
}

Var Blocks::encoder_layer(const EncoderLayerIds& ids, Var x, Var mask) {
  Var h = norm(ids.norm_attn, x);
  x = g_.add(x, dropout(attention(ids.attn, h, h, mask)));
  return g_.add(x, dropout(feed_forward(ids.ff, norm(ids.norm_ff, x))));
}

Var Blocks::decoder_layer(const DecoderLayerIds& ids, Var x, Var memory, Var self_mask, Var cross_mask) {
  Var h = norm(ids.norm_self, x);
  x = g_.add(x, dropout(attention(ids.self_attn, h, h, self_mask)));
  x = g_.add(x, dropout(attention(ids.cross_attn, norm(ids.norm_cross, x), memory, cross_mask)));
  return g_.add(x, dropout(feed_forward(ids.ff, norm(ids.norm_ff, x))));
}

Var Blocks::embed(std::size_t table, const TokenBatch& batch) {
  Var e = g_.embedding_gather(g_.parameter(store_, table), batch.ids, {batch.rows, batch.len});
  e = g_.scale(e, std::sqrt(static_cast<double>(dims_.d_model)));
  e = g_.add(e, g_.constant(sinusoidal_positions(batch.len, dims_.d_model)));
  return dropout(e);
}

}  // namespace rfmt
