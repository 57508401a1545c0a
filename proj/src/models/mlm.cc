#include "rfmt/models/mlm.h"

#include <cmath>

#include "rfmt/models/nmt.h"
#include "rfmt/util/error.h"

namespace rfmt {
namespace {

std::vector<TokenId> frame_row(const std::vector<TokenId>& ids) { return with_eos(with_bos(ids)); }

}  // namespace

TransformerDims mlm_dims(TransformerDims base) {
  base.decoder_layers = 0;
  return base;
}

MaskedLm::MaskedLm(TransformerDims dims, std::size_t vocab_size, std::uint64_t seed)
    : dims_(mlm_dims(dims)), vocab_size_(vocab_size) {
  Rng rng(seed);
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(dims_.d_model));
  Tensor emb(Shape{vocab_size, dims_.d_model});
  for (double& v : emb.data) v = rng.normal() * emb_std;
  embedding_ = params_.add("embedding", std::move(emb));
  for (std::size_t l = 0; l < dims_.encoder_layers; ++l) {
    layers_.push_back(add_encoder_layer(params_, "enc." + std::to_string(l), dims_, rng));
  }
  final_norm_ = add_norm(params_, "enc.norm", dims_.d_model);
}

std::uint64_t MaskedLm::architecture_hash() const { return hash_architecture(kind(), dims_, vocab_size_, params_); }

Var MaskedLm::hidden(Graph& g, const std::vector<std::vector<TokenId>>& rows) const {
  std::vector<std::vector<TokenId>> framed;
  framed.reserve(rows.size());
  for (const auto& r : rows) {
    for (TokenId id : r) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
        throw DataError("mlm: token id " + std::to_string(id) + " outside vocabulary");
      }
    }
    framed.push_back(frame_row(r));
  }
  const TokenBatch batch = TokenBatch::pack(framed);
  Blocks b(g, params_, dims_);
  Var x = b.embed(embedding_, batch);
  Var mask = g.constant(key_padding_mask(batch, dims_.heads, batch.len));
  for (const EncoderLayerIds& layer : layers_) x = b.encoder_layer(layer, x, mask);
  return b.norm(final_norm_, x);
}

Var MaskedLm::logits(Graph& g, const std::vector<std::vector<TokenId>>& rows) const {
  return g.matmul(hidden(g, rows), g.parameter(params_, embedding_), /*transpose_b=*/true);
}

std::vector<double> mlm_position_logprobs(const MaskedLm& mlm, const std::vector<TokenId>& ids) {
  const std::size_t n = ids.size();
  if (n == 0) return {};
  std::vector<std::vector<TokenId>> rows(n, ids);
  for (std::size_t i = 0; i < n; ++i) rows[i][i] = kMask;
  Graph g(Mode::kEval);
  Var lp = g.log_softmax(mlm.logits(g, rows), 2);
  const Tensor& v = g.value(lp);
  const std::size_t t = v.shape[1];
  const std::size_t vocab = v.shape[2];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = v.data[(i * t + i + 1) * vocab + static_cast<std::size_t>(ids[i])];
  }
  return out;
}

double mlm_logprob_at(const MaskedLm& mlm, const TokenSeq& tokens, std::size_t position) {
  if (position >= tokens.size()) {
    throw DataError("mlm_logprob_at: position " + std::to_string(position) + " out of range for length " +
                    std::to_string(tokens.size()));
  }
  std::vector<TokenId> row = tokens.ids;
  row[position] = kMask;
  Graph g(Mode::kEval);
  Var lp = g.log_softmax(mlm.logits(g, {row}), 2);
  const Tensor& v = g.value(lp);
  return v.data[(position + 1) * v.shape[2] + static_cast<std::size_t>(tokens.ids[position])];
}

}  // namespace rfmt
