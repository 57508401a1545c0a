#include "rfmt/models/nmt.h"

#include <cmath>

#include "rfmt/util/error.h"
#include "rfmt/util/io.h"

namespace rfmt {
namespace {

void check_ids(const std::vector<TokenId>& ids, std::size_t vocab, const char* what) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DataError(std::string(what) + ": token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(vocab));
    }
  }
}

}  // namespace

std::vector<TokenId> with_bos(const std::vector<TokenId>& ids) {
  std::vector<TokenId> out;
  out.reserve(ids.size() + 1);
  out.push_back(kBos);
  out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

std::vector<TokenId> with_eos(const std::vector<TokenId>& ids) {
  std::vector<TokenId> out = ids;
  out.push_back(kEos);
  return out;
}

std::uint64_t hash_architecture(const std::string& kind, const TransformerDims& dims, std::size_t vocab,
                                const ParameterStore& store) {
  std::string desc = kind + "|" + dims.describe() + "|v" + std::to_string(vocab);
  for (std::size_t i = 0; i < store.size(); ++i) {
    desc += "|" + store.at(i).name + shape_string(store.at(i).value.shape);
  }
  return std::stoull(content_hash(desc), nullptr, 16);
}

NmtModel::NmtModel(TransformerDims dims, std::size_t vocab_size, std::uint64_t seed)
    : dims_(dims), vocab_size_(vocab_size) {
  Rng rng(seed);
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(dims_.d_model));
  Tensor emb(Shape{vocab_size, dims_.d_model});
  for (double& v : emb.data) v = rng.normal() * emb_std;
  embedding_ = params_.add("embedding", std::move(emb));
  for (std::size_t l = 0; l < dims_.encoder_layers; ++l) {
    encoder_.push_back(add_encoder_layer(params_, "enc." + std::to_string(l), dims_, rng));
  }
  encoder_norm_ = add_norm(params_, "enc.norm", dims_.d_model);
  for (std::size_t l = 0; l < dims_.decoder_layers; ++l) {
    decoder_.push_back(add_decoder_layer(params_, "dec." + std::to_string(l), dims_, rng));
  }
  decoder_norm_ = add_norm(params_, "dec.norm", dims_.d_model);
}

std::uint64_t NmtModel::architecture_hash() const { return hash_architecture(kind(), dims_, vocab_size_, params_); }

Var NmtModel::encode(Graph& g, const TokenBatch& src) const {
  Blocks b(g, params_, dims_);
  Var x = b.embed(embedding_, src);
  Var mask = g.constant(key_padding_mask(src, dims_.heads, src.len));
  for (const EncoderLayerIds& layer : encoder_) x = b.encoder_layer(layer, x, mask);
  return b.norm(encoder_norm_, x);
}

Var NmtModel::decode(Graph& g, Var memory, const TokenBatch& src, const TokenBatch& tgt_in, bool last_only) const {
  Blocks b(g, params_, dims_);
  Var x = b.embed(embedding_, tgt_in);
  Var self_mask = g.constant(causal_mask(tgt_in.rows, dims_.heads, tgt_in.len));
  Var cross_mask = g.constant(key_padding_mask(src, dims_.heads, tgt_in.len));
  for (const DecoderLayerIds& layer : decoder_) x = b.decoder_layer(layer, x, memory, self_mask, cross_mask);
  if (last_only) x = g.slice(x, 1, tgt_in.len - 1, tgt_in.len);
  x = b.norm(decoder_norm_, x);
  return g.matmul(x, g.parameter(params_, embedding_), /*transpose_b=*/true);
}

Var NmtModel::forward(Graph& g, const std::vector<std::vector<TokenId>>& src,
                      const std::vector<std::vector<TokenId>>& tgt) const {
  if (src.size() != tgt.size()) throw DataError("nmt forward: source/target batch sizes differ");
  std::vector<std::vector<TokenId>> src_in;
  std::vector<std::vector<TokenId>> tgt_in;
  src_in.reserve(src.size());
  tgt_in.reserve(tgt.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    check_ids(src[i], vocab_size_, "nmt source");
    check_ids(tgt[i], vocab_size_, "nmt target");
    src_in.push_back(with_eos(src[i]));
    tgt_in.push_back(with_bos(tgt[i]));
  }
  const TokenBatch sb = TokenBatch::pack(src_in);
  const TokenBatch tb = TokenBatch::pack(tgt_in);
  Var memory = encode(g, sb);
  return decode(g, memory, sb, tb);
}

Var NmtModel::sequence_logprobs(Graph& g, const std::vector<std::vector<TokenId>>& src,
                                const std::vector<std::vector<TokenId>>& tgt, const std::vector<bool>& no_eos) const {
  Var logits = forward(g, src, tgt);
  const Shape& s = g.value(logits).shape;  // [B, T, V], T = max |tgt| + 1
  std::vector<std::int64_t> targets(s[0] * s[1], -1);
  for (std::size_t r = 0; r < tgt.size(); ++r) {
    for (std::size_t t = 0; t < tgt[r].size(); ++t) targets[r * s[1] + t] = tgt[r][t];
    const bool eos = no_eos.empty() || !no_eos[r];
    if (eos) targets[r * s[1] + tgt[r].size()] = kEos;
  }
  return g.gather_last(g.log_softmax(logits, 2), targets);
}

std::vector<double> score_sequence(const NmtModel& model, const TokenSeq& src, const TokenSeq& tgt) {
  if (tgt.empty()) throw DataError("score_sequence: empty target");
  Graph g(Mode::kEval);
  Var lp = model.sequence_logprobs(g, {src.ids}, {tgt.ids});
  const Tensor& v = g.value(lp);
  return std::vector<double>(v.data.begin(), v.data.begin() + static_cast<std::ptrdiff_t>(tgt.size() + 1));
}

}  // namespace rfmt
