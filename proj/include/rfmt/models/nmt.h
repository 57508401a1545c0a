#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfmt/models/layers.h"
#include "rfmt/tensor/graph.h"
#include "rfmt/tensor/parameter.h"
#include "rfmt/text/tokenize.h"

namespace rfmt {

// Transformer encoder-decoder over one shared vocabulary. Output logits are
// tied to the input embedding table.
class NmtModel {
 public:
  NmtModel(TransformerDims dims, std::size_t vocab_size, std::uint64_t seed);

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const TransformerDims& dims() const { return dims_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::string kind() const { return "nmt"; }
  std::uint64_t architecture_hash() const;

  // Encoder states [B, Ts, d].
  Var encode(Graph& g, const TokenBatch& src) const;
  // Decoder logits [B, Tt, V] for inputs `tgt_in` (BOS-prefixed) attending to
  // `memory`. With last_only, only the final position's logits: [B, 1, V].
  Var decode(Graph& g, Var memory, const TokenBatch& src, const TokenBatch& tgt_in, bool last_only = false) const;

  // Teacher-forced logits for (src, BOS + tgt) pairs.
  Var forward(Graph& g, const std::vector<std::vector<TokenId>>& src,
              const std::vector<std::vector<TokenId>>& tgt) const;

  // Per-target-token log-probabilities [B, Tt] of tgt + EOS (EOS omitted for
  // rows in `no_eos`); padding positions are 0. Differentiable.
  Var sequence_logprobs(Graph& g, const std::vector<std::vector<TokenId>>& src,
                        const std::vector<std::vector<TokenId>>& tgt, const std::vector<bool>& no_eos = {}) const;

 private:
  TransformerDims dims_;
  std::size_t vocab_size_;
  ParameterStore params_;
  std::size_t embedding_ = 0;
  std::vector<EncoderLayerIds> encoder_;
  std::vector<DecoderLayerIds> decoder_;
  NormIds encoder_norm_;
  NormIds decoder_norm_;
};

// log P(y_n | x, y_<n) for every position of tgt followed by EOS, in eval mode.
// Throws DataError for ids outside the vocabulary or an empty target.
std::vector<double> score_sequence(const NmtModel& model, const TokenSeq& src, const TokenSeq& tgt);

// BOS + ids (decoder input).
std::vector<TokenId> with_bos(const std::vector<TokenId>& ids);
// ids + EOS (encoder input; every source is EOS-terminated).
std::vector<TokenId> with_eos(const std::vector<TokenId>& ids);

std::uint64_t hash_architecture(const std::string& kind, const TransformerDims& dims, std::size_t vocab,
                                const ParameterStore& store);

}  // namespace rfmt
