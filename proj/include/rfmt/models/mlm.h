#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfmt/models/layers.h"
#include "rfmt/tensor/graph.h"
#include "rfmt/tensor/parameter.h"
#include "rfmt/text/tokenize.h"

namespace rfmt {

// Bidirectional transformer encoder with a tied output layer. Every input row
// is framed as BOS + tokens + EOS, so token n sits at position n + 1.
class MaskedLm {
 public:
  MaskedLm(TransformerDims dims, std::size_t vocab_size, std::uint64_t seed);

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const TransformerDims& dims() const { return dims_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::string kind() const { return "mlm"; }
  std::uint64_t architecture_hash() const;

  // Final-layer states [B, T + 2, d] for framed rows.
  Var hidden(Graph& g, const std::vector<std::vector<TokenId>>& rows) const;
  // Output logits [B, T + 2, V].
  Var logits(Graph& g, const std::vector<std::vector<TokenId>>& rows) const;

 private:
  TransformerDims dims_;
  std::size_t vocab_size_;
  ParameterStore params_;
  std::size_t embedding_ = 0;
  std::vector<EncoderLayerIds> layers_;
  NormIds final_norm_;
};

// Encoder-only dims used for the masked LMs (no decoder stack).
TransformerDims mlm_dims(TransformerDims base = {});

// log P_mlm(y_n | y with position n masked). Throws DataError when `position`
// is out of range.
double mlm_logprob_at(const MaskedLm& mlm, const TokenSeq& tokens, std::size_t position);

// mlm_logprob_at for every position, computed as one batch of n copies with
// one mask each.
std::vector<double> mlm_position_logprobs(const MaskedLm& mlm, const std::vector<TokenId>& ids);

}  // namespace rfmt
