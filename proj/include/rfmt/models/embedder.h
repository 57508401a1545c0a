#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rfmt/corpus/task.h"
#include "rfmt/models/mlm.h"
#include "rfmt/tensor/tensor.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/text/vocab.h"

namespace rfmt {

enum class EmbedderKind { kOracle, kTrained };

// Contextual token vectors for BERTScore. Every emitted row has unit norm.
//
// oracle: one-hot per bilingual lemma of the task dictionary, so a source word
// and its translation get the same vector; unknown words share one UNK vector.
// trained: final-layer states of a bilingual masked LM, unit-normalized.
class Embedder {
 public:
  static Embedder oracle(const TaskSpec& spec);
  static Embedder trained(std::shared_ptr<const MaskedLm> mlm, Vocab vocab);

  EmbedderKind kind() const { return kind_; }
  std::size_t dim() const;

  // [tokens.size(), dim()]
  Tensor embed(const TokenSeq& tokens) const;

 private:
  EmbedderKind kind_ = EmbedderKind::kOracle;
  std::map<std::string, std::size_t> lemma_index_;
  std::size_t lemma_count_ = 0;  // the UNK vector takes index lemma_count_
  std::shared_ptr<const MaskedLm> mlm_;
  Vocab vocab_;
};

Tensor embed_tokens(const Embedder& embedder, const TokenSeq& tokens);

}  // namespace rfmt
