#include "rfmt/models/embedder.h"

#include <cmath>
#include <set>

#include "rfmt/util/error.h"

namespace rfmt {

Embedder Embedder::oracle(const TaskSpec& spec) {
  Embedder e;
  e.kind_ = EmbedderKind::kOracle;
  std::set<std::string> lemmas;
  const auto table = spec.lemma_table();
  for (const auto& [word, lemma] : table) lemmas.insert(lemma);
  std::map<std::string, std::size_t> lemma_id;
  for (const std::string& l : lemmas) lemma_id.emplace(l, lemma_id.size());
  for (const auto& [word, lemma] : table) e.lemma_index_[word] = lemma_id.at(lemma);
  e.lemma_count_ = lemma_id.size();
  return e;
}

Embedder Embedder::trained(std::shared_ptr<const MaskedLm> mlm, Vocab vocab) {
  if (!mlm) throw DataError("trained embedder needs a masked LM");
  if (mlm->vocab_size() != vocab.size()) throw DataError("trained embedder: vocab size differs from the model");
  Embedder e;
  e.kind_ = EmbedderKind::kTrained;
  e.mlm_ = std::move(mlm);
  e.vocab_ = std::move(vocab);
  return e;
}

std::size_t Embedder::dim() const { return kind_ == EmbedderKind::kOracle ? lemma_count_ + 1 : mlm_->dims().d_model; }

Tensor Embedder::embed(const TokenSeq& tokens) const {
  const std::size_t n = tokens.size();
  const std::size_t d = dim();
  Tensor out(Shape{n, d});
  if (n == 0) return out;
  if (kind_ == EmbedderKind::kOracle) {
    for (std::size_t i = 0; i < n; ++i) {
      auto it = lemma_index_.find(tokens.tokens.at(i));
      out.data[i * d + (it == lemma_index_.end() ? lemma_count_ : it->second)] = 1.0;
    }
    return out;
  }
  std::vector<TokenId> ids;
  ids.reserve(n);
  for (const std::string& t : tokens.tokens) ids.push_back(vocab_.id(t));
  Graph g(Mode::kEval);
  const Tensor& h = g.value(mlm_->hidden(g, {ids}));  // [1, n + 2, d]
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = h.data.data() + (i + 1) * d;
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += src[k] * src[k];
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw NumericError("embedder: zero-norm hidden state");
    for (std::size_t k = 0; k < d; ++k) out.data[i * d + k] = src[k] / norm;
  }
  return out;
}

Tensor embed_tokens(const Embedder& embedder, const TokenSeq& tokens) { return embedder.embed(tokens); }

}  // namespace rfmt
