#include "rfmt/rerank/rerank.h"

#include "rfmt/scoring/scoring.h"
#include "rfmt/util/error.h"

namespace rfmt {

std::size_t pick_best(const std::vector<double>& scores, const std::vector<Candidate>& candidates) {
  if (scores.empty() || scores.size() != candidates.size()) throw DataError("rerank: score/candidate count mismatch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] && candidates[i].total_logprob > candidates[best].total_logprob)) {
      best = i;
    }
  }
  return best;
}

RerankChoice rerank(const NmtModel& model, const MaskedLm& mlm, const Vocab& vocab, const TokenSeq& src,
                    std::size_t beam, bool mlm_normalize, std::size_t max_len) {
  RerankChoice choice;
  choice.candidates = beam_search(model, vocab, src, BeamOptions{beam, max_len, false});
  for (const Candidate& c : choice.candidates) {
    choice.scores.push_back(mlm_score(mlm, tokenize(normalize_question(c.tokens.text()), vocab), mlm_normalize));
  }
  choice.chosen_index = pick_best(choice.scores, choice.candidates);
  return choice;
}

}  // namespace rfmt
