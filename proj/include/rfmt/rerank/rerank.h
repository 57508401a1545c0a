#pragma once

#include <cstddef>
#include <vector>

#include "rfmt/models/beam.h"
#include "rfmt/models/mlm.h"
#include "rfmt/models/nmt.h"

namespace rfmt {

struct RerankChoice {
  std::vector<Candidate> candidates;
  std::vector<double> scores;
  std::size_t chosen_index = 0;

  const Candidate& chosen() const { return candidates.at(chosen_index); }
};

// Highest score wins; ties go to the higher translation log-probability,
// then to the lower index.
std::size_t pick_best(const std::vector<double>& scores, const std::vector<Candidate>& candidates);

// Decodes `beam` candidates and picks the best question-normalized MLM score.
RerankChoice rerank(const NmtModel& model, const MaskedLm& mlm, const Vocab& vocab, const TokenSeq& src,
                    std::size_t beam, bool mlm_normalize = true, std::size_t max_len = 0);

}  // namespace rfmt
