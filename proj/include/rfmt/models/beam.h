#pragma once

#include <cstddef>
#include <vector>

#include "rfmt/models/nmt.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/text/vocab.h"

namespace rfmt {

struct Candidate {
  TokenSeq tokens;  // without BOS/EOS
  double total_logprob = 0.0;
  // One entry per token, plus a final EOS entry when finished.
  std::vector<double> token_logprobs;
  bool finished = true;
};

struct BeamOptions {
  std::size_t beam = 5;
  // 0 = 2 * |src| + 10
  std::size_t max_len = 0;
  // Rank by per-token mean instead of total log-probability.
  bool length_normalize = false;
};

// Up to `beam` distinct finished candidates, best first. Ties between equal
// scores go to the lower parent rank, then the lower token id. If nothing
// finishes within max_len, returns the single best unfinished hypothesis with
// finished == false. beam == 1 is greedy decoding.
std::vector<Candidate> beam_search(const NmtModel& model, const Vocab& vocab, const TokenSeq& src,
                                   const BeamOptions& options);

Candidate greedy_decode(const NmtModel& model, const Vocab& vocab, const TokenSeq& src, std::size_t max_len = 0);

}  // namespace rfmt
