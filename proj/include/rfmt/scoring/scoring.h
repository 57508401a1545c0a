#pragma once

// Reference-free scoring: MLM fluency, BERTScore adequacy against the raw and
// the corrected source, and their weighted composite. Everything here is a
// plain number: nothing touches a gradient tape.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfmt/models/embedder.h"
#include "rfmt/models/mlm.h"
#include "rfmt/noise/gec.h"
#include "rfmt/tensor/tensor.h"
#include "rfmt/text/tokenize.h"

namespace rfmt {

struct ScoreWeights {
  double alpha = 0.15;  // fluency (MLM) weight
  double beta = 0.85;   // adequacy (BERTScore) weight
  bool mlm_normalize = true;  // per-token mean instead of the sum

  // Throws DataError for negative weights. alpha == beta == 0 is a zero risk.
  void validate() const;
};

struct BertScoreTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RiskScore {
  double l_mlm = 0.0;
  double l_bert = 0.0;
  double composite = 0.0;

  nlohmann::json to_json() const;
};

// Sum of mlm_logprob_at over all positions, divided by the length when
// `normalize`. Throws DataError on an empty sequence.
double mlm_score(const MaskedLm& mlm, const TokenSeq& y, bool normalize);

// Rows of x and y are unit vectors ([n, d] and [m, d]). Recall averages, over
// x, the best dot product with any y row; precision the reverse. Throws
// DataError for empty inputs, mismatched widths, or a row norm off by > 1e-4.
BertScoreTriple bertscore(const Tensor& x, const Tensor& y);

double f1_from(double precision, double recall);

// 1 - max(F(x, y_hat), F(gec(x), y_hat)) given the two F values.
double bert_loss_from(double f_raw, double f_corrected);

// Inputs are expected to be question-normalized already.
double bert_loss(const TokenSeq& x, const TokenSeq& y_hat, const Embedder& embedder, const Corrector& gec,
                 const Vocab& vocab);

double composite_from(double l_mlm, double l_bert, const ScoreWeights& w);

RiskScore composite_risk(const TokenSeq& x, const TokenSeq& y_hat, const MaskedLm& mlm, const Embedder& embedder,
                         const Corrector& gec, const Vocab& vocab, const ScoreWeights& w);

// Scores many candidates of one source while embedding the source sides once.
// MLM scores are memoized by candidate text (the scorer models are frozen).
class RiskScorer {
 public:
  RiskScorer(const MaskedLm& mlm, const Embedder& embedder, Corrector gec, const Vocab& vocab, ScoreWeights w);

  // `source` and `candidates` are raw text; both get normalize_question.
  // Results follow candidate order whatever `threads` is.
  std::vector<RiskScore> score(const std::string& source, const std::vector<std::string>& candidates,
                               std::size_t threads = 1);

  double l_mlm(const TokenSeq& y);
  const ScoreWeights& weights() const { return w_; }
  void set_weights(const ScoreWeights& w);

 private:
  const MaskedLm& mlm_;
  const Embedder& embedder_;
  Corrector gec_;
  const Vocab& vocab_;
  ScoreWeights w_;
  std::map<std::string, double> mlm_cache_;  // normalized candidate -> raw MLM sum
};

}  // namespace rfmt
