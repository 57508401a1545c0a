#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfmt/models/beam.h"
#include "rfmt/models/mlm.h"
#include "rfmt/models/nmt.h"
#include "rfmt/scoring/scoring.h"
#include "rfmt/tensor/graph.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/training/config.h"

namespace rfmt {

struct SentencePair {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
};

// Held-out sources with gold targets, used only to pick checkpoints.
struct ValidationSet {
  std::vector<TokenSeq> sources;
  std::vector<std::string> refs;
};

struct TrainIo {
  const Vocab* vocab = nullptr;
  const ValidationSet* valid = nullptr;
  // Periodic and best checkpoints go here when non-empty.
  std::string checkpoint_dir;
  std::function<void(const std::string&)> log;
};

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

struct CheckpointLog {
  std::size_t step = 0;
  double valid_bleu = 0.0;
  std::string path;
};

struct TrainReport {
  std::string trainer;
  std::string status = "ok";  // "ok" | "diverged"
  std::vector<StepLog> steps;
  std::vector<CheckpointLog> checkpoints;
  std::size_t best_step = 0;
  double best_bleu = -1.0;
  std::size_t skipped_sentences = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

// Label-smoothed teacher-forced NLL. Ends with the best-validation parameters
// when a validation set is given.
TrainReport train_mle(NmtModel& model, const std::vector<SentencePair>& data, const TrainConfig& cfg,
                      const TrainIo& io);

// Masked-token cross entropy; each sentence masks round(mask_fraction * n)
// positions (at least one).
TrainReport train_mlm(MaskedLm& mlm, const std::vector<std::vector<TokenId>>& sentences, const TrainConfig& cfg,
                      const TrainIo& io);

// Risk of each candidate of one source sentence.
using CandidateRisk =
    std::function<std::vector<double>(std::size_t sentence, const TokenSeq& src, const std::vector<Candidate>& cands)>;

// Minimum risk training over source-only data: beam candidates are decoded
// without gradients, then re-scored teacher-forced.
TrainReport train_mrt(NmtModel& model, const std::vector<TokenSeq>& sources, const CandidateRisk& risk,
                      const TrainConfig& cfg, const TrainIo& io, const std::string& name = "mrt");

// Risk = composite of MLM fluency and GEC-max BERTScore adequacy, on
// question-normalized source and candidates.
TrainReport train_mrt_composite(NmtModel& model, const std::vector<TokenSeq>& sources, RiskScorer& scorer,
                                const TrainConfig& cfg, const TrainIo& io);

// Risk = 1 - smoothed sentence BLEU against the synthetic reference of each
// source.
TrainReport train_mrt_bleu(NmtModel& model, const std::vector<TokenSeq>& sources,
                           const std::vector<std::string>& synthetic_refs, const TrainConfig& cfg, const TrainIo& io);

double bleu_risk(const std::string& hyp, const std::string& ref);

// The MRT objective for a set of sentences, averaged over sentences.
//   literal:    sum_k (sum_n log P(y_k,n | ...)) * r_k
//   normalized: sum_k softmax_k(sharpness * log P(y_k)) * r_k
// Risks are constants; with risk_baseline they are centred per sentence.
Var mrt_loss(Graph& g, const NmtModel& model, const std::vector<TokenSeq>& sources,
             const std::vector<std::vector<Candidate>>& candidates, const std::vector<std::vector<double>>& risks,
             const TrainConfig& cfg);

// Greedy translation of every source, aligned 1:1.
std::vector<std::string> forward_translate(const NmtModel& model, const Vocab& vocab,
                                           const std::vector<TokenSeq>& sources, std::size_t max_len = 0);

double validation_bleu(const NmtModel& model, const Vocab& vocab, const ValidationSet& valid);

// Fraction of target tokens (EOS included) whose argmax under teacher forcing
// is correct.
double teacher_forced_accuracy(const NmtModel& model, const std::vector<SentencePair>& data);

}  // namespace rfmt
