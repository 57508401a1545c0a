#include "rfmt/scoring/scoring.h"

#include <algorithm>
#include <cmath>
#include <thread>

#include "rfmt/simd/kernels.h"
#include "rfmt/util/error.h"

namespace rfmt {
namespace {

constexpr double kUnitTolerance = 1e-4;

void check_unit_rows(const Tensor& t, const char* what) {
  const std::size_t d = t.shape[1];
  for (std::size_t i = 0; i < t.shape[0]; ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += t.data[i * d + k] * t.data[i * d + k];
    if (std::abs(std::sqrt(norm) - 1.0) > kUnitTolerance) {
      throw DataError(std::string("bertscore: ") + what + " row " + std::to_string(i) + " is not unit norm");
    }
  }
}

}  // namespace

void ScoreWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw DataError("score weights must be non-negative");
}

nlohmann::json RiskScore::to_json() const { return {{"l_mlm", l_mlm}, {"l_bert", l_bert}, {"composite", composite}}; }

double mlm_score(const MaskedLm& mlm, const TokenSeq& y, bool normalize) {
  if (y.empty()) throw DataError("mlm_score: empty sequence");
  double sum = 0.0;
  for (double lp : mlm_position_logprobs(mlm, y.ids)) sum += lp;
  return normalize ? sum / static_cast<double>(y.size()) : sum;
}

double f1_from(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

BertScoreTriple bertscore(const Tensor& x, const Tensor& y) {
  if (x.shape.size() != 2 || y.shape.size() != 2) throw DataError("bertscore: expected [n, d] inputs");
  const std::size_t n = x.shape[0];
  const std::size_t m = y.shape[0];
  const std::size_t d = x.shape[1];
  if (n == 0 || m == 0) throw DataError("bertscore: empty token list");
  if (y.shape[1] != d) throw DataError("bertscore: embedding widths differ");
  check_unit_rows(x, "x");
  check_unit_rows(y, "y");

  std::vector<double> yt(d * m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < d; ++k) yt[k * m + j] = y.data[j * d + k];
  }
  // sim[i, j] accumulates x[i, k] * y[j, k] in k order, as a plain dot would.
  const simd::KernelTable& kt = simd::kernels();
  std::vector<double> sim(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) kt.axpy(x.data[i * d + k], yt.data() + k * m, sim.data() + i * m, m);
  }

  BertScoreTriple t;
  for (std::size_t i = 0; i < n; ++i) t.recall += kt.max(sim.data() + i * m, m);
  t.recall /= static_cast<double>(n);
  for (std::size_t j = 0; j < m; ++j) {
    double best = sim[j];
    for (std::size_t i = 1; i < n; ++i) best = std::max(best, sim[i * m + j]);
    t.precision += best;
  }
  t.precision /= static_cast<double>(m);
  t.f1 = f1_from(t.precision, t.recall);
  return t;
}

double bert_loss_from(double f_raw, double f_corrected) { return 1.0 - std::max(f_raw, f_corrected); }

double bert_loss(const TokenSeq& x, const TokenSeq& y_hat, const Embedder& embedder, const Corrector& gec,
                 const Vocab& vocab) {
  const Tensor ey = embedder.embed(y_hat);
  const double f_raw = bertscore(embedder.embed(x), ey).f1;
  const double f_gec = bertscore(embedder.embed(tokenize(gec(x.text()), vocab)), ey).f1;
  return bert_loss_from(f_raw, f_gec);
}

double composite_from(double l_mlm, double l_bert, const ScoreWeights& w) { return w.alpha * l_mlm + w.beta * l_bert; }

RiskScore composite_risk(const TokenSeq& x, const TokenSeq& y_hat, const MaskedLm& mlm, const Embedder& embedder,
                         const Corrector& gec, const Vocab& vocab, const ScoreWeights& w) {
  w.validate();
  RiskScore r;
  r.l_mlm = -mlm_score(mlm, y_hat, w.mlm_normalize);
  r.l_bert = bert_loss(x, y_hat, embedder, gec, vocab);
  r.composite = composite_from(r.l_mlm, r.l_bert, w);
  return r;
}

RiskScorer::RiskScorer(const MaskedLm& mlm, const Embedder& embedder, Corrector gec, const Vocab& vocab,
                       ScoreWeights w)
    : mlm_(mlm), embedder_(embedder), gec_(std::move(gec)), vocab_(vocab), w_(w) {}

void RiskScorer::set_weights(const ScoreWeights& w) { w_ = w; }

double RiskScorer::l_mlm(const TokenSeq& y) {
  const std::string key = y.text();
  auto it = mlm_cache_.find(key);
  double sum;
  if (it != mlm_cache_.end()) {
    sum = it->second;
  } else {
    sum = mlm_score(mlm_, y, false);
    mlm_cache_.emplace(key, sum);
  }
  return -(w_.mlm_normalize ? sum / static_cast<double>(y.size()) : sum);
}

std::vector<RiskScore> RiskScorer::score(const std::string& source, const std::vector<std::string>& candidates,
                                         std::size_t threads) {
  const bool skip_mlm = w_.alpha == 0.0;
  const bool skip_bert = w_.beta == 0.0;
  const TokenSeq x = tokenize(normalize_question(source), vocab_);
  Tensor ex;
  Tensor eg;
  if (!skip_bert) {
    ex = embedder_.embed(x);
    eg = embedder_.embed(tokenize(gec_(x.text()), vocab_));
  }
  std::vector<TokenSeq> ys;
  ys.reserve(candidates.size());
  for (const std::string& c : candidates) ys.push_back(tokenize(normalize_question(c), vocab_));

  std::vector<RiskScore> out(candidates.size());
  auto adequacy = [&](std::size_t i) {
    if (skip_bert) return;
    const Tensor ey = embedder_.embed(ys[i]);
    out[i].l_bert = bert_loss_from(bertscore(ex, ey).f1, bertscore(eg, ey).f1);
  };
  threads = std::max<std::size_t>(1, std::min(threads, candidates.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < ys.size(); ++i) adequacy(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < ys.size(); i += threads) adequacy(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  // The memo table is not thread-safe, so fluency runs serially.
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!skip_mlm) out[i].l_mlm = l_mlm(ys[i]);
    out[i].composite = composite_from(out[i].l_mlm, out[i].l_bert, w_);
  }
  return out;
}

}  // namespace rfmt
