#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rfmt/corpus/corpus.h"
#include "rfmt/models/embedder.h"
#include "rfmt/models/mlm.h"
#include "rfmt/noise/gec.h"
#include "rfmt/scoring/scoring.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"
#include "test_support.h"

namespace rfmt {
namespace {

Tensor unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Tensor t(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      t.data[i * d + k] = rng.normal();
      norm += t.data[i * d + k] * t.data[i * d + k];
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) t.data[i * d + k] /= norm;
  }
  return t;
}

// Direct double loop over all token pairs.
BertScoreTriple brute_force(const Tensor& x, const Tensor& y) {
  const std::size_t n = x.shape[0], m = y.shape[0], d = x.shape[1];
  auto sim = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x.data[i * d + k] * y.data[j * d + k];
    return s;
  };
  BertScoreTriple t;
  for (std::size_t i = 0; i < n; ++i) {
    double best = sim(i, 0);
    for (std::size_t j = 1; j < m; ++j) best = std::max(best, sim(i, j));
    t.recall += best;
  }
  t.recall /= static_cast<double>(n);
  for (std::size_t j = 0; j < m; ++j) {
    double best = sim(0, j);
    for (std::size_t i = 1; i < n; ++i) best = std::max(best, sim(i, j));
    t.precision += best;
  }
  t.precision /= static_cast<double>(m);
  t.f1 = t.precision + t.recall > 0 ? 2 * t.precision * t.recall / (t.precision + t.recall) : 0.0;
  return t;
}

TEST(BertScore, EqualsBruteForceExactly) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(9), m = 1 + rng.below(9), d = 1 + rng.below(24);
    const Tensor x = unit_rows(rng, n, d);
    const Tensor y = unit_rows(rng, m, d);
    const BertScoreTriple a = bertscore(x, y);
    const BertScoreTriple b = brute_force(x, y);
    ASSERT_EQ(a.precision, b.precision) << trial;
    ASSERT_EQ(a.recall, b.recall) << trial;
    ASSERT_EQ(a.f1, b.f1) << trial;
  }
}

TEST(BertScore, HandCases) {
  // x = {e1, e2}, y = {e1}: recall = (1 + 0) / 2, precision = 1.
  const Tensor x(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  const Tensor y(Shape{1, 2}, std::vector<double>{1, 0});
  const BertScoreTriple t = bertscore(x, y);
  EXPECT_EQ(t.recall, 0.5);
  EXPECT_EQ(t.precision, 1.0);
  EXPECT_DOUBLE_EQ(t.f1, 2.0 / 3.0);
  EXPECT_EQ(bertscore(x, x).f1, 1.0);
  EXPECT_THROW(bertscore(Tensor(Shape{1, 2}, std::vector<double>{1, 1}), y), DataError);
  EXPECT_THROW(bertscore(Tensor(Shape{0, 2}), y), DataError);
}

TEST(Composite, HandArithmetic) {
  const ScoreWeights w{0.15, 0.85, true};
  EXPECT_NEAR(composite_from(2.0, 0.4, w), 0.64, 1e-15);
  EXPECT_EQ(composite_from(2.0, 0.4, ScoreWeights{1.0, 0.0, true}), 2.0);
  EXPECT_EQ(bert_loss_from(0.6, 0.9), 1.0 - 0.9);
  EXPECT_EQ(bert_loss_from(0.9, 0.6), 1.0 - 0.9);
  EXPECT_EQ(f1_from(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f1_from(0.5, 1.0), 2.0 / 3.0);
}

TEST(Composite, WeightValidation) {
  EXPECT_NO_THROW((ScoreWeights{0.0, 0.0, true}.validate()));
  EXPECT_THROW((ScoreWeights{0.5, -1.0, true}.validate()), DataError);
  EXPECT_THROW((ScoreWeights{-0.1, 1.0, true}.validate()), DataError);
  EXPECT_NO_THROW((ScoreWeights{0.0, 1.0, true}.validate()));
}

class ScorerFixture : public ::testing::Test {
 protected:
  TaskSpec spec = TaskSpec::default_spec();
  Vocab vocab = testing::task_vocab();
  MaskedLm mlm{testing::tiny_dims(), vocab.size(), 31};
  Embedder oracle = Embedder::oracle(spec);
  RuleGec gec{spec};
};

TEST_F(ScorerFixture, MlmScoreEqualsOneMaskAtATime) {
  TaskSpec s = spec;
  s.size = 200;
  for (const CorpusTriple& t : gen_corpus(s)) {
    const TokenSeq y = tokenize(t.tgt, vocab);
    double naive = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) naive += mlm_logprob_at(mlm, y, i);
    ASSERT_EQ(mlm_score(mlm, y, false), naive) << t.tgt;
    ASSERT_EQ(mlm_score(mlm, y, true), naive / static_cast<double>(y.size()));
  }
  EXPECT_THROW(mlm_score(mlm, TokenSeq{}, true), DataError);
}

TEST_F(ScorerFixture, BertLossTakesTheBetterSource) {
  // The noisy source misses the question; its correction matches the
  // candidate exactly at the lemma level.
  const TokenSeq x = tokenize("it works with samsung", vocab);
  const TokenSeq y = tokenize("yah semsango saath kaam karta kya ?", vocab);
  const double raw = bertscore(oracle.embed(x), oracle.embed(y)).f1;
  const double fixed = bertscore(oracle.embed(tokenize(gec(x.text()), vocab)), oracle.embed(y)).f1;
  EXPECT_LT(raw, fixed);
  EXPECT_EQ(fixed, 1.0);
  EXPECT_EQ(bert_loss(x, y, oracle, gec.as_corrector(), vocab), 0.0);
  EXPECT_EQ(bert_loss(x, y, oracle, identity_corrector(), vocab), 1.0 - raw);
}

TEST_F(ScorerFixture, ScorerMatchesCompositeRisk) {
  const ScoreWeights w{0.3, 0.7, true};
  RiskScorer scorer(mlm, oracle, gec.as_corrector(), vocab, w);
  const std::string src = "it works with nokia";
  const std::vector<std::string> cands = {"yah nukoeo saath kaamta", "yah nukoeo saath kaam karta kya ?", "kya"};
  const auto scores = scorer.score(src, cands);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const RiskScore ref = composite_risk(tokenize(normalize_question(src), vocab),
                                         tokenize(normalize_question(cands[i]), vocab), mlm, oracle,
                                         gec.as_corrector(), vocab, w);
    EXPECT_EQ(scores[i].l_mlm, ref.l_mlm);
    EXPECT_EQ(scores[i].l_bert, ref.l_bert);
    EXPECT_EQ(scores[i].composite, ref.composite);
  }
  // Memoized second call and a threaded call give the same numbers.
  const auto again = scorer.score(src, cands, 3);
  for (std::size_t i = 0; i < cands.size(); ++i) EXPECT_EQ(again[i].composite, scores[i].composite);
}

TEST_F(ScorerFixture, ZeroWeightSkipsTheTerm) {
  RiskScorer scorer(mlm, oracle, gec.as_corrector(), vocab, ScoreWeights{0.0, 1.0, true});
  const auto s = scorer.score("does it work with dell ?", {"yah dillo saath kaam karta kya ?"});
  EXPECT_EQ(s[0].l_mlm, 0.0);
  EXPECT_EQ(s[0].composite, s[0].l_bert);
  scorer.set_weights(ScoreWeights{1.0, 0.0, false});
  const auto t = scorer.score("does it work with dell ?", {"yah dillo saath kaam karta kya ?"});
  EXPECT_EQ(t[0].l_bert, 0.0);
  EXPECT_EQ(t[0].composite, t[0].l_mlm);
  EXPECT_GT(t[0].l_mlm, 0.0);
}

TEST(BertScore, SymmetryAndPermutationInvariance) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6), m = 1 + rng.below(6), d = 2 + rng.below(8);
    const Tensor x = unit_rows(rng, n, d);
    Tensor y = unit_rows(rng, m, d);
    const BertScoreTriple xy = bertscore(x, y);
    const BertScoreTriple yx = bertscore(y, x);
    EXPECT_EQ(xy.precision, yx.recall);
    EXPECT_EQ(xy.recall, yx.precision);
    // Reverse the rows of y.
    Tensor z = y;
    for (std::size_t j = 0; j < m; ++j) {
      std::copy_n(y.data.begin() + (m - 1 - j) * d, d, z.data.begin() + j * d);
    }
    EXPECT_NEAR(bertscore(x, z).f1, xy.f1, 1e-15);
  }
}

TEST(BertScore, SelfMatchIsOne) {
  Rng rng(8);
  const Tensor x = unit_rows(rng, 4, 6);
  const BertScoreTriple t = bertscore(x, x);
  EXPECT_NEAR(t.precision, 1.0, 1e-15);
  EXPECT_NEAR(t.recall, 1.0, 1e-15);
}

TEST_F(ScorerFixture, UniformMlmScoresMinusLogV) {
  MaskedLm flat(testing::tiny_dims(), vocab.size(), 1);
  for (std::size_t i = 0; i < flat.params().size(); ++i) {
    for (double& v : flat.params().at(i).value.data) v = 0.0;
  }
  const TokenSeq y = tokenize("yah dillo saath kaamta", vocab);
  const double logv = std::log(static_cast<double>(vocab.size()));
  EXPECT_NEAR(mlm_score(flat, y, false), -4.0 * logv, 1e-12);
  EXPECT_NEAR(mlm_score(flat, y, true), -logv, 1e-12);
}

TEST_F(ScorerFixture, GoldTranslationOfCorrectedSourceHasLowestAdequacyLoss) {
  TaskSpec s = spec;
  s.size = 50;
  s.seed = 12;
  Rng rng(3);
  for (const CorpusTriple& t : gen_corpus(s)) {
    const TokenSeq x = tokenize(normalize_question(t.noisy_src), vocab);
    const std::string fixed = gec(t.noisy_src);
    if (!parse_clean(spec, fixed)) continue;  // unrecoverable typo
    const std::string gold = gold_translate(spec, fixed);
    const double best = bert_loss(x, tokenize(gold, vocab), oracle, gec.as_corrector(), vocab);
    std::vector<std::string> words = split_words(gold);
    // Corruptions: drop a word, duplicate a word, replace a word by another
    // lexicon word.
    for (int c = 0; c < 6; ++c) {
      std::vector<std::string> bad = words;
      const std::size_t pos = rng.below(bad.size());
      if (c % 3 == 0 && bad.size() > 1) {
        bad.erase(bad.begin() + static_cast<std::ptrdiff_t>(pos));
      } else if (c % 3 == 1) {
        bad.insert(bad.begin() + static_cast<std::ptrdiff_t>(pos), bad[pos]);
      } else {
        bad[pos] = "anukul";
      }
      std::string y;
      for (const std::string& w : bad) y += (y.empty() ? "" : " ") + w;
      EXPECT_LE(best, bert_loss(x, tokenize(normalize_question(y), vocab), oracle, gec.as_corrector(), vocab))
          << t.noisy_src << " | " << y;
    }
  }
}

TEST_F(ScorerFixture, BothWeightsZeroGiveZeroRisk) {
  RiskScorer scorer(mlm, oracle, gec.as_corrector(), vocab, ScoreWeights{0.0, 0.0, true});
  for (const RiskScore& r : scorer.score("it works in dell", {"yah dillo mein kaamta", "kya ?"})) {
    EXPECT_EQ(r.composite, 0.0);
  }
}

}  // namespace
}  // namespace rfmt
