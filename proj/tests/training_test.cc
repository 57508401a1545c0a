#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "rfmt/metrics/bleu.h"
#include "rfmt/models/beam.h"
#include "rfmt/models/checkpoint.h"
#include "rfmt/models/embedder.h"
#include "rfmt/noise/gec.h"
#include "rfmt/tensor/grad_check.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/training/batching.h"
#include "rfmt/training/trainer.h"
#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"
#include "test_support.h"

namespace rfmt {
namespace {

using testing::tiny_dims;

TEST(Batching, RespectsTokenBudgetAndKeepsOrder) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> lengths(1 + rng.below(60));
    for (auto& l : lengths) l = 1 + rng.below(30);
    const std::size_t budget = 10 + rng.below(100);
    const auto batches = make_batches(lengths, budget);
    std::size_t next = 0;
    for (const auto& b : batches) {
      ASSERT_FALSE(b.empty());
      std::size_t longest = 0;
      for (std::size_t i : b) {
        EXPECT_EQ(i, next++);
        longest = std::max(longest, lengths[i]);
      }
      if (b.size() > 1) EXPECT_LE(b.size() * longest, budget);
    }
    EXPECT_EQ(next, lengths.size());
  }
}

TEST(Batching, StreamReshufflesDeterministically) {
  const auto batches = make_batches({3, 3, 3, 3, 3, 3}, 3);
  BatchStream a(batches, 7), b(batches, 7);
  std::set<std::size_t> epoch0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto& x = a.next();
    EXPECT_EQ(x, b.next());
    epoch0.insert(x.front());
  }
  EXPECT_EQ(epoch0.size(), batches.size());
  EXPECT_EQ(a.epoch(), 0u);
  a.next();
  EXPECT_EQ(a.epoch(), 1u);
}

TEST(Config, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.steps = 17;
  c.weights.alpha = 0.3;
  c.risk_mode = RiskMode::kLiteral;
  const TrainConfig d = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"stepz", 3}}), DataError);
  EXPECT_THROW(risk_mode_from("fancy"), DataError);
  TrainConfig bad;
  bad.steps = 0;
  EXPECT_THROW(bad.validate(false), DataError);
  bad = TrainConfig{};
  bad.label_smoothing = 1.5;
  EXPECT_THROW(bad.validate(false), DataError);
}

TEST(LabelSmoothing, ThreeTokenHandExample) {
  // logits [1, 2, 3], target 0, eps 0.1.
  Graph g;
  const Var logits = g.constant(Tensor(Shape{1, 3}, std::vector<double>{1, 2, 3}));
  const std::vector<std::int64_t> tgt = {0};
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  const double nll = lse - 1.0;
  const double uniform = ((lse - 1) + (lse - 2) + (lse - 3)) / 3.0;
  EXPECT_NEAR(g.value(g.cross_entropy_ls(logits, tgt, 0.1)).item(), 0.9 * nll + 0.1 * uniform, 1e-14);
}

class ToyTask : public ::testing::Test {
 protected:
  Vocab vocab = testing::task_vocab();
  std::vector<SentencePair> pairs;

  void SetUp() override {
    const std::vector<std::pair<std::string, std::string>> raw = {
        {"does it work with samsung ?", "yah semsango saath kaam karta kya ?"},
        {"it works with samsung", "yah semsango saath kaamta"},
        {"will it fit in nokia ?", "yah nukoeo mein baith gaa kya ?"},
        {"can it support dell ?", "yah dillo samarthan sakta kya ?"},
        {"it can support dell", "yah dillo samarthan sakta"},
        {"is it compatible with sony ?", "yah sunyo saath anukul hai kya ?"},
        {"does it work in vivo ?", "yah vovuo mein kaam karta kya ?"},
        {"what is the difference between the two ?", "vah dono beech vah antar kaun hai kya ?"},
        {"it works in oppo", "yah uppuo mein kaamta"},
        {"will it fit in redmi max ?", "yah ridmoo mex mein baith gaa kya ?"},
    };
    for (const auto& [s, t] : raw) pairs.push_back({tokenize(s, vocab).ids, tokenize(t, vocab).ids});
  }

  static TrainConfig quick(std::size_t steps) {
    TrainConfig c;
    c.steps = steps;
    c.checkpoint_every = steps;
    c.lr = 3e-3;
    c.warmup = 20;
    c.label_smoothing = 0.0;
    c.max_source_tokens_per_batch = 40;
    c.seed = 5;
    return c;
  }
};

TEST_F(ToyTask, MleOverfitsTenPairs) {
  NmtModel model(TransformerDims{32, 2, 64, 1, 1, 0.0}, vocab.size(), 1);
  const TrainReport rep = train_mle(model, pairs, quick(600), TrainIo{&vocab});
  EXPECT_EQ(rep.status, "ok");
  EXPECT_LT(rep.steps.back().loss, rep.steps.front().loss);
  EXPECT_GE(teacher_forced_accuracy(model, pairs), 0.99);
}

TEST_F(ToyTask, FirstStepLossAtUniformLogits) {
  NmtModel model(tiny_dims(), vocab.size(), 1);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    for (double& v : model.params().at(i).value.data) v = 0.0;
  }
  TrainConfig c = quick(1);
  c.label_smoothing = 0.1;
  const TrainReport rep = train_mle(model, pairs, c, TrainIo{&vocab});
  EXPECT_NEAR(rep.steps.front().loss, std::log(static_cast<double>(vocab.size())), 1e-12);
}

TEST_F(ToyTask, CheckpointsAndBestSelection) {
  testing::TempDir dir("train");
  NmtModel model(tiny_dims(), vocab.size(), 1);
  ValidationSet valid;
  for (std::size_t i = 0; i < 3; ++i) {
    valid.sources.push_back(from_ids(pairs[i].src, vocab));
    valid.refs.push_back(from_ids(pairs[i].tgt, vocab).text());
  }
  TrainConfig c = quick(30);
  c.checkpoint_every = 10;
  const TrainReport rep = train_mle(model, pairs, c, TrainIo{&vocab, &valid, dir.path()});
  ASSERT_EQ(rep.checkpoints.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(dir.file("step_000010.ckpt")));
  EXPECT_TRUE(std::filesystem::exists(dir.file("best.ckpt")));
  double best = -1.0;
  for (const CheckpointLog& ck : rep.checkpoints) best = std::max(best, ck.valid_bleu);
  EXPECT_EQ(rep.best_bleu, best);
  // The model ends on the best checkpoint.
  EXPECT_EQ(validation_bleu(model, vocab, valid), best);
  NmtModel loaded(tiny_dims(), vocab.size(), 9);
  load_model(dir.file("best.ckpt"), loaded);
  EXPECT_EQ(loaded.params().at(0).value.data, model.params().at(0).value.data);
}

TEST_F(ToyTask, DivergenceIsReportedAndParametersStayFinite) {
  NmtModel model(tiny_dims(), vocab.size(), 1);
  TrainConfig c = quick(20);
  c.lr = 1e300;
  c.warmup = 1;
  c.clip_norm = 0.0;
  const TrainReport rep = train_mle(model, pairs, c, TrainIo{&vocab});
  EXPECT_EQ(rep.status, "diverged");
  EXPECT_TRUE(model.params().all_finite());
}

TEST_F(ToyTask, ForwardTranslationContract) {
  NmtModel model(tiny_dims(), vocab.size(), 1);
  train_mle(model, pairs, quick(100), TrainIo{&vocab});
  std::vector<TokenSeq> src;
  for (const auto& p : pairs) src.push_back(from_ids(p.src, vocab));
  const auto a = forward_translate(model, vocab, src, 12);
  EXPECT_EQ(a.size(), src.size());
  EXPECT_EQ(a, forward_translate(model, vocab, src, 12));
  std::vector<SentencePair> synth;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const TokenSeq t = tokenize(a[i], vocab);
    if (!t.empty()) synth.push_back({src[i].ids, t.ids});
  }
  ASSERT_FALSE(synth.empty());
  EXPECT_EQ(train_mle(model, synth, quick(2), TrainIo{&vocab}).status, "ok");
}

// A risk-weighted objective over a fixed candidate set.
struct MrtToy {
  Vocab vocab = testing::task_vocab();
  NmtModel model{TransformerDims{8, 2, 8, 1, 1, 0.0}, vocab.size(), 4};
  std::vector<TokenSeq> sources = {tokenize("it works in dell", vocab)};
  std::vector<std::vector<Candidate>> cands;
  std::vector<std::vector<double>> risks = {{0.7, 0.2}};

  MrtToy() {
    Candidate a;
    a.tokens = tokenize("yah dillo mein kaamta", vocab);
    Candidate b;
    b.tokens = tokenize("yah dillo mein kaam karta kya ?", vocab);
    cands = {{a, b}};
  }
};

TEST(MrtLoss, NormalizedIsAConvexCombinationOfRisks) {
  MrtToy t;
  TrainConfig c;
  Graph g;
  const double loss = g.value(mrt_loss(g, t.model, t.sources, t.cands, t.risks, c)).item();
  EXPECT_GE(loss, 0.2);
  EXPECT_LE(loss, 0.7);
  // Q from teacher-forced scores.
  double lp[2];
  for (int k = 0; k < 2; ++k) {
    const auto s = score_sequence(t.model, t.sources[0], t.cands[0][k].tokens);
    lp[k] = std::accumulate(s.begin(), s.end(), 0.0);
  }
  const double q0 = 1.0 / (1.0 + std::exp(lp[1] - lp[0]));
  EXPECT_NEAR(loss, q0 * 0.7 + (1 - q0) * 0.2, 1e-10);
}

TEST(MrtLoss, LiteralGradientIsRiskWeightedLogProbGradient) {
  MrtToy t;
  TrainConfig c;
  c.risk_mode = RiskMode::kLiteral;
  {
    Graph g;
    double expected = 0.0;
    for (int k = 0; k < 2; ++k) {
      const auto s = score_sequence(t.model, t.sources[0], t.cands[0][k].tokens);
      expected += t.risks[0][k] * std::accumulate(s.begin(), s.end(), 0.0);
    }
    EXPECT_NEAR(g.value(mrt_loss(g, t.model, t.sources, t.cands, t.risks, c)).item(), expected, 1e-10);
  }
  std::vector<std::size_t> ids(t.model.params().size());
  std::iota(ids.begin(), ids.end(), 0);
  const GradCheckResult r = grad_check(
      [&](Graph& g) { return mrt_loss(g, t.model, t.sources, t.cands, t.risks, c); }, t.model.params(), ids,
      GradCheckOptions{1e-5, 5});
  EXPECT_LT(r.max_relative_error, 1e-3);
}

TEST(MrtLoss, EqualRisksGiveZeroGradientWhenNormalized) {
  MrtToy t;
  t.risks = {{0.4, 0.4}};
  Graph g;
  const Var loss = mrt_loss(g, t.model, t.sources, t.cands, t.risks, TrainConfig{});
  EXPECT_NEAR(g.value(loss).item(), 0.4, 1e-15);
  for (const auto& [id, grad] : g.backward(loss)) {
    for (double v : grad.data) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(MrtLoss, MismatchedInputsThrow) {
  MrtToy t;
  Graph g;
  EXPECT_THROW(mrt_loss(g, t.model, t.sources, t.cands, {{0.1}}, TrainConfig{}), DataError);
}

TEST_F(ToyTask, MrtWithZeroWeightsLeavesParametersUnchanged) {
  NmtModel model(tiny_dims(), vocab.size(), 1);
  const std::vector<double> before = model.params().at(0).value.data;
  MaskedLm mlm(tiny_dims(), vocab.size(), 2);
  const Embedder emb = Embedder::oracle(TaskSpec::default_spec());
  const RuleGec gec(TaskSpec::default_spec());
  RiskScorer scorer(mlm, emb, gec.as_corrector(), vocab, ScoreWeights{});
  TrainConfig c = quick(1);
  c.weights = ScoreWeights{0.0, 0.0, true};
  c.max_len = 6;
  const TrainReport rep =
      train_mrt_composite(model, {from_ids(pairs[0].src, vocab), from_ids(pairs[1].src, vocab)}, scorer, c, TrainIo{&vocab});
  ASSERT_EQ(rep.steps.size(), 1u);
  EXPECT_EQ(rep.steps[0].loss, 0.0);
  EXPECT_EQ(model.params().at(0).value.data, before);
}

TEST_F(ToyTask, MrtSeesFiveCandidatesAndSkipsBadSentences) {
  // Briefly trained so that beam hypotheses reach EOS.
  NmtModel model(tiny_dims(), vocab.size(), 1);
  train_mle(model, pairs, quick(150), TrainIo{&vocab});
  TrainConfig c = quick(2);
  c.max_len = 16;
  c.max_source_tokens_per_batch = 1000;
  std::vector<std::size_t> counts;
  const TrainReport rep = train_mrt(
      model, {from_ids(pairs[0].src, vocab), from_ids(pairs[1].src, vocab)},
      [&](std::size_t i, const TokenSeq&, const std::vector<Candidate>& cands) {
        counts.push_back(cands.size());
        if (i == 1) throw DataError("unscorable");
        return std::vector<double>(cands.size(), 0.5);
      },
      c, TrainIo{&vocab});
  for (std::size_t n : counts) EXPECT_EQ(n, 5u);
  EXPECT_EQ(rep.skipped_sentences, 2u);
}

TEST(BleuRisk, RangeAndOrdering) {
  EXPECT_EQ(bleu_risk("yah dillo mein kaamta", "yah dillo mein kaamta"), 0.0);
  const std::string ref = "yah dillo mein kaam karta kya ?";
  const std::vector<std::string> hyps = {"yah dillo mein kaam karta kya", "yah dillo mein kaamta", "kya ?", "zz"};
  for (const std::string& h : hyps) {
    const double r = bleu_risk(h, ref);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    EXPECT_DOUBLE_EQ(r, 1.0 - sentence_bleu(h, ref) / 100.0);
  }
  EXPECT_LT(bleu_risk(hyps[0], ref), bleu_risk(hyps[1], ref));
}

}  // namespace
}  // namespace rfmt
