#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "rfmt/models/beam.h"
#include "rfmt/models/checkpoint.h"
#include "rfmt/models/embedder.h"
#include "rfmt/models/mlm.h"
#include "rfmt/models/nmt.h"
#include "rfmt/tensor/grad_check.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"
#include "rfmt/util/io.h"
#include "test_support.h"

namespace rfmt {
namespace {

using testing::tiny_dims;

class NmtFixture : public ::testing::Test {
 protected:
  Vocab vocab = testing::task_vocab();
  NmtModel model{tiny_dims(), vocab.size(), 17};
  TokenSeq src = tokenize("does it work with samsung ?", vocab);
};

TEST_F(NmtFixture, ForwardShape) {
  Graph g;
  const Var logits = model.forward(g, {src.ids, {7, 8}}, {{9, 10, 11}, {12}});
  EXPECT_EQ(g.value(logits).shape, (Shape{2, 4, vocab.size()}));
}

TEST_F(NmtFixture, PaddingDoesNotChangeScores) {
  const std::vector<TokenId> tgt = {9, 10, 11};
  Graph solo;
  const Tensor a = solo.value(model.sequence_logprobs(solo, {src.ids}, {tgt}));
  Graph batch;
  const std::vector<TokenId> long_src(12, 6);
  const Tensor b = batch.value(model.sequence_logprobs(batch, {src.ids, long_src}, {tgt, {5, 6, 7, 8, 9, 10}}));
  for (std::size_t t = 0; t < tgt.size() + 1; ++t) EXPECT_NEAR(a[t], b[t], 1e-12) << t;
}

TEST_F(NmtFixture, ScoreSequenceIsNormalized) {
  // First-step probabilities over the whole vocabulary sum to one.
  double first = 0.0;
  for (TokenId v = 0; v < static_cast<TokenId>(vocab.size()); ++v) {
    const std::vector<double> lp = score_sequence(model, src, from_ids({v}, vocab));
    ASSERT_EQ(lp.size(), 2u);
    first += std::exp(lp[0]);
  }
  EXPECT_NEAR(first, 1.0, 1e-9);
  EXPECT_THROW(score_sequence(model, src, TokenSeq{}), DataError);
}

TEST_F(NmtFixture, BeamScoresMatchTeacherForcedScores) {
  for (std::size_t k : {1u, 3u, 5u}) {
    const std::vector<Candidate> cands = beam_search(model, vocab, src, BeamOptions{k, 8, false});
    ASSERT_FALSE(cands.empty());
    EXPECT_LE(cands.size(), k);
    std::set<std::vector<TokenId>> seen;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const Candidate& c = cands[i];
      EXPECT_TRUE(seen.insert(c.tokens.ids).second) << "duplicate candidate";
      if (i > 0) EXPECT_GE(cands[i - 1].total_logprob, c.total_logprob);
      const std::vector<double> ref = score_sequence(model, src, c.tokens);
      const std::size_t n = c.finished ? ref.size() : ref.size() - 1;
      ASSERT_EQ(c.token_logprobs.size(), n);
      double sum = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        EXPECT_NEAR(c.token_logprobs[t], ref[t], 1e-6);
        sum += ref[t];
      }
      EXPECT_NEAR(c.total_logprob, sum, 1e-6);
      for (TokenId id : c.tokens.ids) {
        EXPECT_NE(id, kPad);
        EXPECT_NE(id, kBos);
        EXPECT_NE(id, kMask);
        EXPECT_NE(id, kEos);
      }
    }
  }
}

TEST_F(NmtFixture, BeamOneIsGreedy) {
  const Candidate greedy = greedy_decode(model, vocab, src, 8);
  const Candidate beam1 = beam_search(model, vocab, src, BeamOptions{1, 8, false}).front();
  EXPECT_EQ(greedy.tokens, beam1.tokens);
  EXPECT_EQ(greedy.total_logprob, beam1.total_logprob);
  // Greedy picks the argmax at every step.
  std::vector<TokenId> prefix;
  for (std::size_t t = 0; t < greedy.tokens.size(); ++t) {
    Graph g;
    const Tensor& logits = g.value(model.forward(g, {src.ids}, {prefix}));
    const std::size_t v = vocab.size();
    const double* last = logits.data.data() + prefix.size() * v;
    TokenId best = -1;
    for (TokenId c = 0; c < static_cast<TokenId>(v); ++c) {
      if (c == kPad || c == kBos || c == kMask) continue;
      if (best < 0 || last[c] > last[best]) best = c;
    }
    EXPECT_EQ(best, greedy.tokens.ids[t]) << t;
    prefix.push_back(best);
  }
}

TEST_F(NmtFixture, BeamRespectsMaxLength) {
  const auto cands = beam_search(model, vocab, src, BeamOptions{3, 2, false});
  for (const Candidate& c : cands) EXPECT_LE(c.tokens.size(), 2u);
}

TEST_F(NmtFixture, GradCheckSampled) {
  NmtModel m(TransformerDims{8, 2, 8, 1, 1, 0.0}, vocab.size(), 3);
  const std::vector<std::vector<TokenId>> s = {{5, 6, 7}, {8}};
  const std::vector<std::vector<TokenId>> t = {{9, 10}, {11, 12, 13}};
  auto builder = [&](Graph& g) {
    return g.sum(m.sequence_logprobs(g, s, t));
  };
  std::vector<std::size_t> ids(m.params().size());
  std::iota(ids.begin(), ids.end(), 0);
  const GradCheckResult r = grad_check(builder, m.params(), ids, GradCheckOptions{1e-5, 6});
  EXPECT_LT(r.max_relative_error, 1e-3) << m.params().at(r.worst_param).name;
  EXPECT_GT(r.checked, 50u);
}

class MlmFixture : public ::testing::Test {
 protected:
  Vocab vocab = testing::task_vocab();
  MaskedLm mlm{tiny_dims(), vocab.size(), 23};
};

TEST_F(MlmFixture, EncoderOnly) {
  EXPECT_EQ(mlm.dims().decoder_layers, 0u);
  Graph g;
  EXPECT_EQ(g.value(mlm.logits(g, {{5, 6, 7}})).shape, (Shape{1, 5, vocab.size()}));
}

TEST_F(MlmFixture, MaskedPredictionIgnoresTheMaskedToken) {
  // Substituting every vocabulary entry at the masked position must trace out
  // one distribution: the probabilities sum to one.
  TokenSeq y = tokenize("yah semsango saath kaam karta kya ?", vocab);
  for (std::size_t pos : {0u, 3u, 6u}) {
    double total = 0.0;
    for (TokenId v = 0; v < static_cast<TokenId>(vocab.size()); ++v) {
      TokenSeq z = y;
      z.ids[pos] = v;
      total += std::exp(mlm_logprob_at(mlm, z, pos));
    }
    EXPECT_NEAR(total, 1.0, 1e-9) << pos;
  }
  EXPECT_THROW(mlm_logprob_at(mlm, y, y.size()), DataError);
}

TEST_F(MlmFixture, BatchedPositionsMatchOneAtATime) {
  const TokenSeq y = tokenize("vah dono beech vah antar kaun hai kya ?", vocab);
  const std::vector<double> batched = mlm_position_logprobs(mlm, y.ids);
  ASSERT_EQ(batched.size(), y.size());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(batched[i], mlm_logprob_at(mlm, y, i), 1e-12);
}

TEST_F(MlmFixture, GradCheckSampled) {
  MaskedLm m(TransformerDims{8, 2, 8, 1, 0, 0.0}, vocab.size(), 5);
  auto builder = [&](Graph& g) {
    const Var logits = m.logits(g, {{5, kMask, 7, 8}});
    const std::vector<std::int64_t> targets = {-1, -1, 6, -1, -1, -1};
    return g.cross_entropy_ls(logits, targets, 0.0);
  };
  std::vector<std::size_t> ids(m.params().size());
  std::iota(ids.begin(), ids.end(), 0);
  const GradCheckResult r = grad_check(builder, m.params(), ids, GradCheckOptions{1e-5, 6});
  EXPECT_LT(r.max_relative_error, 1e-3) << m.params().at(r.worst_param).name;
}

TEST(Embedder, OracleSharesVectorsAcrossTranslations) {
  const TaskSpec spec = TaskSpec::default_spec();
  const Vocab vocab = testing::task_vocab();
  const Embedder e = Embedder::oracle(spec);
  const Tensor src = e.embed(tokenize("does samsung zzz ?", vocab));
  const Tensor tgt = e.embed(tokenize("karta semsango qqq kya", vocab));
  ASSERT_EQ(src.shape, (Shape{4, e.dim()}));
  for (std::size_t i = 0; i < 4; ++i) {
    double norm = 0.0, dot = 0.0;
    for (std::size_t k = 0; k < e.dim(); ++k) {
      norm += src.data[i * e.dim() + k] * src.data[i * e.dim() + k];
      dot += src.data[i * e.dim() + k] * tgt.data[i * e.dim() + k];
    }
    EXPECT_EQ(norm, 1.0);
    EXPECT_EQ(dot, 1.0) << i;  // unknown words share the UNK vector; "kya" maps to "?"
  }
}

TEST(Embedder, TrainedRowsAreUnitNorm) {
  const Vocab vocab = testing::task_vocab();
  auto mlm = std::make_shared<MaskedLm>(tiny_dims(), vocab.size(), 4);
  const Embedder e = Embedder::trained(mlm, vocab);
  EXPECT_EQ(e.dim(), 16u);
  const Tensor x = e.embed(tokenize("does it work ?", vocab));
  for (std::size_t i = 0; i < 4; ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < 16; ++k) norm += x.data[i * 16 + k] * x.data[i * 16 + k];
    EXPECT_NEAR(norm, 1.0, 1e-12);
  }
  EXPECT_THROW(Embedder::trained(mlm, Vocab::build({"a b"}, 1)), DataError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  Vocab vocab = testing::task_vocab();
  testing::TempDir dir{"ckpt"};
};

TEST_F(CheckpointTest, RoundTripRestoresEveryParameter) {
  NmtModel a(tiny_dims(), vocab.size(), 1);
  NmtModel b(tiny_dims(), vocab.size(), 2);
  save_model(dir.file("m.ckpt"), a, 42);
  const CheckpointHeader h = load_model(dir.file("m.ckpt"), b);
  EXPECT_EQ(h.step, 42u);
  EXPECT_EQ(h.version, kCheckpointVersion);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params().at(i).value.data, b.params().at(i).value.data);
}

TEST_F(CheckpointTest, ErrorsLeaveTheModelUntouched) {
  NmtModel a(tiny_dims(), vocab.size(), 1);
  const std::string bytes = serialize_checkpoint(a.params(), a.architecture_hash(), 3);
  NmtModel b(tiny_dims(), vocab.size(), 2);
  const std::vector<double> before = b.params().at(0).value.data;

  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad, b.params(), b.architecture_hash()), BadMagicError);
  bad = bytes;
  bad[4] = static_cast<char>(kCheckpointVersion + 1);
  EXPECT_THROW(deserialize_checkpoint(bad, b.params(), b.architecture_hash()), VersionMismatchError);
  EXPECT_THROW(deserialize_checkpoint(bytes, b.params(), b.architecture_hash() + 1), ArchitectureMismatchError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 9), b.params(), b.architecture_hash()),
               TruncatedCheckpointError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 2), b.params(), b.architecture_hash()), TruncatedCheckpointError);
  EXPECT_EQ(b.params().at(0).value.data, before);

  NmtModel wide(TransformerDims{32, 2, 32, 1, 1, 0.0}, vocab.size(), 1);
  EXPECT_THROW(deserialize_checkpoint(bytes, wide.params(), wide.architecture_hash()), ArchitectureMismatchError);
  MaskedLm mlm(tiny_dims(), vocab.size(), 1);
  EXPECT_THROW(deserialize_checkpoint(bytes, mlm.params(), mlm.architecture_hash()), ArchitectureMismatchError);
}

TEST_F(CheckpointTest, RefusesNonFiniteParameters) {
  NmtModel a(tiny_dims(), vocab.size(), 1);
  a.params().at(0).value.data[0] = std::nan("");
  EXPECT_THROW(save_model(dir.file("nan.ckpt"), a, 0), NumericError);
  EXPECT_FALSE(std::filesystem::exists(dir.file("nan.ckpt")));
}

TEST_F(CheckpointTest, ArchitectureHashDependsOnShapeNotValues) {
  NmtModel a(tiny_dims(), vocab.size(), 1);
  NmtModel b(tiny_dims(), vocab.size(), 9);
  NmtModel c(tiny_dims(), vocab.size() + 1, 1);
  EXPECT_EQ(a.architecture_hash(), b.architecture_hash());
  EXPECT_NE(a.architecture_hash(), c.architecture_hash());
}

TEST(Nmt, UniformModelScoresMinusLogV) {
  const Vocab vocab = testing::task_vocab();
  NmtModel flat(tiny_dims(), vocab.size(), 3);
  for (std::size_t i = 0; i < flat.params().size(); ++i) {
    for (double& v : flat.params().at(i).value.data) v = 0.0;
  }
  const std::vector<double> lp =
      score_sequence(flat, tokenize("does it fit ?", vocab), tokenize("yah baith gaa kya ?", vocab));
  ASSERT_EQ(lp.size(), 6u);
  for (double x : lp) EXPECT_NEAR(x, -std::log(static_cast<double>(vocab.size())), 1e-12);
}

}  // namespace
}  // namespace rfmt
