#include <gtest/gtest.h>

#include <algorithm>

#include "rfmt/models/beam.h"
#include "rfmt/rerank/rerank.h"
#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"
#include "test_support.h"

namespace rfmt {
namespace {

Candidate cand(double logprob) {
  Candidate c;
  c.total_logprob = logprob;
  return c;
}

TEST(PickBest, ArgmaxThenLogprobThenIndex) {
  EXPECT_EQ(pick_best({-3.0, -1.0, -2.0}, {cand(0), cand(0), cand(0)}), 1u);
  EXPECT_EQ(pick_best({-1.0, -1.0}, {cand(-5), cand(-2)}), 1u);
  EXPECT_EQ(pick_best({-1.0, -1.0, -1.0}, {cand(-2), cand(-2), cand(-2)}), 0u);
  EXPECT_THROW(pick_best({}, {}), DataError);
  EXPECT_THROW(pick_best({1.0}, {cand(0), cand(0)}), DataError);
}

TEST(PickBest, ShiftInvariant) {
  const std::vector<double> s = {-2.5, -0.5, -0.7, -9.0};
  const std::vector<Candidate> c = {cand(-1), cand(-2), cand(-3), cand(-4)};
  std::vector<double> shifted = s;
  for (double& v : shifted) v += 3.0;
  EXPECT_EQ(pick_best(s, c), pick_best(shifted, c));
}

class RerankFixture : public ::testing::Test {
 protected:
  Vocab vocab = testing::task_vocab();
  NmtModel model{testing::tiny_dims(), vocab.size(), 2};
  MaskedLm mlm{testing::tiny_dims(), vocab.size(), 3};
  TokenSeq src = tokenize("it works with oppo", vocab);
};

TEST_F(RerankFixture, BeamOneChoosesGreedy) {
  const RerankChoice r = rerank(model, mlm, vocab, src, 1, true, 6);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.chosen().tokens, greedy_decode(model, vocab, src, 6).tokens);
}

TEST_F(RerankFixture, ChosenHasTheMaximumScore) {
  const RerankChoice r = rerank(model, mlm, vocab, src, 5, true, 6);
  ASSERT_EQ(r.scores.size(), r.candidates.size());
  EXPECT_EQ(r.scores[r.chosen_index], *std::max_element(r.scores.begin(), r.scores.end()));
}

}  // namespace
}  // namespace rfmt
