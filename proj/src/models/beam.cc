#include "rfmt/models/beam.h"

#include <algorithm>
#include <cmath>

#include "rfmt/util/error.h"

namespace rfmt {
namespace {

struct Hyp {
  std::vector<TokenId> ids;
  std::vector<double> logprobs;
  double total = 0.0;
};

struct Expansion {
  double score;
  double total;
  std::size_t parent;
  TokenId token;
  double logprob;
};

double rank_score(double total, std::size_t len, bool normalize) {
  return normalize ? total / static_cast<double>(std::max<std::size_t>(len, 1)) : total;
}

bool expandable(TokenId t) { return t != kPad && t != kBos && t != kMask; }

Candidate to_candidate(const Hyp& h, const Vocab& vocab, bool finished) {
  Candidate c;
  c.tokens = from_ids(h.ids, vocab);
  c.token_logprobs = h.logprobs;
  c.total_logprob = 0.0;
  for (double lp : h.logprobs) c.total_logprob += lp;
  c.finished = finished;
  return c;
}

}  // namespace

std::vector<Candidate> beam_search(const NmtModel& model, const Vocab& vocab, const TokenSeq& src,
                                   const BeamOptions& options) {
  if (options.beam == 0) throw UsageError("beam_search: beam width must be >= 1");
  if (vocab.size() != model.vocab_size()) throw DataError("beam_search: vocab does not match the model");
  const std::size_t k = options.beam;
  const std::size_t max_len = options.max_len ? options.max_len : 2 * src.size() + 10;
  const std::vector<TokenId> src_ids = with_eos(src.ids);

  // Encoder states are computed once and copied into each step's graph.
  Tensor memory;
  {
    Graph g(Mode::kEval);
    memory = g.value(model.encode(g, TokenBatch::pack({src_ids})));
  }
  const std::size_t ts = memory.shape[1];
  const std::size_t d = memory.shape[2];

  std::vector<Hyp> live(1);
  std::vector<Hyp> finished;
  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    const std::size_t rows = live.size();
    Tensor tiled(Shape{rows, ts, d});
    for (std::size_t r = 0; r < rows; ++r) std::copy(memory.data.begin(), memory.data.end(), tiled.data.begin() + r * ts * d);
    std::vector<std::vector<TokenId>> prefixes;
    prefixes.reserve(rows);
    for (const Hyp& h : live) prefixes.push_back(with_bos(h.ids));

    Graph g(Mode::kEval);
    Var mem = g.constant(std::move(tiled));
    const TokenBatch sb = TokenBatch::pack(std::vector<std::vector<TokenId>>(rows, src_ids));
    Var lp = g.log_softmax(model.decode(g, mem, sb, TokenBatch::pack(prefixes), /*last_only=*/true), 2);
    const Tensor& logp = g.value(lp);  // [rows, 1, V]
    const std::size_t v = logp.shape[2];

    std::vector<Expansion> cands;
    cands.reserve(rows * v);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < v; ++t) {
        if (!expandable(static_cast<TokenId>(t))) continue;
        const double l = logp.data[r * v + t];
        const double total = live[r].total + l;
        cands.push_back({rank_score(total, live[r].ids.size() + 1, options.length_normalize), total, r,
                         static_cast<TokenId>(t), l});
      }
    }
    const std::size_t keep = std::min(cands.size(), 2 * k);
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Expansion& a, const Expansion& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });

    std::vector<Hyp> next;
    for (std::size_t i = 0; i < keep && next.size() < k && finished.size() < k; ++i) {
      const Expansion& e = cands[i];
      Hyp h = live[e.parent];
      h.logprobs.push_back(e.logprob);
      h.total = e.total;
      if (e.token == kEos) {
        finished.push_back(std::move(h));
      } else {
        h.ids.push_back(e.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (finished.size() >= k) break;
  }

  std::vector<Candidate> out;
  if (finished.empty()) {
    if (live.empty()) throw Error("beam_search: no hypotheses");
    out.push_back(to_candidate(live.front(), vocab, false));
    return out;
  }
  std::stable_sort(finished.begin(), finished.end(), [&](const Hyp& a, const Hyp& b) {
    return rank_score(a.total, a.logprobs.size(), options.length_normalize) >
           rank_score(b.total, b.logprobs.size(), options.length_normalize);
  });
  for (std::size_t i = 0; i < finished.size() && i < k; ++i) out.push_back(to_candidate(finished[i], vocab, true));
  return out;
}

Candidate greedy_decode(const NmtModel& model, const Vocab& vocab, const TokenSeq& src, std::size_t max_len) {
  BeamOptions o;
  o.beam = 1;
  o.max_len = max_len;
  return beam_search(model, vocab, src, o).front();
}

}  // namespace rfmt
