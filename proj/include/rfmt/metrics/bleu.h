#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace rfmt {

inline constexpr std::size_t kBleuOrder = 4;

// Clipped n-gram match counts, n = 1..4. Integer counts, so any summation
// order gives the same result.
struct BleuStats {
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// BLEU in [0, 100]. Unsmoothed: any zero precision gives 0. Smoothed
// (exponential): the k-th zero-match order counts as 1 / (2^k * total), and
// only orders with a non-zero total enter the mean.
double bleu_from_stats(const BleuStats& s, bool smooth);

// Corpus BLEU over word-tokenized lines. Throws DataError on a line-count
// mismatch.
double corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs, bool smooth = false);

// Smoothed sentence BLEU in [0, 100].
double sentence_bleu(const std::string& hyp, const std::string& ref);

}  // namespace rfmt
