#include "rfmt/metrics/bleu.h"

#include <cmath>
#include <map>

#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"

namespace rfmt {
namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& words, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) ++counts[Ngram(words.begin() + i, words.begin() + i + n)];
  return counts;
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

BleuStats bleu_stats(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    for (const auto& [gram, count] : h) {
      auto it = r.find(gram);
      if (it != r.end()) s.matches[n - 1] += std::min(count, it->second);
    }
    s.totals[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  }
  return s;
}

double bleu_from_stats(const BleuStats& s, bool smooth) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  double zero_penalty = 1.0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    if (smooth) {
      if (s.totals[n] == 0) continue;
      double p;
      if (s.matches[n] == 0) {
        zero_penalty *= 2.0;
        p = 1.0 / (zero_penalty * static_cast<double>(s.totals[n]));
      } else {
        p = static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]);
      }
      log_sum += std::log(p);
    } else {
      if (s.matches[n] == 0) return 0.0;
      log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
    }
    ++orders;
  }
  if (orders == 0) return 0.0;
  const double bp = s.hyp_len < s.ref_len
                        ? std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len))
                        : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(orders));
}

double corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs, bool smooth) {
  if (hyps.size() != refs.size()) {
    throw DataError("bleu: " + std::to_string(hyps.size()) + " hypotheses vs " + std::to_string(refs.size()) +
                    " references");
  }
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += bleu_stats(split_words(hyps[i]), split_words(refs[i]));
  return bleu_from_stats(total, smooth);
}

double sentence_bleu(const std::string& hyp, const std::string& ref) {
  return bleu_from_stats(bleu_stats(split_words(hyp), split_words(ref)), true);
}

}  // namespace rfmt
