#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfmt/metrics/bleu.h"
#include "rfmt/metrics/ter.h"

namespace rfmt {

// Fraction of paired bootstrap resamples in which BLEU(b) >= BLEU(a).
// Requires equal line counts and resamples >= 100.
double paired_bootstrap(const std::vector<std::string>& hyp_a, const std::vector<std::string>& hyp_b,
                        const std::vector<std::string>& refs, std::size_t resamples, std::uint64_t seed);

struct EvalReport {
  double bleu = 0.0;
  double ter = 0.0;
  double question_mark_rate = 0.0;  // percent of hypotheses ending in "?"
  BleuStats bleu_counts;
  std::size_t edits = 0;
  std::size_t shifts = 0;
  std::size_t ref_words = 0;
  std::vector<double> sentence_bleu;
  std::vector<double> sentence_ter;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

EvalReport evaluate(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);

}  // namespace rfmt
