#include "rfmt/metrics/bootstrap.h"

#include <cstdio>

#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"

namespace rfmt {

double paired_bootstrap(const std::vector<std::string>& hyp_a, const std::vector<std::string>& hyp_b,
                        const std::vector<std::string>& refs, std::size_t resamples, std::uint64_t seed) {
  if (hyp_a.size() != refs.size() || hyp_b.size() != refs.size()) {
    throw DataError("paired_bootstrap: line counts differ");
  }
  if (resamples < 100) throw DataError("paired_bootstrap: need at least 100 resamples");
  if (refs.empty()) throw DataError("paired_bootstrap: empty test set");
  std::vector<BleuStats> sa;
  std::vector<BleuStats> sb;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto ref = split_words(refs[i]);
    sa.push_back(bleu_stats(split_words(hyp_a[i]), ref));
    sb.push_back(bleu_stats(split_words(hyp_b[i]), ref));
  }
  Rng rng(seed);
  std::size_t wins_b = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    BleuStats a;
    BleuStats b;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const std::size_t k = rng.below(refs.size());
      a += sa[k];
      b += sb[k];
    }
    if (bleu_from_stats(b, false) >= bleu_from_stats(a, false)) ++wins_b;
  }
  return static_cast<double>(wins_b) / static_cast<double>(resamples);
}

EvalReport evaluate(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) throw DataError("evaluate: hypothesis/reference line counts differ");
  EvalReport rep;
  std::size_t questions = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = split_words(hyps[i]);
    const auto r = split_words(refs[i]);
    const BleuStats bs = bleu_stats(h, r);
    rep.bleu_counts += bs;
    rep.sentence_bleu.push_back(bleu_from_stats(bs, true));
    const TerStats ts = ter_stats(h, r);
    rep.edits += ts.edits;
    rep.shifts += ts.shifts;
    rep.ref_words += ts.ref_len;
    rep.sentence_ter.push_back(ts.score());
    if (ends_with_question_mark(hyps[i])) ++questions;
  }
  rep.bleu = bleu_from_stats(rep.bleu_counts, false);
  rep.ter = rep.ref_words ? static_cast<double>(rep.edits + rep.shifts) / static_cast<double>(rep.ref_words) : 0.0;
  rep.question_mark_rate = hyps.empty() ? 0.0 : 100.0 * static_cast<double>(questions) / static_cast<double>(hyps.size());
  return rep;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["bleu"] = bleu;
  j["ter"] = ter;
  j["question_mark_rate"] = question_mark_rate;
  j["counts"] = {{"matches", bleu_counts.matches},
                 {"totals", bleu_counts.totals},
                 {"hyp_len", bleu_counts.hyp_len},
                 {"ref_len", bleu_counts.ref_len},
                 {"edits", edits},
                 {"shifts", shifts},
                 {"ref_words", ref_words}};
  j["sentence_bleu"] = sentence_bleu;
  j["sentence_ter"] = sentence_ter;
  j["tokenizer"] = "word-level (whitespace, terminal punctuation split)";
  j["ter_max_shift"] = kTerMaxShift;
  return j;
}

std::string EvalReport::to_table() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s\n%-8s %8.2f %8.2f %8.1f\n", "lines", "BLEU", "TER", "?-rate",
                std::to_string(sentence_bleu.size()).c_str(), bleu, 100.0 * ter, question_mark_rate);
  return buf;
}

}  // namespace rfmt
