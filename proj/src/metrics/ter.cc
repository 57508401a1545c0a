#include "rfmt/metrics/ter.h"

#include <algorithm>

#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"

namespace rfmt {
namespace {

bool occurs_in(const std::vector<std::string>& ref, const std::vector<std::string>& hyp, std::size_t begin,
               std::size_t len) {
  if (len > ref.size()) return false;
  for (std::size_t j = 0; j + len <= ref.size(); ++j) {
    if (std::equal(hyp.begin() + begin, hyp.begin() + begin + len, ref.begin() + j)) return true;
  }
  return false;
}

// hyp with [begin, begin + len) moved so it starts at `dest` of the remainder.
std::vector<std::string> moved(const std::vector<std::string>& hyp, std::size_t begin, std::size_t len,
                               std::size_t dest) {
  std::vector<std::string> block(hyp.begin() + begin, hyp.begin() + begin + len);
  std::vector<std::string> rest(hyp.begin(), hyp.begin() + begin);
  rest.insert(rest.end(), hyp.begin() + begin + len, hyp.end());
  rest.insert(rest.begin() + dest, block.begin(), block.end());
  return rest;
}

}  // namespace

double TerStats::score() const { return static_cast<double>(edits + shifts) / static_cast<double>(ref_len); }

std::size_t word_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

TerStats ter_stats(const std::vector<std::string>& hyp_in, const std::vector<std::string>& ref,
                   const TerOptions& options) {
  if (ref.empty()) throw DataError("ter: empty reference");
  TerStats s;
  s.ref_len = ref.size();
  std::vector<std::string> hyp = hyp_in;
  std::size_t current = word_edit_distance(hyp, ref);
  while (options.shifts && current > 0) {
    std::size_t best = current;
    std::vector<std::string> best_hyp;
    for (std::size_t begin = 0; begin < hyp.size(); ++begin) {
      for (std::size_t len = 1; len <= options.max_shift && begin + len <= hyp.size(); ++len) {
        if (!occurs_in(ref, hyp, begin, len)) break;  // longer blocks cannot match either
        const std::size_t rest = hyp.size() - len;
        for (std::size_t dest = 0; dest <= rest; ++dest) {
          if (dest == begin) continue;
          std::vector<std::string> cand = moved(hyp, begin, len, dest);
          const std::size_t d = word_edit_distance(cand, ref);
          if (d < best) {
            best = d;
            best_hyp = std::move(cand);
          }
        }
      }
    }
    if (best_hyp.empty()) break;
    hyp = std::move(best_hyp);
    current = best;
    ++s.shifts;
  }
  s.edits = current;
  return s;
}

double corpus_ter(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                  const TerOptions& options) {
  if (hyps.size() != refs.size()) throw DataError("ter: hypothesis/reference line counts differ");
  std::size_t num = 0;
  std::size_t den = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const TerStats s = ter_stats(split_words(hyps[i]), split_words(refs[i]), options);
    num += s.edits + s.shifts;
    den += s.ref_len;
  }
  if (den == 0) throw DataError("ter: empty reference set");
  return static_cast<double>(num) / static_cast<double>(den);
}

double sentence_ter(const std::string& hyp, const std::string& ref, const TerOptions& options) {
  return ter_stats(split_words(hyp), split_words(ref), options).score();
}

}  // namespace rfmt
