#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rfmt {

inline constexpr std::size_t kTerMaxShift = 10;

struct TerStats {
  std::size_t edits = 0;   // insertions + deletions + substitutions after shifting
  std::size_t shifts = 0;
  std::size_t ref_len = 0;

  double score() const;  // (edits + shifts) / ref_len
};

struct TerOptions {
  bool shifts = true;
  std::size_t max_shift = kTerMaxShift;
};

std::size_t word_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Greedy shift search: each round applies the block move that most reduces
// the edit distance, where the block is at most max_shift words and exactly
// matches some reference span. Stops when no move helps. Throws DataError on
// an empty reference.
TerStats ter_stats(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                   const TerOptions& options = {});

// Corpus TER: total (edits + shifts) over total reference length.
double corpus_ter(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                  const TerOptions& options = {});

double sentence_ter(const std::string& hyp, const std::string& ref, const TerOptions& options = {});

}  // namespace rfmt
