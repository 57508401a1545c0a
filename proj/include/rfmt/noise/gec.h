#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rfmt/corpus/task.h"

namespace rfmt {

// Any source-side text -> text corrector.
using Corrector = std::function<std::string(const std::string&)>;

Corrector identity_corrector();

std::size_t edit_distance(const std::string& a, const std::string& b);

// Deterministic rule-based corrector over the task lexicon:
//  1. typo repair: an out-of-lexicon word whose nearest lexicon word is at
//     distance 1 or 2, and is the only word at that distance, is replaced;
//  2. a known declarative frame is rewritten into its question frame;
//  3. terminal "?" restoration (normalize_question).
// Input is lowercased first. Idempotent on its own output.
class RuleGec {
 public:
  explicit RuleGec(TaskSpec spec);

  std::string operator()(const std::string& text) const;
  std::string repair_word(const std::string& word) const;

  Corrector as_corrector() const;

 private:
  TaskSpec spec_;
  std::vector<std::string> lexicon_;
};

}  // namespace rfmt
