#pragma once

// The synthetic noisy-question language pair.
//
// Source sentences are instantiations of a small set of frames. Each frame has
// an interrogative form ("does it work with {X} ?") and a declarative form
// ("it works with {X} ."), plus a fixed word-order permutation into the target
// language. Target words come from an injective word-level dictionary that
// shares no surface tokens with the source (punctuation aside).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rfmt {

struct Frame {
  std::string id;
  // Space-separated words; "{X}" / "{Y}" are entity slots. No punctuation.
  std::string question;
  std::string statement;
  // Target position k takes source piece question_order[k] (pieces = words and
  // slots of the pattern, in order).
  std::vector<int> question_order;
  std::vector<int> statement_order;
};

struct NoiseProfile {
  double drop_qmark = 0.0;    // p_q: remove the final "?"
  double declarative = 0.0;   // p_d: statement word order
  double typo = 0.0;          // p_t: one character-level typo in one word
};

struct TaskSpec {
  std::vector<Frame> frames;
  std::vector<std::string> brands;
  std::vector<std::string> models;
  // Source word -> target word for every non-entity word used by any frame.
  std::map<std::string, std::string> dictionary;
  std::string particle = "kya";
  NoiseProfile noise;
  // Fraction of generated lines that are clean statements (general-domain
  // text); statements carry no noise.
  double statement_fraction = 0.0;
  std::size_t size = 1000;
  std::uint64_t seed = 1;

  static TaskSpec default_spec();

  // Entity phrases: every brand alone, then every "brand model".
  std::vector<std::string> entities() const;
  // All source words (frame words in both forms plus entity words).
  std::vector<std::string> source_lexicon() const;
  // Target word for a source word; entity words use a vowel-rotation rule.
  std::string target_word(const std::string& source_word) const;
  // Oracle lemma shared by a word and its translation; the particle shares
  // the lemma of "?".
  std::map<std::string, std::string> lemma_table() const;

  // Throws DataError when probabilities are outside [0, 1], the lexicon is
  // empty, or the target dictionary is not injective / overlaps the source.
  void validate() const;

  nlohmann::json to_json() const;
  static TaskSpec from_json(const nlohmann::json& j);
};

enum class SentenceForm { kQuestion, kStatement };

// A clean source parsed back into its frame and slot fillers.
struct ParsedSource {
  std::size_t frame = 0;
  SentenceForm form = SentenceForm::kQuestion;
  std::vector<std::string> fillers;
};

std::string render(const TaskSpec& spec, std::size_t frame, SentenceForm form,
                   const std::vector<std::string>& fillers);

// Clean sentence -> frame/form/fillers, or nullopt if it is not a clean
// instantiation (questions end with "?", statements with ".").
std::optional<ParsedSource> parse_clean(const TaskSpec& spec, const std::string& text);

// Matches `text` (no final punctuation) against a frame's form, capturing
// entity fillers. Case-sensitive; callers lowercase first.
std::optional<std::vector<std::string>> match_form(const TaskSpec& spec, const std::string& pattern,
                                                   const std::vector<std::string>& words);

// The reference translation. Throws DataError for text outside the task.
std::string gold_translate(const TaskSpec& spec, const std::string& clean_src);

}  // namespace rfmt
