#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rfmt/text/vocab.h"

namespace rfmt {

// A tokenized sentence. `tokens` keeps the surface form of every position so
// out-of-vocabulary words survive a round trip even though their id is kUnk.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> tokens;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  std::string text() const;
  bool operator==(const TokenSeq&) const = default;
};

// Whitespace split; trailing ".", "?" and "!" characters of a word become
// separate tokens.
std::vector<std::string> split_words(std::string_view text);

// split_words joined by single spaces.
std::string canonical(std::string_view text);

TokenSeq tokenize(std::string_view text, const Vocab& vocab);
TokenSeq from_ids(const std::vector<TokenId>& ids, const Vocab& vocab);
std::string detokenize(const TokenSeq& seq);

// Strips trailing full stops and whitespace, then appends " ?" unless the text
// already ends with "?". Empty input yields "?". Idempotent.
std::string normalize_question(std::string_view text);

bool ends_with_question_mark(std::string_view text);

}  // namespace rfmt
