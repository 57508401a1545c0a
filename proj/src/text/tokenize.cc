#include "rfmt/text/tokenize.h"

#include <cctype>

namespace rfmt {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

}  // namespace

std::string TokenSeq::text() const { return detokenize(*this); }

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      std::string_view word = text.substr(i, j - i);
      std::size_t stem = word.size();
      while (stem > 0 && is_terminal(word[stem - 1])) --stem;
      if (stem > 0) out.emplace_back(word.substr(0, stem));
      for (std::size_t k = stem; k < word.size(); ++k) out.emplace_back(1, word[k]);
    }
    i = j;
  }
  return out;
}

std::string canonical(std::string_view text) {
  std::string out;
  for (const std::string& w : split_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
  TokenSeq seq;
  seq.tokens = split_words(text);
  seq.ids.reserve(seq.tokens.size());
  for (const std::string& t : seq.tokens) seq.ids.push_back(vocab.id(t));
  return seq;
}

TokenSeq from_ids(const std::vector<TokenId>& ids, const Vocab& vocab) {
  TokenSeq seq;
  seq.ids = ids;
  seq.tokens.reserve(ids.size());
  for (TokenId id : ids) seq.tokens.push_back(vocab.token(id));
  return seq;
}

std::string detokenize(const TokenSeq& seq) {
  std::string out;
  for (const std::string& t : seq.tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string normalize_question(std::string_view text) {
  std::size_t end = text.size();
  while (end > 0 && (text[end - 1] == '.' || is_space(text[end - 1]))) --end;
  std::string out(text.substr(0, end));
  if (out.empty()) return std::string(kQuestionMark);
  if (out.back() != '?') out += " ?";
  return out;
}

bool ends_with_question_mark(std::string_view text) {
  std::size_t end = text.size();
  while (end > 0 && is_space(text[end - 1])) --end;
  return end > 0 && text[end - 1] == '?';
}

}  // namespace rfmt
