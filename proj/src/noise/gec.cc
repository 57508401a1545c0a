#include "rfmt/noise/gec.h"

#include <algorithm>
#include <cctype>
#include <memory>

#include "rfmt/text/tokenize.h"

namespace rfmt {
namespace {

bool is_punct_token(const std::string& w) { return w == "." || w == "?" || w == "!"; }

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Corrector identity_corrector() {
  return [](const std::string& s) { return s; };
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RuleGec::RuleGec(TaskSpec spec) : spec_(std::move(spec)), lexicon_(spec_.source_lexicon()) {}

std::string RuleGec::repair_word(const std::string& word) const {
  if (is_punct_token(word) || std::binary_search(lexicon_.begin(), lexicon_.end(), word)) return word;
  std::size_t best = 3;
  std::size_t ties = 0;
  const std::string* choice = nullptr;
  for (const std::string& cand : lexicon_) {
    const std::size_t gap = cand.size() > word.size() ? cand.size() - word.size() : word.size() - cand.size();
    if (gap > 2) continue;
    const std::size_t d = edit_distance(word, cand);
    if (d < best) {
      best = d;
      ties = 1;
      choice = &cand;
    } else if (d == best) {
      ++ties;
    }
  }
  return best <= 2 && ties == 1 ? *choice : word;
}

std::string RuleGec::operator()(const std::string& text) const {
  std::vector<std::string> words = split_words(lowercase(text));
  for (std::string& w : words) w = repair_word(w);

  std::vector<std::string> body = words;
  while (!body.empty() && is_punct_token(body.back())) body.pop_back();
  for (std::size_t f = 0; f < spec_.frames.size(); ++f) {
    if (auto fillers = match_form(spec_, spec_.frames[f].statement, body)) {
      std::string q = render(spec_, f, SentenceForm::kQuestion, *fillers);
      return q;
    }
  }
  std::string out;
  for (const std::string& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return normalize_question(out);
}

Corrector RuleGec::as_corrector() const {
  auto self = std::make_shared<RuleGec>(*this);
  return [self](const std::string& s) { return (*self)(s); };
}

}  // namespace rfmt
