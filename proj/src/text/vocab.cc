#include "rfmt/text/vocab.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "rfmt/text/tokenize.h"
#include "rfmt/util/error.h"

namespace rfmt {
namespace {

constexpr std::string_view kReservedNames[] = {"<pad>", "<s>", "</s>", "<unk>", "<mask>"};
constexpr std::string_view kHeader = "rfmt-vocab";

}  // namespace

Vocab::Vocab() {
  for (std::string_view name : kReservedNames) add(name);
}

Vocab Vocab::build(const std::vector<std::string>& corpus, int min_count) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  std::map<std::string, long> counts;
  for (const std::string& line : corpus) {
    for (std::string& w : split_words(line)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, n] : kept) v.add(tok);
  v.add(kQuestionMark);
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

TokenId Vocab::add(std::string_view token) {
  const auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

void Vocab::save(std::ostream& out) const {
  out << kHeader << ' ' << kFormatVersion << '\n';
  for (std::size_t i = kNumReserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocab Vocab::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("vocab: missing header");
  std::istringstream header(line);
  std::string magic;
  int version = 0;
  header >> magic >> version;
  if (magic != kHeader) throw DataError("vocab: bad header '" + line + "'");
  if (version != kFormatVersion) throw DataError("vocab: unsupported version " + std::to_string(version));
  Vocab v;
  while (std::getline(in, line)) {
    if (line.empty()) throw DataError("vocab: empty token line");
    if (v.contains(line)) throw DataError("vocab: duplicate token '" + line + "'");
    v.add(line);
  }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  save(out);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return load(in);
}

}  // namespace rfmt
