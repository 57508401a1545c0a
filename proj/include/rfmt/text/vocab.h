#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rfmt {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kMask = 4;
inline constexpr TokenId kNumReserved = 5;

inline constexpr std::string_view kQuestionMark = "?";

// Dense token index. Reserved ids come first; "?" is always present.
class Vocab {
 public:
  Vocab();

  // Tokens with count >= min_count, ordered by count desc then lexicographic.
  // Throws DataError on an empty corpus.
  static Vocab build(const std::vector<std::string>& corpus, int min_count);

  TokenId id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  // Appends if missing; returns the id.
  TokenId add(std::string_view token);

  // "rfmt-vocab <version>" header, then one non-reserved token per line;
  // line i (0-based, after the header) holds id i + kNumReserved.
  void save(std::ostream& out) const;
  static Vocab load(std::istream& in);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

  static constexpr int kFormatVersion = 1;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace rfmt
