#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace rfmt {

// Character -> physically adjacent characters.
class KeyboardMap {
 public:
  // Lines "<key> <neighbors>"; '#' starts a comment.
  static KeyboardMap parse(std::string_view text);
  static KeyboardMap load(const std::string& path);
  // data/keyboard_qwerty.txt from the data directory (RFMT_DATA_DIR overrides).
  static KeyboardMap qwerty();

  const std::string& neighbors(char c) const;
  bool symmetric() const;
  const std::map<char, std::string>& table() const { return adjacent_; }

 private:
  std::map<char, std::string> adjacent_;
};

struct NoiseConfig {
  double natural_p = 0.0;   // replace a letter by a different random letter
  double keyboard_p = 0.0;  // replace a letter by an adjacent key
  double vowel_p = 0.0;     // drop a vowel
  std::uint64_t seed = 0;
};

struct NoiseStats {
  std::size_t letters = 0;
  std::size_t vowels = 0;
  std::size_t natural = 0;
  std::size_t keyboard = 0;
  std::size_t dropped = 0;
};

// Per letter, in this order: a vowel is dropped with vowel_p; otherwise it is
// replaced by a random different letter with natural_p; otherwise by a random
// adjacent key with keyboard_p. Non-letters (whitespace, digits, punctuation)
// are never touched. Case of replaced letters is preserved.
std::string inject_noise(std::string_view text, const NoiseConfig& cfg, const KeyboardMap& keyboard,
                         NoiseStats* stats = nullptr);

}  // namespace rfmt
