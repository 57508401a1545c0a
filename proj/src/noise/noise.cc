#include "rfmt/noise/noise.h"

#include <cctype>

#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

bool is_vowel(char lower) { return lower == 'a' || lower == 'e' || lower == 'i' || lower == 'o' || lower == 'u'; }

char with_case(char lower, bool upper) {
  return upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(lower))) : lower;
}

}  // namespace

std::string inject_noise(std::string_view text, const NoiseConfig& cfg, const KeyboardMap& keyboard,
                         NoiseStats* stats) {
  Rng rng(cfg.seed);
  NoiseStats local;
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (!std::isalpha(static_cast<unsigned char>(c))) {
      out += c;
      continue;
    }
    const bool upper = std::isupper(static_cast<unsigned char>(c)) != 0;
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    ++local.letters;
    // Three draws per letter regardless of outcome keep streams aligned.
    const double u_vowel = rng.uniform();
    const double u_natural = rng.uniform();
    const double u_keyboard = rng.uniform();
    const std::uint64_t pick = rng.next();

    if (is_vowel(lower)) {
      ++local.vowels;
      if (u_vowel < cfg.vowel_p) {
        ++local.dropped;
        continue;
      }
    }
    if (u_natural < cfg.natural_p) {
      char r = static_cast<char>('a' + pick % 25);
      if (r >= lower) ++r;  // uniform over the 25 other letters
      out += with_case(r, upper);
      ++local.natural;
      continue;
    }
    const std::string& adj = keyboard.neighbors(lower);
    if (u_keyboard < cfg.keyboard_p && !adj.empty()) {
      out += with_case(adj[pick % adj.size()], upper);
      ++local.keyboard;
      continue;
    }
    out += c;
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace rfmt
