#include <cstdlib>
#include <sstream>

#include "rfmt/noise/noise.h"
#include "rfmt/util/error.h"
#include "rfmt/util/io.h"

namespace rfmt {

KeyboardMap KeyboardMap::parse(std::string_view text) {
  KeyboardMap km;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    std::string adj;
    ls >> key >> adj;
    if (key.size() != 1 || adj.empty()) throw DataError("keyboard map: bad line '" + line + "'");
    km.adjacent_[key[0]] = adj;
  }
  if (km.adjacent_.empty()) throw DataError("keyboard map: empty");
  return km;
}

KeyboardMap KeyboardMap::load(const std::string& path) { return parse(read_file(path)); }

KeyboardMap KeyboardMap::qwerty() {
  const char* env = std::getenv("RFMT_DATA_DIR");
  const std::string dir = env ? env : RFMT_DATA_DIR;
  return load(dir + "/keyboard_qwerty.txt");
}

const std::string& KeyboardMap::neighbors(char c) const {
  static const std::string kNone;
  const auto it = adjacent_.find(c);
  return it == adjacent_.end() ? kNone : it->second;
}

bool KeyboardMap::symmetric() const {
  for (const auto& [key, adj] : adjacent_) {
    for (char n : adj) {
      if (neighbors(n).find(key) == std::string::npos) return false;
    }
  }
  return true;
}

}  // namespace rfmt
