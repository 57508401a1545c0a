#include "rfmt/models/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "rfmt/util/io.h"

namespace rfmt {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw TruncatedCheckpointError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ParameterStore& store, std::uint64_t architecture_hash, std::uint64_t step) {
  if (!store.all_finite()) throw NumericError("refusing to save non-finite parameters");
  std::string out = "RFMT";
  put<std::uint8_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, architecture_hash);
  put<std::uint64_t>(out, step);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter& p = store.at(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (std::size_t dim : p.value.shape) put<std::uint64_t>(out, dim);
    for (double v : p.value.data) put<double>(out, v);
  }
  return out;
}

CheckpointHeader deserialize_checkpoint(const std::string& bytes, ParameterStore& store,
                                        std::uint64_t expected_architecture_hash) {
  if (bytes.size() < 4) throw TruncatedCheckpointError("checkpoint truncated");
  if (bytes.compare(0, 4, "RFMT") != 0) throw BadMagicError("not a checkpoint (bad magic)");
  Reader r(bytes);
  r.get_string(4);
  CheckpointHeader h;
  h.version = r.get<std::uint8_t>();
  if (h.version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint format version " + std::to_string(h.version) + ", expected " +
                               std::to_string(kCheckpointVersion));
  }
  h.architecture_hash = r.get<std::uint64_t>();
  h.step = r.get<std::uint64_t>();
  if (h.architecture_hash != expected_architecture_hash) {
    throw ArchitectureMismatchError("checkpoint architecture hash does not match the model");
  }

  std::vector<Tensor> loaded(store.size());
  std::vector<bool> seen(store.size(), false);
  while (!r.done()) {
    const std::string name = r.get_string(r.get<std::uint32_t>());
    const std::uint32_t rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& dim : shape) dim = static_cast<std::size_t>(r.get<std::uint64_t>());
    std::size_t id = 0;
    try {
      id = store.find(name);
    } catch (const DataError&) {
      throw ArchitectureMismatchError("checkpoint tensor '" + name + "' not in the model");
    }
    if (shape != store.at(id).value.shape) {
      throw ArchitectureMismatchError("checkpoint tensor '" + name + "' has shape " + shape_string(shape));
    }
    Tensor t(shape);
    for (double& v : t.data) v = r.get<double>();
    loaded[id] = std::move(t);
    seen[id] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw TruncatedCheckpointError("checkpoint lacks tensor '" + store.at(i).name + "'");
  }
  for (std::size_t i = 0; i < loaded.size(); ++i) store.at(i).value = std::move(loaded[i]);
  return h;
}

void save_checkpoint(const std::string& path, const ParameterStore& store, std::uint64_t architecture_hash,
                     std::uint64_t step) {
  write_file_atomic(path, serialize_checkpoint(store, architecture_hash, step));
}

CheckpointHeader load_checkpoint(const std::string& path, ParameterStore& store,
                                 std::uint64_t expected_architecture_hash) {
  return deserialize_checkpoint(read_file(path), store, expected_architecture_hash);
}

}  // namespace rfmt
