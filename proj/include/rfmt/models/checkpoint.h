#pragma once

// Binary parameter snapshots:
//   "RFMT" | u8 version | u64 architecture hash | u64 step |
//   repeated until EOF: u32 name length, name, u32 rank, u64 dims[rank],
//                       f64 values[numel]
// All integers and floats little-endian.

#include <cstdint>
#include <string>

#include "rfmt/tensor/parameter.h"
#include "rfmt/util/error.h"

namespace rfmt {

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};
class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ArchitectureMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct CheckpointHeader {
  std::uint8_t version = kCheckpointVersion;
  std::uint64_t architecture_hash = 0;
  std::uint64_t step = 0;
};

// Throws NumericError when a parameter is not finite. Written atomically.
void save_checkpoint(const std::string& path, const ParameterStore& store, std::uint64_t architecture_hash,
                     std::uint64_t step);

// Replaces every parameter of `store` or leaves it untouched on error.
CheckpointHeader load_checkpoint(const std::string& path, ParameterStore& store,
                                 std::uint64_t expected_architecture_hash);

std::string serialize_checkpoint(const ParameterStore& store, std::uint64_t architecture_hash, std::uint64_t step);
CheckpointHeader deserialize_checkpoint(const std::string& bytes, ParameterStore& store,
                                        std::uint64_t expected_architecture_hash);

template <typename Model>
void save_model(const std::string& path, const Model& model, std::uint64_t step) {
  save_checkpoint(path, model.params(), model.architecture_hash(), step);
}

template <typename Model>
CheckpointHeader load_model(const std::string& path, Model& model) {
  return load_checkpoint(path, model.params(), model.architecture_hash());
}

}  // namespace rfmt
