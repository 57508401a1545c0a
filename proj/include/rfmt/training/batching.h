#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rfmt {

// Groups consecutive items so that rows * longest row <= max_tokens per
// batch (padded source tokens). An item longer than max_tokens on its own
// gets a singleton batch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& lengths, std::size_t max_tokens);

// Cycles through batches, reshuffling their order at the start of each epoch.
class BatchStream {
 public:
  BatchStream(std::vector<std::vector<std::size_t>> batches, std::uint64_t seed);

  const std::vector<std::size_t>& next();
  std::size_t epoch() const { return epoch_; }
  std::size_t size() const { return batches_.size(); }

 private:
  void reshuffle();

  std::vector<std::vector<std::size_t>> batches_;
  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace rfmt
