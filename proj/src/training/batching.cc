#include "rfmt/training/batching.h"

#include <algorithm>
#include <numeric>

#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"

namespace rfmt {

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& lengths, std::size_t max_tokens) {
  if (max_tokens == 0) throw DataError("make_batches: max_tokens must be positive");
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> cur;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const std::size_t grown = std::max(longest, lengths[i]);
    if (!cur.empty() && (cur.size() + 1) * grown > max_tokens) {
      batches.push_back(std::move(cur));
      cur.clear();
      longest = 0;
    }
    cur.push_back(i);
    longest = std::max(longest, lengths[i]);
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

BatchStream::BatchStream(std::vector<std::vector<std::size_t>> batches, std::uint64_t seed)
    : batches_(std::move(batches)), seed_(seed) {
  if (batches_.empty()) throw TrainingError("no training batches");
  reshuffle();
}

void BatchStream::reshuffle() {
  order_.resize(batches_.size());
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng(derive_seed(seed_, epoch_));
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
}

const std::vector<std::size_t>& BatchStream::next() {
  if (cursor_ == order_.size()) {
    cursor_ = 0;
    ++epoch_;
    reshuffle();
  }
  return batches_[order_[cursor_++]];
}

}  // namespace rfmt
