#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "rfmt/scoring/scoring.h"

namespace rfmt {

enum class RiskMode { kLiteral, kNormalized };

std::string to_string(RiskMode m);
RiskMode risk_mode_from(const std::string& s);

struct TrainConfig {
  std::size_t max_source_tokens_per_batch = 200;
  std::size_t steps = 5000;
  std::size_t checkpoint_every = 250;
  double lr = 1e-3;
  std::size_t warmup = 400;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double clip_norm = 1.0;
  double label_smoothing = 0.1;
  std::size_t beam = 5;
  std::size_t max_len = 0;  // 0 = 2 * |src| + 10
  ScoreWeights weights;
  RiskMode risk_mode = RiskMode::kNormalized;
  // Subtract the mean risk over a sentence's candidates.
  bool risk_baseline = false;
  // Q = softmax(sharpness * log P) in normalized mode.
  double risk_sharpness = 1.0;
  // Fraction of tokens masked per sentence when training a masked LM.
  double mask_fraction = 0.15;
  std::size_t seed = 1;

  // Throws DataError for non-positive counts, probabilities outside [0, 1],
  // or invalid weights.
  void validate(bool mrt) const;

  nlohmann::json to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

}  // namespace rfmt
