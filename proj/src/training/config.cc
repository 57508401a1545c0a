#include "rfmt/training/config.h"

#include <set>

#include "rfmt/util/error.h"

namespace rfmt {

std::string to_string(RiskMode m) { return m == RiskMode::kLiteral ? "literal" : "normalized"; }

RiskMode risk_mode_from(const std::string& s) {
  if (s == "literal") return RiskMode::kLiteral;
  if (s == "normalized") return RiskMode::kNormalized;
  throw DataError("unknown risk_mode '" + s + "' (expected literal or normalized)");
}

void TrainConfig::validate(bool mrt) const {
  if (max_source_tokens_per_batch == 0 || steps == 0 || checkpoint_every == 0) {
    throw DataError("train config: counts must be positive");
  }
  if (!(lr > 0.0)) throw DataError("train config: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw DataError("train config: bad Adam betas");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw DataError("train config: label_smoothing outside [0, 1)");
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) throw DataError("train config: mask_fraction outside (0, 1]");
  if (beam == 0) throw DataError("train config: beam must be positive");
  if (mrt) {
    if (beam < 2) throw DataError("train config: MRT needs beam >= 2");
    if (weights.alpha < 0.0 || weights.beta < 0.0) throw DataError("train config: negative score weight");
    if (!(risk_sharpness > 0.0)) throw DataError("train config: risk_sharpness must be positive");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_source_tokens_per_batch", max_source_tokens_per_batch},
          {"steps", steps},
          {"checkpoint_every", checkpoint_every},
          {"lr", lr},
          {"warmup", warmup},
          {"beta1", beta1},
          {"beta2", beta2},
          {"clip_norm", clip_norm},
          {"label_smoothing", label_smoothing},
          {"beam", beam},
          {"max_len", max_len},
          {"alpha", weights.alpha},
          {"beta", weights.beta},
          {"mlm_normalize", weights.mlm_normalize},
          {"risk_mode", to_string(risk_mode)},
          {"risk_baseline", risk_baseline},
          {"risk_sharpness", risk_sharpness},
          {"mask_fraction", mask_fraction},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("train config: expected a JSON object");
  TrainConfig c;
  const std::set<std::string> known = [] {
    std::set<std::string> k;
    const nlohmann::json d = TrainConfig{}.to_json();
    for (const auto& [key, v] : d.items()) k.insert(key);
    return k;
  }();
  for (const auto& [key, v] : j.items()) {
    if (!known.count(key)) throw DataError("train config: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("max_source_tokens_per_batch", c.max_source_tokens_per_batch);
    get("steps", c.steps);
    get("checkpoint_every", c.checkpoint_every);
    get("lr", c.lr);
    get("warmup", c.warmup);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("clip_norm", c.clip_norm);
    get("label_smoothing", c.label_smoothing);
    get("beam", c.beam);
    get("max_len", c.max_len);
    get("alpha", c.weights.alpha);
    get("beta", c.weights.beta);
    get("mlm_normalize", c.weights.mlm_normalize);
    if (j.contains("risk_mode")) c.risk_mode = risk_mode_from(j.at("risk_mode").get<std::string>());
    get("risk_baseline", c.risk_baseline);
    get("risk_sharpness", c.risk_sharpness);
    get("mask_fraction", c.mask_fraction);
    get("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  return c;
}

}  // namespace rfmt
