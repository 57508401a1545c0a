#include "rfmt/tensor/adam.h"

#include <algorithm>
#include <cmath>

namespace rfmt {

Adam::Adam(ParameterStore& store, AdamOptions options) : store_(store), options_(options) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.emplace_back(store.at(i).value.shape);
    v_.emplace_back(store.at(i).value.shape);
  }
}

double Adam::step(const GradientMap& grads, double lr) {
  double sq = 0.0;
  for (const auto& [id, g] : grads) {
    for (double x : g.data) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  const double clip = options_.clip_norm > 0.0 && norm > options_.clip_norm ? options_.clip_norm / norm : 1.0;

  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& [id, g] : grads) {
    Tensor& w = store_.at(id).value;
    Tensor& m = m_.at(id);
    Tensor& v = v_.at(id);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.data[i] * clip;
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
      const double mhat = m.data[i] / c1;
      const double vhat = v.data[i] / c2;
      w.data[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
  return norm;
}

double inverse_sqrt_lr(double peak, std::size_t warmup, std::size_t step) {
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  if (warmup == 0) return peak;
  const double w = static_cast<double>(warmup);
  return s < w ? peak * s / w : peak * std::sqrt(w / s);
}

}  // namespace rfmt
