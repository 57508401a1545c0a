#pragma once

#include <cstddef>
#include <vector>

#include "rfmt/tensor/parameter.h"

namespace rfmt {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  // Global L2 norm clip; <= 0 disables.
  double clip_norm = 1.0;
};

class Adam {
 public:
  Adam(ParameterStore& store, AdamOptions options);

  // One update with learning rate `lr` (the schedule lives with the caller).
  // Returns the gradient norm before clipping.
  double step(const GradientMap& grads, double lr);

  std::size_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  ParameterStore& store_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

// Linear warmup to `peak` over `warmup` steps, then inverse square-root decay.
double inverse_sqrt_lr(double peak, std::size_t warmup, std::size_t step);

}  // namespace rfmt
