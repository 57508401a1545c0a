#include "rfmt/tensor/grad_check.h"

#include <algorithm>
#include <cmath>

#include "rfmt/util/error.h"

namespace rfmt {
namespace {

double forward(const GraphBuilder& builder) {
  Graph g(Mode::kEval);
  const Var loss = builder(g);
  return g.value(loss).item();
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& builder, ParameterStore& store,
                           const std::vector<std::size_t>& params, const GradCheckOptions& options) {
  Graph g(Mode::kEval);
  const Var loss = builder(g);
  const double base = g.value(loss).item();
  if (forward(builder) != base) {
    throw Error("grad_check: builder is not deterministic (repeated forward passes differ)");
  }
  const GradientMap grads = g.backward(loss);

  GradCheckResult result;
  for (std::size_t pid : params) {
    Tensor& value = store.at(pid).value;
    const std::size_t n = value.size();
    const std::size_t budget = options.max_elements_per_param == 0 ? n : std::min(n, options.max_elements_per_param);
    const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, budget));
    const auto it = grads.find(pid);
    for (std::size_t c = 0, i = 0; c < budget && i < n; ++c, i += stride) {
      const double saved = value.data[i];
      value.data[i] = saved + options.eps;
      const double up = forward(builder);
      value.data[i] = saved - options.eps;
      const double down = forward(builder);
      value.data[i] = saved;

      const double numeric = (up - down) / (2.0 * options.eps);
      const double analytic = it == grads.end() ? 0.0 : it->second.data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = pid;
        result.worst_element = i;
      }
    }
  }
  return result;
}

}  // namespace rfmt
