#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rfmt/tensor/graph.h"
#include "rfmt/tensor/parameter.h"

namespace rfmt {

// Builds a scalar loss over the parameters of `store`. Must be deterministic.
using GraphBuilder = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double eps = 1e-5;
  // Elements checked per parameter tensor; 0 = all. Sampled elements are a
  // fixed stride through the tensor so reruns check the same ones.
  std::size_t max_elements_per_param = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_element = 0;
};

// Compares backward() against central finite differences. The relative error
// of one element is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// `params` lists the parameter ids to check. Throws Error if two identical
// forward passes disagree (non-deterministic builder).
GradCheckResult grad_check(const GraphBuilder& builder, ParameterStore& store,
                           const std::vector<std::size_t>& params, const GradCheckOptions& options = {});

}  // namespace rfmt
