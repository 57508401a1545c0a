#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "rfmt/tensor/tensor.h"

namespace rfmt {

struct Parameter {
  std::string name;
  Tensor value;
};

// Owns the trainable tensors of one model. Ids are dense and stable; element
// addresses never move once added.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor init);

  Parameter& at(std::size_t id) { return params_.at(id); }
  const Parameter& at(std::size_t id) const { return params_.at(id); }
  std::size_t size() const { return params_.size(); }

  // Throws DataError when absent.
  std::size_t find(const std::string& name) const;

  std::size_t element_count() const;
  bool all_finite() const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> by_name_;
};

// Parameter id -> gradient with the parameter's shape. Missing entry == zero.
using GradientMap = std::map<std::size_t, Tensor>;

}  // namespace rfmt
