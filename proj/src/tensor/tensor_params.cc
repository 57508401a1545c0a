#include "rfmt/tensor/parameter.h"
#include "rfmt/util/error.h"

namespace rfmt {

std::size_t ParameterStore::add(std::string name, Tensor init) {
  if (by_name_.count(name)) throw Error("parameter '" + name + "' registered twice");
  const std::size_t id = params_.size();
  by_name_.emplace(name, id);
  params_.push_back(Parameter{std::move(name), std::move(init)});
  return id;
}

std::size_t ParameterStore::find(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw DataError("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

bool ParameterStore::all_finite() const {
  for (const Parameter& p : params_) {
    if (!p.value.all_finite()) return false;
  }
  return true;
}

}  // namespace rfmt
