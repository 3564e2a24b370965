#include "eqa/parameters.hpp"

#include <stdexcept>

namespace eqa {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool operator==(const Parameter& a, const Parameter& b) { return a.name == b.name && a.value == b.value; }

bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.params_ == b.params_; }

std::vector<ad::Var> bind_parameters(ad::Tape& tape, const ParameterSet& params, bool track) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(track ? tape.variable(p.value) : tape.constant(p.value));
  return vars;
}

}  // namespace eqa
