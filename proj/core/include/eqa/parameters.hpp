#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "eqa/autodiff.hpp"
#include "eqa/tensor.hpp"

namespace eqa {

struct Parameter {
  std::string name;
  Tensor value;
};

// Ordered collection of named weights. Order is stable and defines the
// layout used by optimizers and checkpoints.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  const Parameter* find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&);

 private:
  std::vector<Parameter> params_;
};

bool operator==(const Parameter& a, const Parameter& b);

// Places every parameter on the tape, as a gradient-tracked leaf when `track`
// is set and as a constant otherwise.
std::vector<ad::Var> bind_parameters(ad::Tape& tape, const ParameterSet& params, bool track);

}  // namespace eqa
