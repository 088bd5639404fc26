#pragma once

#include <deque>
#include <string>
#include <string_view>

#include "latgen/autodiff.hpp"

namespace latgen {

/// Ordered collection of named parameters with stable addresses.
class ParamStore {
public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  /// Number of trainable scalars.
  std::size_t trainable_scalars() const;
  /// True if every value and name matches bit-for-bit.
  bool identical_to(const ParamStore& other) const;

private:
  std::deque<Parameter> params_;
};

}  // namespace latgen
