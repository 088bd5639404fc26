#include "latgen/params.hpp"

#include <cstring>
#include <stdexcept>

namespace latgen {

Parameter& ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  params_.emplace_back(std::move(name), std::move(value), trainable);
  return params_.back();
}

Parameter* ParamStore::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Parameter& ParamStore::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("ParamStore: no parameter '" + std::string(name) + "'");
}

const Parameter& ParamStore::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw std::out_of_range("ParamStore: no parameter '" + std::string(name) + "'");
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::size_t ParamStore::trainable_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool ParamStore::identical_to(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
    if (std::memcmp(a.value.data(), b.value.data(), sizeof(double) * static_cast<std::size_t>(a.value.size())) != 0)
      return false;
  }
  return true;
}

}  // namespace latgen
