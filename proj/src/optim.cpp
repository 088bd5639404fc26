#include "latgen/optim.hpp"

#include <cmath>

namespace latgen {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : config(cfg) {
  for (const auto& p : params.all()) {
    m.push_back(Tensor::Zero(p.value.rows(), p.value.cols()));
    v.push_back(Tensor::Zero(p.value.rows(), p.value.cols()));
  }
}

void adam_step(ParamStore& params, AdamState& state) {
  auto& all = params.all();
  if (state.m.size() != all.size()) throw std::logic_error("adam_step: state built for a different ParamStore");
  for (const auto& p : all) {
    if (p.trainable && !p.grad.allFinite()) throw NonFiniteGradient("non-finite gradient in parameter '" + p.name + "'");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < all.size(); ++i) {
    Parameter& p = all[i];
    if (!p.trainable) continue;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  }
}

double grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& p : params.all())
    if (p.trainable) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params.all())
      if (p.trainable) p.grad *= factor;
  }
  return norm;
}

}  // namespace latgen
