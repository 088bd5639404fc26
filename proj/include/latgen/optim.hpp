#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "latgen/params.hpp"

namespace latgen {

class NonFiniteGradient : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for every parameter of one ParamStore, in store order.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  AdamState(const ParamStore& params, AdamConfig cfg);
};

/// Bias-corrected Adam update of every trainable parameter from its .grad.
/// Throws NonFiniteGradient naming the first parameter with a NaN/Inf gradient;
/// no parameter is modified in that case.
void adam_step(ParamStore& params, AdamState& state);

/// Global L2 norm of all trainable gradients.
double grad_norm(const ParamStore& params);

/// Rescales gradients so their global norm is at most max_norm (<= 0 disables).
/// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace latgen
