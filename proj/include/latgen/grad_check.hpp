#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "latgen/params.hpp"

namespace latgen {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  std::size_t coordinates = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates checked per parameter; 0 checks all of them.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of a scalar objective against central
/// differences. Error per coordinate is |analytic - numeric| / max(1, |analytic|).
/// `objective` must build its value on the given tape from `params`.
GradCheckResult grad_check(const std::function<Var(Tape&)>& objective, ParamStore& params,
                           const GradCheckOptions& options = {});

}  // namespace latgen
