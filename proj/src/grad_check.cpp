#include "latgen/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace latgen {

namespace {

double evaluate(const std::function<Var(Tape&)>& objective) {
  Tape tape(false);
  return objective(tape).scalar();
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Tape&)>& objective, ParamStore& params,
                           const GradCheckOptions& options) {
  params.zero_grad();
  {
    Tape tape;
    Var out = objective(tape);
    tape.backward(out);
  }
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    const Tensor analytic = p.grad;
    std::vector<Index> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (options.max_coords_per_param > 0 && coords.size() > options.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (Index k : coords) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate(objective);
      x = saved - options.step;
      const double down = evaluate(objective);
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.data()[k];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        result.worst_param = p.name;
        result.worst_index = k;
      }
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace latgen
