#include "rateagg/rng.hpp"

#include "rateagg/types.hpp"

namespace rateagg {

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Fault("categorical draw with zero total weight");
  const double u = uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    cumulative += weights[k];
    last_positive = k;
    if (u < cumulative) return k;
  }
  // u landed in the rounding gap at the top of the range.
  return last_positive;
}

void Rng::dirichlet(std::span<const double> params, std::span<double> out) {
  double total = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    out[k] = gamma(params[k]);
    total += out[k];
  }
  if (!(total > 0.0)) {
    // Every gamma draw underflowed (tiny shapes); put the mass on the
    // largest parameter.
    std::size_t best = 0;
    for (std::size_t k = 1; k < params.size(); ++k) {
      if (params[k] > params[best]) best = k;
    }
    for (std::size_t k = 0; k < params.size(); ++k) out[k] = k == best ? 1.0 : 0.0;
    return;
  }
  for (std::size_t k = 0; k < params.size(); ++k) out[k] /= total;
}

std::vector<double> Rng::dirichlet(std::span<const double> params) {
  std::vector<double> out(params.size());
  dirichlet(params, out);
  return out;
}

}  // namespace rateagg
