#pragma once

// One entry point for all four models, used by the benchmark harness and
// the command-line tool.

#include <cstdint>
#include <optional>

#include "rateagg/em.hpp"
#include "rateagg/gibbs.hpp"
#include "rateagg/types.hpp"

namespace rateagg {

struct FitOptions {
  HyperParams hyper;
  PriorKind prior = PriorKind::symmetric;
  std::optional<double> decay;
  EmInit em_init = EmInit::prior_mean;
  GibbsOptions gibbs;
  /// Additive smoothing for the counted majority-vote parameters.
  double vote_smoothing = 0.0;

  PriorSpec prior_spec(int levels) const;
};

/// Dispatches on `kind`. Majority vote breaks ties with a stream seeded by
/// options.hyper.seed; the Gibbs chains derive their seeds from it too.
FitResult fit_model(ModelKind kind, const RatingsTable& table, const FitOptions& options);

}  // namespace rateagg
