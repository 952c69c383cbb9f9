#include "rateagg/fit.hpp"

#include "rateagg/eval.hpp"

namespace rateagg {

PriorSpec FitOptions::prior_spec(int levels) const {
  return build_prior(levels, hyper.lambda, prior, decay, hyper.alpha_for(levels));
}

FitResult fit_model(ModelKind kind, const RatingsTable& table, const FitOptions& options) {
  switch (kind) {
    case ModelKind::majority_vote:
      return fit_majority_vote(table, options.hyper.seed, options.vote_smoothing);
    case ModelKind::single_confusion:
      return fit_em(table, options.hyper, EmKind::shared, options.em_init);
    case ModelKind::dawid_skene:
      return fit_em(table, options.hyper, EmKind::per_judge, options.em_init);
    case ModelKind::hybrid_confusion:
      return run_hybrid_confusion(table, options.hyper, options.prior_spec(table.n_levels()),
                                  options.gibbs);
  }
  throw Fault("unknown model kind");
}

}  // namespace rateagg
