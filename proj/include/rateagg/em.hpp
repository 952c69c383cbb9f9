#pragma once

// Maximum-likelihood EM for the per-judge (Dawid-Skene) and shared
// (single confusion) variants of the true-label + confusion model.

#include <vector>

#include "rateagg/core.hpp"
#include "rateagg/types.hpp"

namespace rateagg {

enum class EmKind { per_judge, shared };

/// Starting point for the confusion rows.
///  prior_mean: diagonal (lambda+1)/(lambda+K), off-diagonal 1/(lambda+K).
///  literal_normalized: diagonal lambda, off-diagonal 1, renormalized per row.
enum class EmInit { prior_mean, literal_normalized };

struct EmParams {
  /// One matrix per judge for per_judge, a single matrix for shared.
  std::vector<ConfusionMatrix> confusions;
  LabelDistribution rho;
};

/// Row k of the symmetric prior mean: (lambda+1)/(lambda+K) on the diagonal.
/// lambda == 0 gives the uniform row.
ConfusionMatrix prior_mean_confusion(int levels, double lambda);

EmParams init_params(int levels, std::size_t judges, double lambda, EmKind kind,
                     EmInit init = EmInit::prior_mean);

Responsibilities e_step(const RatingsTable& table, const EmParams& params);

/// Weighted counts of ratings per (true label, rating). A (judge, label) pair
/// with no responsibility mass gets the prior-mean row for `fallback_lambda`.
EmParams m_step(const RatingsTable& table, const Responsibilities& z, EmKind kind,
                double fallback_lambda = 3.0);

/// Largest absolute difference over every confusion cell and rho entry.
double max_param_change(const EmParams& a, const EmParams& b);

/// Expands shared parameters to one matrix per judge.
std::vector<ConfusionMatrix> per_judge_confusions(const EmParams& params, std::size_t judges);

TrueLabels labels_from_responsibilities(const Responsibilities& z);

FitResult fit_em(const RatingsTable& table, const HyperParams& hyper, EmKind kind,
                 EmInit init = EmInit::prior_mean);

}  // namespace rateagg
