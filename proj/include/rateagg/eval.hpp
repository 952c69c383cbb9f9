#pragma once

#include <span>
#include <vector>

#include "rateagg/em.hpp"
#include "rateagg/rng.hpp"
#include "rateagg/types.hpp"

namespace rateagg {

/// Most frequent nonzero rating per item; tied modes resolved uniformly at
/// random from `rng`.
TrueLabels majority_vote(const RatingsTable& table, Rng& rng);

/// Frequency estimates given hard labels:
///   rho_k = n_k / N
///   Theta^(j)_{k,t} = (c_{k,t} + s) / (sum_t c_{k,t} + K s)
/// Rows with no mass fall back to uniform. Returns one matrix per judge.
EmParams count_estimates(const RatingsTable& table, const TrueLabels& labels,
                         double smoothing = 0.0);

/// Majority vote labels plus counted parameters.
FitResult fit_majority_vote(const RatingsTable& table, std::uint64_t seed, double smoothing = 0.0);

double recovery_rate(const TrueLabels& estimated, const TrueLabels& truth);

/// (1/K^2) sum |est - truth| over all cells.
double mae_confusion(const ConfusionMatrix& estimated, const ConfusionMatrix& truth);

/// sum_k |est_k - truth_k|.
double l1_distance(const LabelDistribution& estimated, const LabelDistribution& truth);

struct Prediction {
  int label;                     // 1..K
  std::vector<double> posterior;
};

/// Posterior over the true label of a single item given fitted parameters;
/// identical arithmetic to one row of e_step. An item with no ratings
/// returns rho and its argmax.
Prediction predict_with_params(std::span<const int> ratings,
                               std::span<const ConfusionMatrix> confusions,
                               const LabelDistribution& rho);

/// Replaces the matrices of judges who rated nothing in `train` with the
/// prior-mean confusion for `lambda`.
std::vector<ConfusionMatrix> fill_unseen_judges(const RatingsTable& train,
                                                std::vector<ConfusionMatrix> confusions,
                                                double lambda);

struct PairedOutcomes {
  long wins_a = 0;
  long wins_b = 0;
  long ties = 0;
};

/// Tallies paired per-run scores; `a[r] > b[r]` counts as a win for A.
PairedOutcomes tally_pairs(std::span<const double> a, std::span<const double> b);

/// One-sided sign test: P(X >= wins_a) for X ~ Binomial(wins_a + wins_b, 1/2).
/// Ties are dropped. Throws Fault when there are no untied pairs.
double sign_test(const PairedOutcomes& outcomes);

}  // namespace rateagg
