#include "rateagg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rateagg/core.hpp"

namespace rateagg {

TrueLabels majority_vote(const RatingsTable& table, Rng& rng) {
  const int levels = table.n_levels();
  std::vector<int> counts(levels);
  std::vector<int> modes;
  std::vector<int> labels(table.n_items());
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    int top = 0;
    for (int r : table.item_row(i)) {
      if (r == 0) continue;
      if (r < 1 || r > levels) throw Fault("rating out of range");
      top = std::max(top, ++counts[r - 1]);
    }
    if (top == 0) {
      std::ostringstream os;
      os << "item " << i + 1 << " has no ratings";
      throw Fault(os.str());
    }
    modes.clear();
    for (int k = 0; k < levels; ++k) {
      if (counts[k] == top) modes.push_back(k + 1);
    }
    labels[i] = modes.size() == 1 ? modes.front() : modes[rng.below(modes.size())];
  }
  return TrueLabels(std::move(labels), levels);
}

EmParams count_estimates(const RatingsTable& table, const TrueLabels& labels, double smoothing) {
  if (labels.size() != table.n_items()) throw Fault("labels do not match table");
  if (!(smoothing >= 0.0)) throw Fault("smoothing must be nonnegative");
  const int levels = table.n_levels();

  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(table.n_judges());
  for (std::size_t j = 0; j < table.n_judges(); ++j) {
    Grid counts(levels, levels);
    for (std::size_t i = 0; i < table.n_items(); ++i) {
      const int r = table.at(i, j);
      if (r != 0) counts(labels[i] - 1, r - 1) += 1.0;
    }
    for (int k = 0; k < levels; ++k) {
      auto row = counts.row(k);
      for (double& c : row) c += smoothing;
      if (!(sorted_sum(row) > 0.0)) std::fill(row.begin(), row.end(), 1.0);
    }
    confusions.push_back(ConfusionMatrix::normalized(std::move(counts)));
  }

  std::vector<double> n(levels, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) n[labels[i] - 1] += 1.0;
  return EmParams{std::move(confusions), LabelDistribution::normalized(std::move(n))};
}

FitResult fit_majority_vote(const RatingsTable& table, std::uint64_t seed, double smoothing) {
  if (auto report = validate_ratings(table); !report.ok()) {
    throw Fault("invalid ratings table:\n" + report.describe());
  }
  Rng rng(seed);
  FitResult result;
  result.model_kind = ModelKind::majority_vote;
  result.labels = majority_vote(table, rng);
  EmParams params = count_estimates(table, result.labels, smoothing);
  result.confusions = std::move(params.confusions);
  result.rho = std::move(params.rho);
  result.converged = true;
  return result;
}

double recovery_rate(const TrueLabels& estimated, const TrueLabels& truth) {
  if (estimated.size() != truth.size()) throw Fault("label sequences differ in length");
  if (truth.size() == 0) throw Fault("recovery rate of an empty sequence");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += estimated[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double mae_confusion(const ConfusionMatrix& estimated, const ConfusionMatrix& truth) {
  if (estimated.levels() != truth.levels()) throw Fault("confusion matrices differ in size");
  const int levels = truth.levels();
  double total = 0.0;
  for (int k = 0; k < levels; ++k) {
    for (int t = 0; t < levels; ++t) total += std::abs(estimated(k, t) - truth(k, t));
  }
  return total / (static_cast<double>(levels) * levels);
}

double l1_distance(const LabelDistribution& estimated, const LabelDistribution& truth) {
  if (estimated.levels() != truth.levels()) throw Fault("label distributions differ in size");
  double total = 0.0;
  for (int k = 0; k < truth.levels(); ++k) total += std::abs(estimated[k] - truth[k]);
  return total;
}

Prediction predict_with_params(std::span<const int> ratings,
                               std::span<const ConfusionMatrix> confusions,
                               const LabelDistribution& rho) {
  if (confusions.size() != 1 && confusions.size() != ratings.size()) {
    throw Fault("need one confusion matrix per judge or a single shared matrix");
  }
  std::vector<double> posterior(rho.levels());
  label_evidence(ratings, confusions, rho, 0, posterior);
  const double total = sorted_sum(posterior);
  for (double& v : posterior) v /= total;
  const int label = static_cast<int>(argmax_first(posterior)) + 1;
  return Prediction{label, std::move(posterior)};
}

std::vector<ConfusionMatrix> fill_unseen_judges(const RatingsTable& train,
                                                std::vector<ConfusionMatrix> confusions,
                                                double lambda) {
  if (confusions.size() != train.n_judges()) throw Fault("need one confusion matrix per judge");
  const ConfusionMatrix fallback = prior_mean_confusion(train.n_levels(), lambda);
  for (std::size_t j = 0; j < train.n_judges(); ++j) {
    bool seen = false;
    for (std::size_t i = 0; i < train.n_items() && !seen; ++i) seen = train.at(i, j) != 0;
    if (!seen) confusions[j] = fallback;
  }
  return confusions;
}

PairedOutcomes tally_pairs(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Fault("paired samples differ in length");
  PairedOutcomes out;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r] > b[r]) {
      ++out.wins_a;
    } else if (b[r] > a[r]) {
      ++out.wins_b;
    } else {
      ++out.ties;
    }
  }
  return out;
}

double sign_test(const PairedOutcomes& outcomes) {
  if (outcomes.wins_a < 0 || outcomes.wins_b < 0 || outcomes.ties < 0) {
    throw Fault("paired outcome counts must be nonnegative");
  }
  const long n = outcomes.wins_a + outcomes.wins_b;
  if (n == 0) throw Fault("sign test needs at least one untied pair");
  double p = 0.0;
  if (n <= 1000) {
    // C(n, x) built down from C(n, n) = 1; exact while it fits in 53 bits.
    double binom = 1.0;
    for (long x = n; x >= outcomes.wins_a; --x) {
      p += std::ldexp(binom, static_cast<int>(-n));
      binom = binom * static_cast<double>(x) / static_cast<double>(n - x + 1);
    }
  } else {
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
    for (long x = n; x >= outcomes.wins_a; --x) {
      p += std::exp(lg_n1 - std::lgamma(static_cast<double>(x) + 1.0) -
                    std::lgamma(static_cast<double>(n - x) + 1.0) + log_half_n);
    }
  }
  return std::min(1.0, p);
}

}  // namespace rateagg
