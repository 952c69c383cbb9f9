#include "rateagg/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rateagg {

void PriorSpec::check() const {
  if (levels < 2) throw Fault("prior needs K >= 2");
  if (lambda_rows.rows() != static_cast<std::size_t>(levels) ||
      lambda_rows.cols() != static_cast<std::size_t>(levels)) {
    throw Fault("prior Lambda must be K x K");
  }
  if (alpha.size() != static_cast<std::size_t>(levels)) throw Fault("prior alpha must have length K");
  for (double v : lambda_rows.cells()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Fault("prior Lambda entries must be positive");
  }
  for (double v : alpha) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Fault("prior alpha entries must be positive");
  }
}

ConfusionMatrix PriorSpec::mean_confusion() const { return ConfusionMatrix::normalized(lambda_rows); }

PriorSpec build_prior(int levels, double lambda, PriorKind kind, std::optional<double> decay,
                      std::vector<double> alpha) {
  if (levels < 2) throw Fault("K must be at least 2");
  if (!(lambda >= 0.0)) throw Fault("lambda must be nonnegative");
  PriorSpec prior;
  prior.levels = levels;
  prior.lambda_rows = Grid(levels, levels, 1.0);
  if (kind == PriorKind::symmetric) {
    if (decay) throw Fault("decay applies only to the diagonal-decaying prior");
    for (int k = 0; k < levels; ++k) prior.lambda_rows(k, k) = lambda + 1.0;
  } else {
    if (!decay) throw Fault("diagonal-decaying prior needs a decay factor");
    if (!(*decay > 0.0) || *decay >= 1.0) throw Fault("decay must lie in (0, 1)");
    for (int k = 0; k < levels; ++k) {
      for (int t = 0; t < levels; ++t) {
        prior.lambda_rows(k, t) = 1.0 + lambda * std::pow(*decay, std::abs(t - k));
      }
    }
  }
  prior.alpha = alpha.empty() ? std::vector<double>(levels, 1.0) : std::move(alpha);
  prior.check();
  return prior;
}

TrueLabels sample_labels(const RatingsTable& table, std::span<const ConfusionMatrix> confusions,
                         const LabelDistribution& rho, Rng& rng) {
  check_dimensions(table, confusions, rho);
  const int levels = table.n_levels();
  std::vector<double> weights(levels);
  std::vector<int> labels(table.n_items());
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    label_evidence(table.item_row(i), confusions, rho, i, weights);
    labels[i] = static_cast<int>(rng.categorical(weights)) + 1;
  }
  return TrueLabels(std::move(labels), levels);
}

std::vector<Grid> rating_counts(const RatingsTable& table, const TrueLabels& labels) {
  if (labels.size() != table.n_items()) throw Fault("labels do not match table");
  const int levels = table.n_levels();
  std::vector<Grid> counts(table.n_judges(), Grid(levels, levels));
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    const int k = labels[i] - 1;
    for (std::size_t j = 0; j < table.n_judges(); ++j) {
      const int r = table.at(i, j);
      if (r != 0) counts[j](k, r - 1) += 1.0;
    }
  }
  return counts;
}

std::vector<ConfusionMatrix> sample_confusions(const RatingsTable& table, const TrueLabels& labels,
                                               const PriorSpec& prior, Rng& rng) {
  if (prior.levels != table.n_levels()) throw Fault("prior K does not match table");
  const int levels = prior.levels;
  std::vector<Grid> counts = rating_counts(table, labels);
  std::vector<ConfusionMatrix> out;
  out.reserve(counts.size());
  std::vector<double> params(levels);
  for (Grid& c : counts) {
    Grid draw(levels, levels);
    for (int k = 0; k < levels; ++k) {
      for (int t = 0; t < levels; ++t) params[t] = prior.lambda_rows(k, t) + c(k, t);
      rng.dirichlet(params, draw.row(k));
    }
    out.emplace_back(std::move(draw));
  }
  return out;
}

LabelDistribution sample_rho(const TrueLabels& labels, std::span<const double> alpha, Rng& rng) {
  std::vector<double> params(alpha.begin(), alpha.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > static_cast<int>(params.size())) throw Fault("label out of range");
    params[labels[i] - 1] += 1.0;
  }
  return LabelDistribution(rng.dirichlet(params));
}

namespace {

Grid alignment_scores(std::span<const ConfusionMatrix> confusions) {
  const int levels = confusions.front().levels();
  Grid scores(levels, levels);
  for (const auto& theta : confusions) {
    for (int k = 0; k < levels; ++k) {
      for (int a = 0; a < levels; ++a) scores(k, a) += theta(k, a);
    }
  }
  return scores;
}

}  // namespace

LabelPermutation diagonal_alignment(std::span<const ConfusionMatrix> confusions) {
  if (confusions.empty()) throw Fault("alignment needs at least one confusion matrix");
  const int levels = confusions.front().levels();
  const Grid scores = alignment_scores(confusions);

  LabelPermutation perm(levels);
  std::iota(perm.begin(), perm.end(), 0);
  if (levels <= 6) {
    LabelPermutation best = perm;
    double best_score = -1.0;
    do {
      double score = 0.0;
      for (int a = 0; a < levels; ++a) score += scores(perm[a], a);
      if (score > best_score) {
        best_score = score;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  // Greedy: repeatedly take the largest remaining (old row, new label) score.
  std::vector<bool> row_used(levels, false), col_used(levels, false);
  for (int step = 0; step < levels; ++step) {
    int best_k = -1, best_a = -1;
    double best = -1.0;
    for (int a = 0; a < levels; ++a) {
      if (col_used[a]) continue;
      for (int k = 0; k < levels; ++k) {
        if (row_used[k]) continue;
        if (scores(k, a) > best) {
          best = scores(k, a);
          best_k = k;
          best_a = a;
        }
      }
    }
    perm[best_a] = best_k;
    row_used[best_k] = true;
    col_used[best_a] = true;
  }
  return perm;
}

GibbsSample permute_sample(const GibbsSample& sample, const LabelPermutation& perm) {
  const int levels = sample.rho.levels();
  if (static_cast<int>(perm.size()) != levels) throw Fault("permutation size does not match K");
  std::vector<int> inverse(levels, -1);
  for (int a = 0; a < levels; ++a) {
    if (perm[a] < 0 || perm[a] >= levels || inverse[perm[a]] != -1) throw Fault("not a permutation");
    inverse[perm[a]] = a;
  }

  std::vector<ConfusionMatrix> confusions;
  confusions.reserve(sample.confusions.size());
  for (const auto& theta : sample.confusions) {
    Grid cells(levels, levels);
    for (int a = 0; a < levels; ++a) {
      auto src = theta.row(perm[a]);
      std::copy(src.begin(), src.end(), cells.row(a).begin());
    }
    confusions.emplace_back(std::move(cells));
  }
  std::vector<double> rho(levels);
  for (int a = 0; a < levels; ++a) rho[a] = sample.rho[perm[a]];
  std::vector<int> labels(sample.labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = inverse[sample.labels[i] - 1] + 1;
  return GibbsSample{std::move(confusions), LabelDistribution(std::move(rho)),
                     TrueLabels(std::move(labels), levels)};
}

AlignedSample align_sample(const GibbsSample& sample) {
  LabelPermutation perm = diagonal_alignment(sample.confusions);
  const bool identity = std::is_sorted(perm.begin(), perm.end());
  return AlignedSample{identity ? sample : permute_sample(sample, perm), std::move(perm)};
}

namespace {

/// Running mean and sum of squared deviations (Welford).
struct Moments {
  std::vector<double> mean;
  std::vector<double> m2;
  explicit Moments(std::size_t n) : mean(n, 0.0), m2(n, 0.0) {}

  void add(std::span<const double> x, long count) {
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double delta = x[c] - mean[c];
      mean[c] += delta / static_cast<double>(count);
      m2[c] += delta * (x[c] - mean[c]);
    }
  }
  double stddev(std::size_t c, long count) const {
    return count > 1 ? std::sqrt(std::max(0.0, m2[c] / static_cast<double>(count - 1))) : 0.0;
  }
};

}  // namespace

FitResult run_hybrid_confusion(const RatingsTable& table, const HyperParams& hyper,
                               const PriorSpec& prior, const GibbsOptions& options) {
  const int levels = table.n_levels();
  hyper.check(levels);
  prior.check();
  if (prior.levels != levels) throw Fault("prior K does not match table");
  if (auto report = validate_ratings(table); !report.ok()) {
    throw Fault("invalid ratings table:\n" + report.describe());
  }

  const std::size_t items = table.n_items();
  const std::size_t judges = table.n_judges();
  const std::size_t cells = static_cast<std::size_t>(levels) * levels;

  std::vector<Moments> confusion_moments(judges, Moments(cells));
  Moments rho_moments(levels);
  Grid label_counts(items, levels);
  long kept = 0;

  for (int chain = 0; chain < hyper.chains; ++chain) {
    Rng rng(derive_seed(hyper.seed, kChainStream, static_cast<std::uint64_t>(chain)));

    std::vector<ConfusionMatrix> confusions(judges, prior.mean_confusion());
    LabelDistribution rho = LabelDistribution::uniform(levels);
    if (options.overdispersed_starts) {
      for (std::size_t j = 0; j < judges; ++j) {
        Grid draw(levels, levels);
        for (int k = 0; k < levels; ++k) rng.dirichlet(prior.lambda_rows.row(k), draw.row(k));
        confusions[j] = ConfusionMatrix(std::move(draw));
      }
      rho = LabelDistribution(rng.dirichlet(prior.alpha));
    }
    TrueLabels labels = sample_labels(table, confusions, rho, rng);

    const long sweeps = static_cast<long>(hyper.burn_in) +
                        static_cast<long>(hyper.kept_samples) * hyper.thin;
    for (long sweep = 0; sweep < sweeps; ++sweep) {
      confusions = sample_confusions(table, labels, prior, rng);
      rho = sample_rho(labels, prior.alpha, rng);
      labels = sample_labels(table, confusions, rho, rng);

      const long after_burn = sweep + 1 - hyper.burn_in;
      if (after_burn <= 0 || after_burn % hyper.thin != 0) continue;

      AlignedSample aligned = align_sample(GibbsSample{confusions, rho, labels});
      ++kept;
      for (std::size_t j = 0; j < judges; ++j) {
        confusion_moments[j].add(aligned.sample.confusions[j].cells().cells(), kept);
      }
      rho_moments.add(aligned.sample.rho.probs(), kept);
      for (std::size_t i = 0; i < items; ++i) label_counts(i, aligned.sample.labels[i] - 1) += 1.0;
    }
  }

  PosteriorSummary summary;
  summary.n_samples = static_cast<int>(kept);
  summary.chain_count = hyper.chains;
  for (std::size_t j = 0; j < judges; ++j) {
    Grid mean(levels, levels), sd(levels, levels);
    for (std::size_t c = 0; c < cells; ++c) {
      mean(c / levels, c % levels) = confusion_moments[j].mean[c];
      sd(c / levels, c % levels) = confusion_moments[j].stddev(c, kept);
    }
    summary.mean_confusions.emplace_back(std::move(mean));
    summary.std_confusions.push_back(std::move(sd));
  }
  summary.mean_rho = LabelDistribution(rho_moments.mean);
  for (int k = 0; k < levels; ++k) summary.std_rho.push_back(rho_moments.stddev(k, kept));

  std::vector<int> modal(items);
  summary.label_frequencies = Grid(items, levels);
  for (std::size_t i = 0; i < items; ++i) {
    modal[i] = static_cast<int>(argmax_first(label_counts.row(i))) + 1;
    for (int k = 0; k < levels; ++k) {
      summary.label_frequencies(i, k) = label_counts(i, k) / static_cast<double>(kept);
    }
  }
  summary.modal_labels = TrueLabels(std::move(modal), levels);

  FitResult result;
  result.model_kind = ModelKind::hybrid_confusion;
  result.confusions = summary.mean_confusions;
  result.rho = summary.mean_rho;
  result.labels = summary.modal_labels;
  result.converged = true;
  result.iterations = hyper.chains * (hyper.burn_in + hyper.kept_samples * hyper.thin);
  result.posterior = std::move(summary);
  return result;
}

}  // namespace rateagg
