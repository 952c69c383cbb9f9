#pragma once

// Gibbs sampling for the hierarchical model where every judge has its own
// confusion matrix and row k of each matrix shares a Dirichlet(lambda_k)
// prior. All conditionals are conjugate, so each sweep draws the confusion
// rows, then rho, then the item labels.

#include <optional>
#include <vector>

#include "rateagg/core.hpp"
#include "rateagg/rng.hpp"
#include "rateagg/types.hpp"

namespace rateagg {

enum class PriorKind { symmetric, diagonal_decaying };

struct PriorSpec {
  int levels = 0;
  Grid lambda_rows;           // K x K, row k parameterizes confusion row k
  std::vector<double> alpha;  // Dirichlet parameter for rho

  /// Throws Fault unless every entry is positive and shapes agree.
  void check() const;
  /// Row-normalized Lambda.
  ConfusionMatrix mean_confusion() const;
};

/// symmetric:         Lambda_{k,k} = lambda + 1, Lambda_{k,t} = 1.
/// diagonal_decaying: Lambda_{k,t} = 1 + lambda * decay^|t-k|, 0 < decay < 1.
/// `alpha` empty means all ones.
PriorSpec build_prior(int levels, double lambda, PriorKind kind,
                      std::optional<double> decay = std::nullopt,
                      std::vector<double> alpha = {});

struct GibbsSample {
  std::vector<ConfusionMatrix> confusions;
  LabelDistribution rho;
  TrueLabels labels;
};

TrueLabels sample_labels(const RatingsTable& table, std::span<const ConfusionMatrix> confusions,
                         const LabelDistribution& rho, Rng& rng);

/// Counts c^(j)_{k,t} = #{i : label_i = k, r_ij = t}; unrated cells excluded.
std::vector<Grid> rating_counts(const RatingsTable& table, const TrueLabels& labels);

std::vector<ConfusionMatrix> sample_confusions(const RatingsTable& table, const TrueLabels& labels,
                                               const PriorSpec& prior, Rng& rng);

/// Dirichlet(alpha + n) with n_k = #{i : label_i = k}. K comes from alpha.
LabelDistribution sample_rho(const TrueLabels& labels, std::span<const double> alpha, Rng& rng);

/// Relabeling of the latent classes: new label a takes old label perm[a].
/// Confusion rows and rho entries move with their label; the rating axis is
/// observed and stays fixed.
using LabelPermutation = std::vector<int>;

/// Permutation maximizing sum_j sum_a Theta^(j)_{perm[a], a}. Exhaustive for
/// K <= 6 (lexicographically smallest on ties), greedy beyond.
LabelPermutation diagonal_alignment(std::span<const ConfusionMatrix> confusions);

GibbsSample permute_sample(const GibbsSample& sample, const LabelPermutation& perm);

struct AlignedSample {
  GibbsSample sample;
  LabelPermutation permutation;
};

AlignedSample align_sample(const GibbsSample& sample);

struct GibbsOptions {
  /// Start chains from prior draws instead of the prior mean.
  bool overdispersed_starts = false;
};

/// `hyper.chains` chains, `hyper.burn_in` discarded sweeps, then
/// `hyper.kept_samples` kept per chain every `hyper.thin` sweeps. Chain c is
/// seeded with derive_seed(hyper.seed, kChainStream, c).
FitResult run_hybrid_confusion(const RatingsTable& table, const HyperParams& hyper,
                               const PriorSpec& prior, const GibbsOptions& options = {});

inline constexpr std::uint64_t kChainStream = 0x4348414eULL;

}  // namespace rateagg
