#pragma once

// Synthetic ratings drawn from the per-judge confusion model, plus the
// benchmark harness that repeats fits over a grid of data sizes.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rateagg/fit.hpp"
#include "rateagg/rng.hpp"
#include "rateagg/types.hpp"

namespace rateagg {

enum class RatingPattern { complete, per_item_count };

struct SyntheticSpec {
  LabelDistribution rho_true = LabelDistribution::uniform(2);
  std::vector<ConfusionMatrix> confusions_true;
  std::size_t n_items = 0;
  RatingPattern pattern = RatingPattern::complete;
  int ratings_per_item = 0;  // used with per_item_count

  int levels() const { return rho_true.levels(); }
  std::size_t judges() const { return confusions_true.size(); }
  void check() const;
};

/// The three-judge, three-level simulation setting: rho = (0.05, 0.15, 0.8)
/// and the confusion matrices
///   judge 1: [.8 0 .2; .1 .8 .1; .1 0 .9]
///   judge 2: [.7 .2 .1; .1 .7 .2; .1 .1 .8]
///   judge 3: [.6 .3 .1; .1 .5 .4; .1 .4 .5]
/// with every judge rating every item.
SyntheticSpec three_judge_spec(std::size_t n_items);
std::vector<ConfusionMatrix> three_judge_confusions();
LabelDistribution three_judge_rho();

/// A larger panel for split experiments: `judges` judges cycling through the
/// three matrices above, complete ratings, same rho.
SyntheticSpec panel_spec(std::size_t judges, std::size_t n_items);

struct SyntheticData {
  RatingsTable table;
  TrueLabels truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, Rng& rng);

/// Keeps `per_item` uniformly chosen rated cells per item (all of them when
/// fewer exist) and zeroes the rest.
RatingsTable subsample_ratings(const RatingsTable& table, int per_item, Rng& rng);

struct SplitRatio {
  int train = 2;
  int test = 1;
};

struct ItemSplit {
  std::vector<std::size_t> train_items;  // ascending
  std::vector<std::size_t> test_items;   // ascending
  SyntheticData train;
  SyntheticData test;
};

/// Random partition with round(N * train / (train + test)) training items.
ItemSplit split_items(const RatingsTable& table, const TrueLabels& truth, SplitRatio ratio,
                      Rng& rng);

enum class GridKind { items, ratings_per_item };
/// recovery: fit on all generated data and score against the truth.
/// memory / memoryless: subsample, split, and score predictions on the test items.
enum class EvalMode { recovery, memory, memoryless, both };

const char* grid_name(GridKind kind);
const char* eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(const std::string& text);

struct BenchmarkConfig {
  SyntheticSpec spec;
  int runs = 100;
  GridKind grid_kind = GridKind::items;
  std::vector<int> grid;
  std::vector<ModelKind> models;
  FitOptions fit;  // fit.hyper.seed is the master seed
  SplitRatio split;
  EvalMode mode = EvalMode::recovery;
  /// Smoothing of counted parameters when majority vote predicts in memory mode.
  double memory_vote_smoothing = 1.0;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;

  void check() const;
};

struct MetricSeries {
  ModelKind model;
  int grid_value;
  std::string metric;
  std::vector<double> per_run;
  double mean = 0.0;
  double stddev = 0.0;
};

struct BenchmarkResult {
  GridKind grid_kind = GridKind::items;
  int runs = 0;
  std::vector<MetricSeries> series;

  /// Throws Fault when the series is absent.
  const MetricSeries& at(ModelKind model, int grid_value, const std::string& metric) const;
};

/// Seed of job (run, grid index) under `master`.
std::uint64_t run_seed(std::uint64_t master, int run, std::size_t grid_index);

/// Metrics per (model, grid value):
///   recovery mode: recovery, rho_l1, rho_hat_<k>, mae_judge_<j>, mae_mean
///   split modes:   accuracy_memory and/or accuracy_memoryless
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

}  // namespace rateagg
