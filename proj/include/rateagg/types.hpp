#pragma once

// Shared domain types for rating aggregation: the sparse ratings table,
// row-stochastic confusion matrices, label distributions, posterior
// responsibilities and the result record every engine returns.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rateagg {

/// Raised for contract violations and numerical faults.
class Fault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kStochasticTol = 1e-9;

/// Dense row-major table of doubles.
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), cells_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {cells_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {cells_.data() + r * cols_, cols_}; }

  const std::vector<double>& cells() const { return cells_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> cells_;
};

/// N x J table of ratings in {0..K}; 0 means the judge did not rate the item.
/// Out-of-range entries are representable so that validate_ratings can
/// report them; engines assume a validated table.
class RatingsTable {
 public:
  RatingsTable(std::size_t n_items, std::size_t n_judges, int n_levels);
  RatingsTable(std::size_t n_items, std::size_t n_judges, int n_levels,
               std::vector<int> entries);
  /// Convenience for literals: rows of equal length.
  static RatingsTable from_rows(const std::vector<std::vector<int>>& rows, int n_levels);

  std::size_t n_items() const { return n_items_; }
  std::size_t n_judges() const { return n_judges_; }
  int n_levels() const { return n_levels_; }

  int at(std::size_t item, std::size_t judge) const { return entries_[item * n_judges_ + judge]; }
  void set(std::size_t item, std::size_t judge, int rating) {
    entries_[item * n_judges_ + judge] = rating;
  }
  std::span<const int> item_row(std::size_t item) const {
    return {entries_.data() + item * n_judges_, n_judges_};
  }
  const std::vector<int>& entries() const { return entries_; }

  /// Table restricted to the given items, in the given order.
  RatingsTable select_items(std::span<const std::size_t> items) const;

  bool operator==(const RatingsTable&) const = default;

 private:
  std::size_t n_items_;
  std::size_t n_judges_;
  int n_levels_;
  std::vector<int> entries_;
};

/// K x K row-stochastic matrix; cell (k, t) = P(rating t | true label k).
/// Indices are zero-based in code; level k in the data is index k-1.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(Grid cells);
  static ConfusionMatrix from_rows(const std::vector<std::vector<double>>& rows);
  /// Each row divided by its sum. Rows must have positive mass.
  static ConfusionMatrix normalized(Grid weights);
  static ConfusionMatrix identity(int levels);

  int levels() const { return static_cast<int>(cells_.rows()); }
  double operator()(int k, int t) const { return cells_(k, t); }
  std::span<const double> row(int k) const { return cells_.row(k); }
  const Grid& cells() const { return cells_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  Grid cells_;
};

/// A point on the K-simplex (the class prior rho).
class LabelDistribution {
 public:
  explicit LabelDistribution(std::vector<double> probs);
  static LabelDistribution uniform(int levels);
  static LabelDistribution normalized(std::vector<double> weights);

  int levels() const { return static_cast<int>(probs_.size()); }
  double operator[](int k) const { return probs_[k]; }
  const std::vector<double>& probs() const { return probs_; }

  bool operator==(const LabelDistribution&) const = default;

 private:
  std::vector<double> probs_;
};

/// N x K posterior membership matrix Z.
class Responsibilities {
 public:
  Responsibilities() = default;
  explicit Responsibilities(Grid rows);

  std::size_t n_items() const { return rows_.rows(); }
  int levels() const { return static_cast<int>(rows_.cols()); }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }
  double operator()(std::size_t i, int k) const { return rows_(i, k); }
  const Grid& grid() const { return rows_; }

  bool operator==(const Responsibilities&) const = default;

 private:
  Grid rows_;
};

/// Item labels in {1..K} (one-based, as in the data).
class TrueLabels {
 public:
  TrueLabels() = default;
  TrueLabels(std::vector<int> labels, int levels);

  std::size_t size() const { return labels_.size(); }
  int levels() const { return levels_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& values() const { return labels_; }

  bool operator==(const TrueLabels&) const = default;

 private:
  std::vector<int> labels_;
  int levels_ = 0;
};

struct HyperParams {
  double lambda = 3.0;
  std::vector<double> alpha;  // empty means all-ones of length K
  double em_tol = 1e-6;
  int em_max_iters = 500;
  int chains = 3;
  int burn_in = 1000;
  int kept_samples = 100;
  int thin = 10;
  std::uint64_t seed = 0;

  /// alpha resolved against K (all-ones when unset).
  std::vector<double> alpha_for(int levels) const;
  /// Throws Fault on invalid values.
  void check(int levels) const;
};

enum class ModelKind { majority_vote, single_confusion, dawid_skene, hybrid_confusion };

const char* model_name(ModelKind kind);
/// Accepts the long names and the CLI short forms mv|sc|ds|hc.
ModelKind parse_model(const std::string& text);

struct PosteriorSummary {
  std::vector<ConfusionMatrix> mean_confusions;
  std::vector<Grid> std_confusions;
  LabelDistribution mean_rho = LabelDistribution::uniform(2);
  std::vector<double> std_rho;
  TrueLabels modal_labels;
  /// Per-item fraction of kept samples assigning each label (N x K).
  Grid label_frequencies;
  int n_samples = 0;
  int chain_count = 0;

  bool operator==(const PosteriorSummary&) const = default;
};

struct FitResult {
  ModelKind model_kind = ModelKind::majority_vote;
  std::vector<ConfusionMatrix> confusions;  // one per judge
  LabelDistribution rho = LabelDistribution::uniform(2);
  TrueLabels labels;
  std::optional<Responsibilities> responsibilities;
  std::vector<double> loglik_trace;
  bool converged = false;
  int iterations = 0;
  std::optional<PosteriorSummary> posterior;
};

/// Zero-based argmax; ties go to the smallest index.
std::size_t argmax_first(std::span<const double> values);

/// Sum of values taken in ascending order. The result does not depend on the
/// order of the input, which keeps label permutations bit-exact.
double sorted_sum(std::span<const double> values);

}  // namespace rateagg
