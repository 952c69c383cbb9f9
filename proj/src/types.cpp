#include "rateagg/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rateagg {

namespace {

void check_row_stochastic(std::span<const double> row, const char* what, std::size_t index) {
  for (double v : row) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      std::ostringstream os;
      os << what << " row " << index << " has a negative or non-finite entry";
      throw Fault(os.str());
    }
  }
  double total = sorted_sum(row);
  if (std::abs(total - 1.0) > kStochasticTol) {
    std::ostringstream os;
    os.precision(17);
    os << what << " row " << index << " sums to " << total;
    throw Fault(os.str());
  }
}

}  // namespace

double sorted_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double buf[8];
    std::copy(values.begin(), values.end(), buf);
    std::sort(buf, buf + values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) total += buf[i];
    return total;
  }
  std::vector<double> buf(values.begin(), values.end());
  std::sort(buf.begin(), buf.end());
  double total = 0.0;
  for (double v : buf) total += v;
  return total;
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

RatingsTable::RatingsTable(std::size_t n_items, std::size_t n_judges, int n_levels)
    : RatingsTable(n_items, n_judges, n_levels, std::vector<int>(n_items * n_judges, 0)) {}

RatingsTable::RatingsTable(std::size_t n_items, std::size_t n_judges, int n_levels,
                           std::vector<int> entries)
    : n_items_(n_items), n_judges_(n_judges), n_levels_(n_levels), entries_(std::move(entries)) {
  if (n_judges_ == 0) throw Fault("ratings table needs at least one judge");
  if (n_levels_ < 2) throw Fault("ratings table needs at least two levels");
  if (entries_.size() != n_items_ * n_judges_) throw Fault("ratings table entry count mismatch");
}

RatingsTable RatingsTable::from_rows(const std::vector<std::vector<int>>& rows, int n_levels) {
  if (rows.empty()) throw Fault("ratings table needs at least one item");
  const std::size_t judges = rows.front().size();
  std::vector<int> entries;
  entries.reserve(rows.size() * judges);
  for (const auto& row : rows) {
    if (row.size() != judges) throw Fault("ragged ratings rows");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return RatingsTable(rows.size(), judges, n_levels, std::move(entries));
}

RatingsTable RatingsTable::select_items(std::span<const std::size_t> items) const {
  std::vector<int> entries;
  entries.reserve(items.size() * n_judges_);
  for (std::size_t i : items) {
    auto row = item_row(i);
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return RatingsTable(items.size(), n_judges_, n_levels_, std::move(entries));
}

ConfusionMatrix::ConfusionMatrix(Grid cells) : cells_(std::move(cells)) {
  if (cells_.rows() < 2 || cells_.rows() != cells_.cols()) {
    throw Fault("confusion matrix must be square with K >= 2");
  }
  for (std::size_t k = 0; k < cells_.rows(); ++k) check_row_stochastic(cells_.row(k), "confusion", k);
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Grid cells(rows.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != rows.size()) throw Fault("confusion matrix must be square");
    std::copy(rows[k].begin(), rows[k].end(), cells.row(k).begin());
  }
  return ConfusionMatrix(std::move(cells));
}

ConfusionMatrix ConfusionMatrix::normalized(Grid weights) {
  for (std::size_t k = 0; k < weights.rows(); ++k) {
    auto row = weights.row(k);
    const double total = sorted_sum(row);
    if (!(total > 0.0)) throw Fault("cannot normalize a confusion row with zero mass");
    for (double& v : row) v /= total;
  }
  return ConfusionMatrix(std::move(weights));
}

ConfusionMatrix ConfusionMatrix::identity(int levels) {
  Grid cells(levels, levels);
  for (int k = 0; k < levels; ++k) cells(k, k) = 1.0;
  return ConfusionMatrix(std::move(cells));
}

LabelDistribution::LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw Fault("label distribution needs K >= 2");
  check_row_stochastic(probs_, "label distribution", 0);
}

LabelDistribution LabelDistribution::uniform(int levels) {
  return LabelDistribution(std::vector<double>(levels, 1.0 / levels));
}

LabelDistribution LabelDistribution::normalized(std::vector<double> weights) {
  const double total = sorted_sum(weights);
  if (!(total > 0.0)) throw Fault("cannot normalize a label distribution with zero mass");
  for (double& v : weights) v /= total;
  return LabelDistribution(std::move(weights));
}

Responsibilities::Responsibilities(Grid rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.rows(); ++i) check_row_stochastic(rows_.row(i), "responsibility", i);
}

TrueLabels::TrueLabels(std::vector<int> labels, int levels)
    : labels_(std::move(labels)), levels_(levels) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 1 || labels_[i] > levels_) {
      std::ostringstream os;
      os << "label " << labels_[i] << " of item " << i << " is outside 1.." << levels_;
      throw Fault(os.str());
    }
  }
}

std::vector<double> HyperParams::alpha_for(int levels) const {
  if (alpha.empty()) return std::vector<double>(levels, 1.0);
  if (static_cast<int>(alpha.size()) != levels) throw Fault("alpha length does not match K");
  return alpha;
}

void HyperParams::check(int levels) const {
  if (!(lambda > 0.0)) throw Fault("lambda must be positive");
  for (double a : alpha_for(levels)) {
    if (!(a > 0.0)) throw Fault("every alpha entry must be positive");
  }
  if (!(em_tol > 0.0)) throw Fault("em_tol must be positive");
  if (em_max_iters < 1) throw Fault("em_max_iters must be positive");
  if (chains < 1) throw Fault("chains must be positive");
  if (burn_in < 0) throw Fault("burn_in must be nonnegative");
  if (kept_samples < 1) throw Fault("kept_samples must be at least 1");
  if (thin < 1) throw Fault("thin must be positive");
}

const char* model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::majority_vote: return "majority_vote";
    case ModelKind::single_confusion: return "single_confusion";
    case ModelKind::dawid_skene: return "dawid_skene";
    case ModelKind::hybrid_confusion: return "hybrid_confusion";
  }
  return "unknown";
}

ModelKind parse_model(const std::string& text) {
  if (text == "mv" || text == "majority_vote") return ModelKind::majority_vote;
  if (text == "sc" || text == "single_confusion") return ModelKind::single_confusion;
  if (text == "ds" || text == "dawid_skene") return ModelKind::dawid_skene;
  if (text == "hc" || text == "hybrid_confusion") return ModelKind::hybrid_confusion;
  throw Fault("unknown model '" + text + "'");
}

}  // namespace rateagg
