#include "rateagg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rateagg {

std::string Violation::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::out_of_range:
      os << "cell (" << item + 1 << "," << judge + 1 << ") out of range: " << value;
      break;
    case Kind::unrated_item:
      os << "item " << item + 1 << " has no ratings";
      break;
  }
  return os.str();
}

std::string ValidationReport::describe() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.describe() << '\n';
  return os.str();
}

ValidationReport validate_ratings(const RatingsTable& table) {
  ValidationReport report;
  const int levels = table.n_levels();
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    bool any = false;
    for (std::size_t j = 0; j < table.n_judges(); ++j) {
      const int r = table.at(i, j);
      if (r < 0 || r > levels) {
        report.violations.push_back({Violation::Kind::out_of_range, i, j, r});
      }
      if (r != 0) any = true;
    }
    if (!any) report.violations.push_back({Violation::Kind::unrated_item, i, 0, 0});
  }
  return report;
}

void check_dimensions(const RatingsTable& table, std::span<const ConfusionMatrix> confusions,
                      const LabelDistribution& rho) {
  const int levels = table.n_levels();
  if (rho.levels() != levels) throw Fault("rho length does not match K");
  if (confusions.size() != 1 && confusions.size() != table.n_judges()) {
    throw Fault("need one confusion matrix per judge or a single shared matrix");
  }
  for (const auto& c : confusions) {
    if (c.levels() != levels) throw Fault("confusion matrix size does not match K");
  }
}

namespace {

[[noreturn]] void zero_mass(std::size_t item) {
  std::ostringstream os;
  os << "item " << item + 1 << " has zero likelihood under every label";
  throw Fault(os.str());
}

}  // namespace

double label_evidence(std::span<const int> ratings, std::span<const ConfusionMatrix> confusions,
                      const LabelDistribution& rho, std::size_t item, std::span<double> weights) {
  const int levels = rho.levels();
  const bool shared = confusions.size() == 1 && ratings.size() != 1;

  // Shared matrix: Theta_{k,t} raised to the number of judges who rated t.
  constexpr int kMaxInline = 16;
  int counts_inline[kMaxInline];
  std::vector<int> counts_heap;
  std::span<int> counts;
  if (shared) {
    if (levels <= kMaxInline) {
      counts = std::span<int>(counts_inline, levels);
    } else {
      counts_heap.assign(levels, 0);
      counts = counts_heap;
    }
    std::fill(counts.begin(), counts.end(), 0);
    for (int r : ratings) {
      if (r != 0) ++counts[r - 1];
    }
  }

  // Shared factors are multiplied in sorted order so the product does not
  // depend on how levels are numbered.
  std::vector<double> factors;
  if (shared) factors.reserve(levels);
  for (int k = 0; k < levels; ++k) {
    double w = rho[k];
    if (shared) {
      const auto& theta = confusions[0];
      factors.clear();
      for (int t = 0; t < levels; ++t) {
        if (counts[t] != 0) factors.push_back(std::pow(theta(k, t), counts[t]));
      }
      std::sort(factors.begin(), factors.end());
      for (double f : factors) w *= f;
    } else {
      for (std::size_t j = 0; j < ratings.size(); ++j) {
        if (ratings[j] != 0) w *= confusions[j](k, ratings[j] - 1);
      }
    }
    weights[k] = w;
  }
  if (sorted_sum(weights.first(levels)) > 0.0) return 0.0;

  // Underflow (or genuine zero): redo in log space.
  double top = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < levels; ++k) {
    double lw = std::log(rho[k]);
    if (shared) {
      const auto& theta = confusions[0];
      factors.clear();
      for (int t = 0; t < levels; ++t) {
        if (counts[t] != 0) factors.push_back(counts[t] * std::log(theta(k, t)));
      }
      lw += sorted_sum(factors);
    } else {
      for (std::size_t j = 0; j < ratings.size(); ++j) {
        if (ratings[j] != 0) lw += std::log(confusions[j](k, ratings[j] - 1));
      }
    }
    weights[k] = lw;
    top = std::max(top, lw);
  }
  if (!std::isfinite(top)) zero_mass(item);
  for (int k = 0; k < levels; ++k) weights[k] = std::exp(weights[k] - top);
  return top;
}

double observed_log_likelihood(const RatingsTable& table,
                               std::span<const ConfusionMatrix> confusions,
                               const LabelDistribution& rho) {
  check_dimensions(table, confusions, rho);
  std::vector<double> weights(table.n_levels());
  double total = 0.0;
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    const double scale = label_evidence(table.item_row(i), confusions, rho, i, weights);
    total += scale + std::log(sorted_sum(weights));
  }
  return total;
}

}  // namespace rateagg
