#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rateagg/types.hpp"

namespace rateagg {

struct Violation {
  enum class Kind { out_of_range, unrated_item };
  Kind kind;
  std::size_t item;   // zero-based
  std::size_t judge;  // zero-based; unused for unrated_item
  int value;          // offending rating; unused for unrated_item

  std::string describe() const;
  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

ValidationReport validate_ratings(const RatingsTable& table);

/// Per-label evidence for one item: weights[k] proportional to
/// rho_k * prod over rated judges of Theta^(j)_{k, r_j}.
///
/// `confusions` holds either one matrix per judge or a single shared matrix.
/// The shared form uses per-level rating counts so the result is invariant
/// under reordering judges. Falls back to log space when the linear product
/// underflows. Returns log of the scale factor applied to `weights`, so that
/// log(sum_k true_weight_k) == log(sum_k weights[k]) + returned value.
/// Throws Fault naming the item when every label has zero mass.
double label_evidence(std::span<const int> ratings, std::span<const ConfusionMatrix> confusions,
                      const LabelDistribution& rho, std::size_t item, std::span<double> weights);

/// sum_i log sum_k rho_k prod_{j rated} Theta^(j)_{k, r_ij}.
double observed_log_likelihood(const RatingsTable& table,
                               std::span<const ConfusionMatrix> confusions,
                               const LabelDistribution& rho);

/// Throws Fault when confusions/rho do not fit the table (count or K).
void check_dimensions(const RatingsTable& table, std::span<const ConfusionMatrix> confusions,
                      const LabelDistribution& rho);

}  // namespace rateagg
