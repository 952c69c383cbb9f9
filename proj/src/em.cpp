#include "rateagg/em.hpp"

#include <algorithm>
#include <cmath>

namespace rateagg {

ConfusionMatrix prior_mean_confusion(int levels, double lambda) {
  if (levels < 2) throw Fault("K must be at least 2");
  if (!(lambda >= 0.0)) throw Fault("lambda must be nonnegative");
  Grid cells(levels, levels, 1.0 / (lambda + levels));
  for (int k = 0; k < levels; ++k) cells(k, k) = (lambda + 1.0) / (lambda + levels);
  return ConfusionMatrix::normalized(std::move(cells));
}

EmParams init_params(int levels, std::size_t judges, double lambda, EmKind kind, EmInit init) {
  if (judges == 0) throw Fault("need at least one judge");
  ConfusionMatrix start = prior_mean_confusion(levels, lambda);
  if (init == EmInit::literal_normalized) {
    Grid cells(levels, levels, 1.0 / (lambda + levels));
    for (int k = 0; k < levels; ++k) cells(k, k) = lambda / (lambda + levels);
    start = ConfusionMatrix::normalized(std::move(cells));
  }
  const std::size_t copies = kind == EmKind::shared ? 1 : judges;
  return EmParams{std::vector<ConfusionMatrix>(copies, start), LabelDistribution::uniform(levels)};
}

Responsibilities e_step(const RatingsTable& table, const EmParams& params) {
  check_dimensions(table, params.confusions, params.rho);
  const int levels = table.n_levels();
  Grid z(table.n_items(), levels);
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    auto row = z.row(i);
    label_evidence(table.item_row(i), params.confusions, params.rho, i, row);
    const double total = sorted_sum(row);
    for (double& v : row) v /= total;
  }
  return Responsibilities(std::move(z));
}

EmParams m_step(const RatingsTable& table, const Responsibilities& z, EmKind kind,
                double fallback_lambda) {
  const int levels = table.n_levels();
  const std::size_t items = table.n_items();
  const std::size_t judges = table.n_judges();
  if (z.n_items() != items || z.levels() != levels) throw Fault("responsibilities do not match table");

  const ConfusionMatrix fallback = prior_mean_confusion(levels, fallback_lambda);
  auto finish = [&](Grid counts) {
    for (int k = 0; k < levels; ++k) {
      auto row = counts.row(k);
      if (!(sorted_sum(row) > 0.0)) {
        std::copy(fallback.row(k).begin(), fallback.row(k).end(), row.begin());
      }
    }
    return ConfusionMatrix::normalized(std::move(counts));
  };

  std::vector<ConfusionMatrix> confusions;
  if (kind == EmKind::per_judge) {
    confusions.reserve(judges);
    for (std::size_t j = 0; j < judges; ++j) {
      Grid counts(levels, levels);
      for (std::size_t i = 0; i < items; ++i) {
        const int r = table.at(i, j);
        if (r == 0) continue;
        for (int k = 0; k < levels; ++k) counts(k, r - 1) += z(i, k);
      }
      confusions.push_back(finish(std::move(counts)));
    }
  } else {
    // Per-item rating counts are integers, so pooling is independent of judge order.
    Grid counts(levels, levels);
    std::vector<int> item_counts(levels);
    for (std::size_t i = 0; i < items; ++i) {
      std::fill(item_counts.begin(), item_counts.end(), 0);
      for (int r : table.item_row(i)) {
        if (r != 0) ++item_counts[r - 1];
      }
      for (int t = 0; t < levels; ++t) {
        if (item_counts[t] == 0) continue;
        for (int k = 0; k < levels; ++k) counts(k, t) += z(i, k) * item_counts[t];
      }
    }
    confusions.push_back(finish(std::move(counts)));
  }

  std::vector<double> mass(levels, 0.0);
  for (std::size_t i = 0; i < items; ++i) {
    for (int k = 0; k < levels; ++k) mass[k] += z(i, k);
  }
  return EmParams{std::move(confusions), LabelDistribution::normalized(std::move(mass))};
}

double max_param_change(const EmParams& a, const EmParams& b) {
  if (a.confusions.size() != b.confusions.size()) throw Fault("parameter shapes differ");
  double change = 0.0;
  for (std::size_t j = 0; j < a.confusions.size(); ++j) {
    const auto& x = a.confusions[j].cells().cells();
    const auto& y = b.confusions[j].cells().cells();
    for (std::size_t c = 0; c < x.size(); ++c) change = std::max(change, std::abs(x[c] - y[c]));
  }
  for (int k = 0; k < a.rho.levels(); ++k) change = std::max(change, std::abs(a.rho[k] - b.rho[k]));
  return change;
}

std::vector<ConfusionMatrix> per_judge_confusions(const EmParams& params, std::size_t judges) {
  if (params.confusions.size() == judges) return params.confusions;
  return std::vector<ConfusionMatrix>(judges, params.confusions.front());
}

TrueLabels labels_from_responsibilities(const Responsibilities& z) {
  std::vector<int> labels(z.n_items());
  for (std::size_t i = 0; i < z.n_items(); ++i) {
    labels[i] = static_cast<int>(argmax_first(z.row(i))) + 1;
  }
  return TrueLabels(std::move(labels), z.levels());
}

FitResult fit_em(const RatingsTable& table, const HyperParams& hyper, EmKind kind, EmInit init) {
  const int levels = table.n_levels();
  hyper.check(levels);
  if (auto report = validate_ratings(table); !report.ok()) {
    throw Fault("invalid ratings table:\n" + report.describe());
  }

  EmParams params = init_params(levels, table.n_judges(), hyper.lambda, kind, init);
  FitResult result;
  result.model_kind = kind == EmKind::per_judge ? ModelKind::dawid_skene : ModelKind::single_confusion;

  for (int iter = 0; iter < hyper.em_max_iters; ++iter) {
    Responsibilities z = e_step(table, params);
    EmParams next = m_step(table, z, kind, hyper.lambda);
    result.loglik_trace.push_back(observed_log_likelihood(table, next.confusions, next.rho));
    const double change = max_param_change(params, next);
    params = std::move(next);
    result.iterations = iter + 1;
    if (change < hyper.em_tol) {
      result.converged = true;
      break;
    }
  }

  Responsibilities z = e_step(table, params);
  result.labels = labels_from_responsibilities(z);
  result.responsibilities = std::move(z);
  result.confusions = per_judge_confusions(params, table.n_judges());
  result.rho = params.rho;
  return result;
}

}  // namespace rateagg
