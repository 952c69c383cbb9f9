#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "rateagg/em.hpp"
#include "rateagg/eval.hpp"
#include "rateagg/synth.hpp"
#include "test_support.hpp"

using namespace rateagg;
using namespace rateagg::testing;

TEST_CASE("init_params places rows at the prior mean") {
  auto p = init_params(3, 2, 3.0, EmKind::per_judge);
  REQUIRE(p.confusions.size() == 2);
  for (const auto& c : p.confusions) {
    for (int k = 0; k < 3; ++k) {
      for (int t = 0; t < 3; ++t) {
        CHECK(c(k, t) == doctest::Approx(k == t ? 4.0 / 6.0 : 1.0 / 6.0).epsilon(1e-15));
      }
    }
  }
  for (int k = 0; k < 3; ++k) CHECK(p.rho[k] == doctest::Approx(1.0 / 3.0));

  auto strong = init_params(3, 1, 10.0, EmKind::shared);
  REQUIRE(strong.confusions.size() == 1);
  CHECK(strong.confusions[0](1, 1) == doctest::Approx(11.0 / 13.0).epsilon(1e-15));
  CHECK(strong.confusions[0](1, 2) == doctest::Approx(1.0 / 13.0).epsilon(1e-15));

  auto flat = init_params(2, 1, 0.0, EmKind::per_judge);
  CHECK(flat.confusions[0](0, 0) == doctest::Approx(0.5));
  CHECK(flat.confusions[0](0, 1) == doctest::Approx(0.5));
}

TEST_CASE("literal initialization renormalizes lambda/(lambda+K) rows") {
  auto p = init_params(3, 1, 3.0, EmKind::per_judge, EmInit::literal_normalized);
  // Row (3/6, 1/6, 1/6) sums to 5/6; renormalized it is (3/5, 1/5, 1/5).
  CHECK(p.confusions[0](0, 0) == doctest::Approx(0.6));
  CHECK(p.confusions[0](0, 1) == doctest::Approx(0.2));
}

TEST_CASE("e_step examples") {
  auto theta = ConfusionMatrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});

  SUBCASE("item with no ratings gets rho") {
    auto t = RatingsTable::from_rows({{0, 1}}, 2);
    EmParams p{{theta, ConfusionMatrix::identity(2)}, LabelDistribution({0.25, 0.75})};
    // Judge 2 rated; replace with a table where the item is unrated by both.
    auto blank = RatingsTable::from_rows({{0, 0}}, 2);
    auto z = e_step(blank, p);
    CHECK(z(0, 0) == 0.25);
    CHECK(z(0, 1) == 0.75);
  }
  SUBCASE("single rating") {
    auto t = RatingsTable::from_rows({{1}}, 2);
    auto z = e_step(t, EmParams{{theta}, LabelDistribution::uniform(2)});
    CHECK(z(0, 0) == doctest::Approx(0.8181818181818181).epsilon(1e-14));
    CHECK(z(0, 1) == doctest::Approx(0.18181818181818182).epsilon(1e-14));
  }
  SUBCASE("two conflicting ratings") {
    auto t = RatingsTable::from_rows({{1, 2}}, 2);
    auto z = e_step(t, EmParams{{theta, theta}, LabelDistribution::uniform(2)});
    CHECK(z(0, 0) == doctest::Approx(0.36).epsilon(1e-14));
    CHECK(z(0, 1) == doctest::Approx(0.64).epsilon(1e-14));
  }
  SUBCASE("zero posterior mass is a fault naming the item") {
    auto t = RatingsTable::from_rows({{1, 1}, {1, 2}}, 2);
    EmParams p{{ConfusionMatrix::identity(2), ConfusionMatrix::identity(2)}, LabelDistribution::uniform(2)};
    try {
      e_step(t, p);
      FAIL("expected fault");
    } catch (const Fault& e) {
      CHECK(std::string(e.what()).find("item 2") != std::string::npos);
    }
  }
}

TEST_CASE("m_step examples") {
  SUBCASE("degenerate counts") {
    auto t = RatingsTable::from_rows({{1}, {1}}, 3);
    Grid g(2, 3);
    g(0, 0) = g(1, 0) = 1.0;
    auto p = m_step(t, Responsibilities(g), EmKind::per_judge);
    CHECK(p.confusions[0](0, 0) == 1.0);
    CHECK(p.confusions[0](0, 1) == 0.0);
    CHECK(p.rho[0] == 1.0);
    CHECK(p.rho[1] == 0.0);
    // Labels 2 and 3 never carry mass: fallback to the prior-mean row.
    CHECK(p.confusions[0](1, 1) == doctest::Approx(4.0 / 6.0));
    CHECK(p.confusions[0](2, 0) == doctest::Approx(1.0 / 6.0));
  }
  SUBCASE("half-half responsibilities") {
    auto t = RatingsTable::from_rows({{1}, {2}}, 2);
    Grid g(2, 2, 0.5);
    auto p = m_step(t, Responsibilities(g), EmKind::per_judge);
    for (int k = 0; k < 2; ++k) {
      for (int c = 0; c < 2; ++c) CHECK(p.confusions[0](k, c) == doctest::Approx(0.5));
    }
    CHECK(p.rho[0] == doctest::Approx(0.5));
  }
  SUBCASE("shared kind pools judges") {
    auto t = RatingsTable::from_rows({{1, 2}, {1, 1}}, 2);
    Grid g(2, 2);
    g(0, 0) = g(1, 0) = 1.0;
    auto p = m_step(t, Responsibilities(g), EmKind::shared);
    REQUIRE(p.confusions.size() == 1);
    CHECK(p.confusions[0](0, 0) == doctest::Approx(0.75));
    CHECK(p.confusions[0](0, 1) == doctest::Approx(0.25));
  }
}

TEST_CASE("property: m_step on one-hot responsibilities equals counting") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int levels = 2 + static_cast<int>(gen() % 4);
    const std::size_t judges = 1 + gen() % 4;
    // Complete tables so that every (judge, label) row has data whenever the label occurs.
    auto table = random_table(gen, 5 + gen() % 30, judges, levels, 1.0);
    std::vector<int> labels(table.n_items());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % levels) + 1;
    std::shuffle(labels.begin(), labels.end(), gen);
    if (table.n_items() < static_cast<std::size_t>(levels)) continue;
    Grid g(table.n_items(), levels);
    for (std::size_t i = 0; i < labels.size(); ++i) g(i, labels[i] - 1) = 1.0;
    auto em = m_step(table, Responsibilities(g), EmKind::per_judge);
    auto counted = count_estimates(table, TrueLabels(labels, levels), 0.0);
    CHECK(em.rho == counted.rho);
    REQUIRE(em.confusions.size() == counted.confusions.size());
    for (std::size_t j = 0; j < judges; ++j) CHECK(em.confusions[j] == counted.confusions[j]);
  }
}

TEST_CASE("fit_em recovers unanimous labels") {
  auto t = RatingsTable::from_rows({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}, {3, 3, 3}, {2, 2, 2}, {3, 3, 3}}, 3);
  for (EmKind kind : {EmKind::per_judge, EmKind::shared}) {
    auto fit = fit_em(t, HyperParams{}, kind);
    CHECK(fit.converged);
    CHECK(fit.labels.values() == std::vector<int>{1, 2, 3, 3, 2, 3});
    CHECK(fit.rho[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-5));
    CHECK(fit.rho[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-5));
    CHECK(fit.rho[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-5));
    CHECK(fit.confusions.size() == 3);
  }
}

TEST_CASE("fit_em rejects invalid tables and reports non-convergence as data") {
  auto bad = RatingsTable::from_rows({{0, 0}, {1, 2}}, 2);
  CHECK_THROWS_AS(fit_em(bad, HyperParams{}, EmKind::per_judge), Fault);

  std::mt19937_64 gen(3);
  auto t = random_table(gen, 40, 4, 3);
  HyperParams h;
  h.em_max_iters = 1;
  h.em_tol = 1e-300;
  auto fit = fit_em(t, h, EmKind::per_judge);
  CHECK_FALSE(fit.converged);
  CHECK(fit.loglik_trace.size() == 1);
}

TEST_CASE("an exact fixed point is reproduced by one EM iteration") {
  auto t = RatingsTable::from_rows({{1, 1}, {2, 2}, {2, 2}, {1, 1}, {2, 2}}, 2);
  EmParams fixed{{ConfusionMatrix::identity(2), ConfusionMatrix::identity(2)},
                 LabelDistribution({0.4, 0.6})};
  auto next = m_step(t, e_step(t, fixed), EmKind::per_judge);
  CHECK(max_param_change(fixed, next) <= 1e-12);
}

TEST_CASE("property: one iteration from a converged fit stays put") {
  std::mt19937_64 gen(22);
  HyperParams h;
  h.em_tol = 1e-15;
  h.em_max_iters = 20000;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int levels = 2 + static_cast<int>(gen() % 2);
    auto table = random_table(gen, 20 + gen() % 20, 3, levels, 0.9);
    for (EmKind kind : {EmKind::per_judge, EmKind::shared}) {
      auto fit = fit_em(table, h, kind);
      if (!fit.converged) continue;
      ++checked;
      EmParams params{kind == EmKind::shared ? std::vector<ConfusionMatrix>{fit.confusions.front()}
                                             : fit.confusions,
                      fit.rho};
      auto next = m_step(table, e_step(table, params), kind, h.lambda);
      CHECK(max_param_change(params, next) <= 1e-12);
    }
  }
  CHECK(checked >= 10);
}

TEST_CASE("property: EM log-likelihood never decreases") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 60; ++trial) {
    const int levels = 2 + static_cast<int>(gen() % 4);
    auto table = random_table(gen, 1 + gen() % 50, 1 + gen() % 5, levels);
    for (EmKind kind : {EmKind::per_judge, EmKind::shared}) {
      auto fit = fit_em(table, HyperParams{}, kind);
      for (std::size_t s = 1; s < fit.loglik_trace.size(); ++s) {
        CHECK(fit.loglik_trace[s] >= fit.loglik_trace[s - 1] - 1e-8);
      }
    }
  }
}

namespace {

/// True when no responsibility row has two maximal entries.
bool tie_free(const Responsibilities& z) {
  for (std::size_t i = 0; i < z.n_items(); ++i) {
    auto row = z.row(i);
    const std::size_t best = argmax_first(row);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k != best && row[k] == row[best]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("property: EM is exactly equivariant under relabeling levels") {
  std::mt19937_64 gen(24);
  for (int trial = 0; trial < 40; ++trial) {
    const int levels = 2 + static_cast<int>(gen() % 4);
    const std::size_t judges = 1 + gen() % 4;
    auto table = random_table(gen, 5 + gen() % 40, judges, levels);
    const auto pi = random_permutation(gen, levels);
    auto permuted = relabel_ratings(table, pi);
    for (EmKind kind : {EmKind::per_judge, EmKind::shared}) {
      auto a = fit_em(table, HyperParams{}, kind);
      auto b = fit_em(permuted, HyperParams{}, kind);
      if (!tie_free(*a.responsibilities)) continue;
      CHECK(b.iterations == a.iterations);
      for (std::size_t i = 0; i < table.n_items(); ++i) CHECK(b.labels[i] == pi[a.labels[i] - 1] + 1);
      CHECK(b.rho == relabel(a.rho, pi));
      for (std::size_t j = 0; j < judges; ++j) {
        CHECK(b.confusions[j] == relabel_both_axes(a.confusions[j], pi));
      }
    }
  }
}

TEST_CASE("property: shared EM ignores judge order") {
  std::mt19937_64 gen(25);
  for (int trial = 0; trial < 30; ++trial) {
    const int levels = 2 + static_cast<int>(gen() % 3);
    const std::size_t judges = 2 + gen() % 4;
    auto table = random_table(gen, 5 + gen() % 30, judges, levels);
    std::vector<std::size_t> order(judges);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    RatingsTable shuffled(table.n_items(), judges, levels);
    for (std::size_t i = 0; i < table.n_items(); ++i) {
      for (std::size_t j = 0; j < judges; ++j) shuffled.set(i, j, table.at(i, order[j]));
    }
    auto a = fit_em(table, HyperParams{}, EmKind::shared);
    auto b = fit_em(shuffled, HyperParams{}, EmKind::shared);
    CHECK(a.labels == b.labels);
    CHECK(a.rho == b.rho);
    CHECK(a.confusions.front() == b.confusions.front());
    CHECK(a.loglik_trace == b.loglik_trace);
  }
}

TEST_CASE("Dawid-Skene recovers the simulated labels and rho with plenty of data") {
  Rng rng(2024);
  auto data = generate_synthetic(three_judge_spec(3000), rng);
  auto fit = fit_em(data.table, HyperParams{}, EmKind::per_judge);
  CHECK(recovery_rate(fit.labels, data.truth) > 0.9);

  Rng rng2(77);
  auto data2 = generate_synthetic(three_judge_spec(2000), rng2);
  auto fit2 = fit_em(data2.table, HyperParams{}, EmKind::per_judge);
  CHECK(l1_distance(fit2.rho, three_judge_rho()) < 0.05);
}

TEST_CASE("both initializations reach the same labels on well-separated data") {
  Rng rng(5);
  auto data = generate_synthetic(three_judge_spec(500), rng);
  auto a = fit_em(data.table, HyperParams{}, EmKind::per_judge, EmInit::prior_mean);
  auto b = fit_em(data.table, HyperParams{}, EmKind::per_judge, EmInit::literal_normalized);
  CHECK(recovery_rate(a.labels, b.labels) > 0.99);
}
