#include "rateagg/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "rateagg/eval.hpp"

namespace rateagg {

namespace {

constexpr std::uint64_t kDataStream = 0x44415441ULL;
constexpr std::uint64_t kModelStream = 0x4d4f444cULL;
constexpr std::uint64_t kSubsampleStream = 0x53554253ULL;
constexpr std::uint64_t kSplitStream = 0x53504c54ULL;

/// Moves the first `count` entries of `pool` to a uniform random subset.
template <typename T>
void partial_shuffle(std::vector<T>& pool, std::size_t count, Rng& rng) {
  for (std::size_t s = 0; s < count && s + 1 < pool.size(); ++s) {
    const std::size_t pick = s + rng.below(pool.size() - s);
    std::swap(pool[s], pool[pick]);
  }
}

}  // namespace

void SyntheticSpec::check() const {
  if (confusions_true.empty()) throw Fault("synthetic spec needs at least one judge");
  for (const auto& c : confusions_true) {
    if (c.levels() != levels()) throw Fault("synthetic confusion size does not match rho");
  }
  if (pattern == RatingPattern::per_item_count &&
      (ratings_per_item < 1 || static_cast<std::size_t>(ratings_per_item) > judges())) {
    throw Fault("ratings per item must lie in 1..J");
  }
}

std::vector<ConfusionMatrix> three_judge_confusions() {
  return {
      ConfusionMatrix::from_rows({{0.8, 0.0, 0.2}, {0.1, 0.8, 0.1}, {0.1, 0.0, 0.9}}),
      ConfusionMatrix::from_rows({{0.7, 0.2, 0.1}, {0.1, 0.7, 0.2}, {0.1, 0.1, 0.8}}),
      ConfusionMatrix::from_rows({{0.6, 0.3, 0.1}, {0.1, 0.5, 0.4}, {0.1, 0.4, 0.5}}),
  };
}

LabelDistribution three_judge_rho() { return LabelDistribution({0.05, 0.15, 0.8}); }

SyntheticSpec three_judge_spec(std::size_t n_items) {
  SyntheticSpec spec;
  spec.rho_true = three_judge_rho();
  spec.confusions_true = three_judge_confusions();
  spec.n_items = n_items;
  return spec;
}

SyntheticSpec panel_spec(std::size_t judges, std::size_t n_items) {
  SyntheticSpec spec = three_judge_spec(n_items);
  const auto base = three_judge_confusions();
  spec.confusions_true.clear();
  for (std::size_t j = 0; j < judges; ++j) spec.confusions_true.push_back(base[j % base.size()]);
  return spec;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
  spec.check();
  const int levels = spec.levels();
  const std::size_t judges = spec.judges();
  RatingsTable table(spec.n_items, judges, levels);
  std::vector<int> truth(spec.n_items);
  std::vector<std::size_t> pool(judges);

  for (std::size_t i = 0; i < spec.n_items; ++i) {
    const int k = static_cast<int>(rng.categorical(spec.rho_true.probs()));
    truth[i] = k + 1;
    std::iota(pool.begin(), pool.end(), 0);
    std::size_t raters = judges;
    if (spec.pattern == RatingPattern::per_item_count) {
      raters = static_cast<std::size_t>(spec.ratings_per_item);
      partial_shuffle(pool, raters, rng);
      std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(raters));
    }
    for (std::size_t s = 0; s < raters; ++s) {
      const std::size_t j = pool[s];
      table.set(i, j, static_cast<int>(rng.categorical(spec.confusions_true[j].row(k))) + 1);
    }
  }
  return SyntheticData{std::move(table), TrueLabels(std::move(truth), levels)};
}

RatingsTable subsample_ratings(const RatingsTable& table, int per_item, Rng& rng) {
  if (per_item < 1) throw Fault("ratings per item must be at least 1");
  RatingsTable out = table;
  std::vector<std::size_t> rated;
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    rated.clear();
    for (std::size_t j = 0; j < table.n_judges(); ++j) {
      if (table.at(i, j) != 0) rated.push_back(j);
    }
    const auto keep = static_cast<std::size_t>(per_item);
    if (rated.size() <= keep) continue;
    partial_shuffle(rated, keep, rng);
    for (std::size_t s = keep; s < rated.size(); ++s) out.set(i, rated[s], 0);
  }
  return out;
}

ItemSplit split_items(const RatingsTable& table, const TrueLabels& truth, SplitRatio ratio,
                      Rng& rng) {
  if (ratio.train < 1 || ratio.test < 1) throw Fault("split ratio parts must be positive");
  if (truth.size() != table.n_items()) throw Fault("truth does not match table");
  const int g = std::gcd(ratio.train, ratio.test);
  const std::size_t parts = static_cast<std::size_t>((ratio.train + ratio.test) / g);
  const std::size_t n = table.n_items();
  if (n < parts) {
    std::ostringstream os;
    os << "cannot split " << n << " items with ratio " << ratio.train << ":" << ratio.test;
    throw Fault(os.str());
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * ratio.train / (ratio.train + ratio.test)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  partial_shuffle(order, n, rng);

  ItemSplit split{std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()),
                  {table, truth},
                  {table, truth}};
  std::sort(split.train_items.begin(), split.train_items.end());
  std::sort(split.test_items.begin(), split.test_items.end());

  auto take = [&](const std::vector<std::size_t>& items) {
    std::vector<int> labels;
    labels.reserve(items.size());
    for (std::size_t i : items) labels.push_back(truth[i]);
    return SyntheticData{table.select_items(items), TrueLabels(std::move(labels), truth.levels())};
  };
  split.train = take(split.train_items);
  split.test = take(split.test_items);
  return split;
}

const char* grid_name(GridKind kind) {
  return kind == GridKind::items ? "n_items" : "ratings_per_item";
}

const char* eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::recovery: return "recovery";
    case EvalMode::memory: return "memory";
    case EvalMode::memoryless: return "memoryless";
    case EvalMode::both: return "both";
  }
  return "unknown";
}

EvalMode parse_eval_mode(const std::string& text) {
  if (text == "recovery") return EvalMode::recovery;
  if (text == "memory") return EvalMode::memory;
  if (text == "memoryless") return EvalMode::memoryless;
  if (text == "both") return EvalMode::both;
  throw Fault("unknown evaluation mode '" + text + "'");
}

void BenchmarkConfig::check() const {
  spec.check();
  if (runs < 1) throw Fault("runs must be at least 1");
  if (grid.empty()) throw Fault("benchmark grid is empty");
  if (models.empty()) throw Fault("benchmark needs at least one model");
  for (int g : grid) {
    if (g < 1) throw Fault("grid values must be positive");
    if (grid_kind == GridKind::ratings_per_item && static_cast<std::size_t>(g) > spec.judges()) {
      throw Fault("ratings per item exceeds the number of judges");
    }
  }
  if (mode == EvalMode::recovery && grid_kind != GridKind::items) {
    throw Fault("recovery mode varies the number of items");
  }
  if (split.train < 1 || split.test < 1) throw Fault("split ratio parts must be positive");
}

const MetricSeries& BenchmarkResult::at(ModelKind model, int grid_value,
                                        const std::string& metric) const {
  for (const auto& s : series) {
    if (s.model == model && s.grid_value == grid_value && s.metric == metric) return s;
  }
  std::ostringstream os;
  os << "no benchmark series for " << model_name(model) << " at " << grid_value << " / " << metric;
  throw Fault(os.str());
}

std::uint64_t run_seed(std::uint64_t master, int run, std::size_t grid_index) {
  return derive_seed(master, static_cast<std::uint64_t>(run), grid_index);
}

namespace {

using Metrics = std::vector<std::pair<std::string, double>>;

std::size_t model_slot(ModelKind kind) { return static_cast<std::size_t>(kind); }

FitOptions options_for(const BenchmarkConfig& config, ModelKind kind, std::uint64_t job_seed) {
  FitOptions options = config.fit;
  options.hyper.seed = derive_seed(job_seed, kModelStream, model_slot(kind));
  return options;
}

Metrics recovery_metrics(const BenchmarkConfig& config, ModelKind kind, const SyntheticData& data,
                         std::uint64_t job_seed) {
  const FitResult fit = fit_model(kind, data.table, options_for(config, kind, job_seed));
  Metrics m;
  m.emplace_back("recovery", recovery_rate(fit.labels, data.truth));
  m.emplace_back("rho_l1", l1_distance(fit.rho, config.spec.rho_true));
  for (int k = 0; k < fit.rho.levels(); ++k) {
    m.emplace_back("rho_hat_" + std::to_string(k + 1), fit.rho[k]);
  }
  double mae_total = 0.0;
  for (std::size_t j = 0; j < fit.confusions.size(); ++j) {
    const double mae = mae_confusion(fit.confusions[j], config.spec.confusions_true[j]);
    mae_total += mae;
    m.emplace_back("mae_judge_" + std::to_string(j + 1), mae);
  }
  m.emplace_back("mae_mean", mae_total / static_cast<double>(fit.confusions.size()));
  return m;
}

double memory_accuracy(const BenchmarkConfig& config, ModelKind kind, const ItemSplit& split,
                       std::uint64_t job_seed) {
  FitOptions options = options_for(config, kind, job_seed);
  if (kind == ModelKind::majority_vote) options.vote_smoothing = config.memory_vote_smoothing;
  const FitResult fit = fit_model(kind, split.train.table, options);
  const auto confusions =
      fill_unseen_judges(split.train.table, fit.confusions, config.fit.hyper.lambda);
  std::vector<int> predicted;
  predicted.reserve(split.test.table.n_items());
  for (std::size_t i = 0; i < split.test.table.n_items(); ++i) {
    // Hard zeros in the trained matrices can rule out every label for a test
    // item; the prediction then falls back to the class prior alone.
    try {
      predicted.push_back(predict_with_params(split.test.table.item_row(i), confusions, fit.rho).label);
    } catch (const Fault&) {
      predicted.push_back(static_cast<int>(argmax_first(fit.rho.probs())) + 1);
    }
  }
  return recovery_rate(TrueLabels(std::move(predicted), split.test.table.n_levels()), split.test.truth);
}

double memoryless_accuracy(const BenchmarkConfig& config, ModelKind kind, const ItemSplit& split,
                           std::uint64_t job_seed) {
  // Seeded independently of the training fit, so results do not depend on
  // whether memory mode also runs.
  FitOptions options = options_for(config, kind, derive_seed(job_seed, 1));
  const FitResult fit = fit_model(kind, split.test.table, options);
  return recovery_rate(fit.labels, split.test.truth);
}

Metrics run_job(const BenchmarkConfig& config, ModelKind kind, int run, std::size_t grid_index,
                const SyntheticData* recovery_data, const ItemSplit* split) {
  const std::uint64_t job_seed = run_seed(config.fit.hyper.seed, run, grid_index);
  if (config.mode == EvalMode::recovery) return recovery_metrics(config, kind, *recovery_data, job_seed);
  Metrics m;
  if (config.mode == EvalMode::memory || config.mode == EvalMode::both) {
    m.emplace_back("accuracy_memory", memory_accuracy(config, kind, *split, job_seed));
  }
  if (config.mode == EvalMode::memoryless || config.mode == EvalMode::both) {
    m.emplace_back("accuracy_memoryless", memoryless_accuracy(config, kind, *split, job_seed));
  }
  return m;
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.check();
  const std::size_t grid_size = config.grid.size();
  const std::size_t n_models = config.models.size();
  const std::size_t n_jobs = static_cast<std::size_t>(config.runs) * grid_size;

  // results[job][model] holds that job's metrics.
  std::vector<std::vector<Metrics>> results(n_jobs, std::vector<Metrics>(n_models));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::string error_context;

  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= n_jobs) return;
      const int run = static_cast<int>(job / grid_size);
      const std::size_t g = job % grid_size;
      const std::uint64_t job_seed = run_seed(config.fit.hyper.seed, run, g);
      std::size_t m = 0;
      try {
        SyntheticSpec spec = config.spec;
        if (config.grid_kind == GridKind::items) spec.n_items = static_cast<std::size_t>(config.grid[g]);
        Rng data_rng(derive_seed(job_seed, kDataStream));
        SyntheticData data = generate_synthetic(spec, data_rng);
        std::optional<ItemSplit> split;
        if (config.mode != EvalMode::recovery) {
          if (config.grid_kind == GridKind::ratings_per_item) {
            Rng sub_rng(derive_seed(job_seed, kSubsampleStream));
            data.table = subsample_ratings(data.table, config.grid[g], sub_rng);
          }
          Rng split_rng(derive_seed(job_seed, kSplitStream));
          split = split_items(data.table, data.truth, config.split, split_rng);
        }
        for (m = 0; m < n_models; ++m) {
          results[job][m] = run_job(config, config.models[m], run, g, &data,
                                    split ? &*split : nullptr);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error) {
          std::ostringstream os;
          os << "benchmark failed (model " << (m < n_models ? model_name(config.models[m]) : "-")
             << ", " << grid_name(config.grid_kind) << " " << config.grid[g] << ", run " << run + 1
             << "): " << e.what();
          error_context = os.str();
          first_error = std::current_exception();
        }
        next.store(n_jobs);
        return;
      }
    }
  };

  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_jobs));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) throw Fault(error_context);

  BenchmarkResult out;
  out.grid_kind = config.grid_kind;
  out.runs = config.runs;
  for (std::size_t m = 0; m < n_models; ++m) {
    for (std::size_t g = 0; g < grid_size; ++g) {
      const Metrics& first = results[g][m];
      for (std::size_t idx = 0; idx < first.size(); ++idx) {
        MetricSeries s{config.models[m], config.grid[g], first[idx].first, {}, 0.0, 0.0};
        for (int run = 0; run < config.runs; ++run) {
          s.per_run.push_back(results[static_cast<std::size_t>(run) * grid_size + g][m][idx].second);
        }
        double sum = 0.0;
        for (double v : s.per_run) sum += v;
        s.mean = sum / static_cast<double>(s.per_run.size());
        double ss = 0.0;
        for (double v : s.per_run) ss += (v - s.mean) * (v - s.mean);
        s.stddev = s.per_run.size() > 1 ? std::sqrt(ss / static_cast<double>(s.per_run.size() - 1)) : 0.0;
        out.series.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace rateagg
