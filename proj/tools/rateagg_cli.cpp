// rateagg: aggregate categorical ratings, simulate data, and run benchmarks.
//
//   rateagg fit      --model mv|sc|ds|hc --input ratings.csv [--report out.json]
//   rateagg simulate --fig2 --items 3000 --output ratings.csv [--truth truth.csv]
//   rateagg evaluate --config bench.ini --output curves.csv
//   rateagg report   --input out.json
//
// Every subcommand accepts --config FILE with `key = value` lines named after
// the long flags; flags given on the command line override the file.

#include <cstdio>
#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rateagg/eval.hpp"
#include "rateagg/fit.hpp"
#include "rateagg/io.hpp"
#include "rateagg/synth.hpp"

namespace {

using namespace rateagg;

struct CommonFit {
  double lambda = 3.0;
  std::string alpha;
  double em_tol = 1e-6;
  int em_max_iters = 500;
  std::string init = "prior-mean";
  int chains = 3;
  int burn_in = 1000;
  int samples = 100;
  int thin = 10;
  std::uint64_t seed = 0;
  std::string prior = "symmetric";
  double decay = 0.0;

  void add_to(CLI::App& app) {
    app.add_option("--lambda", lambda, "Prior strength lambda")->capture_default_str();
    app.add_option("--alpha", alpha, "Dirichlet parameter for rho, comma separated (default all ones)");
    app.add_option("--em-tol", em_tol, "EM convergence tolerance")->capture_default_str();
    app.add_option("--em-max-iters", em_max_iters, "EM iteration cap")->capture_default_str();
    app.add_option("--init", init, "EM start: prior-mean or literal-normalized")
        ->check(CLI::IsMember({"prior-mean", "literal-normalized"}))
        ->capture_default_str();
    app.add_option("--chains", chains, "Gibbs chains")->capture_default_str();
    app.add_option("--burnin", burn_in, "Gibbs burn-in sweeps per chain")->capture_default_str();
    app.add_option("--samples", samples, "Kept samples per chain")->capture_default_str();
    app.add_option("--thin", thin, "Sweeps between kept samples")->capture_default_str();
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_option("--prior", prior, "Confusion prior: symmetric or diag-decay")
        ->check(CLI::IsMember({"symmetric", "diag-decay"}))
        ->capture_default_str();
    app.add_option("--decay", decay, "Decay factor in (0,1) for diag-decay");
  }

  FitOptions options() const {
    FitOptions o;
    o.hyper.lambda = lambda;
    if (!alpha.empty()) o.hyper.alpha = parse_list(alpha);
    o.hyper.em_tol = em_tol;
    o.hyper.em_max_iters = em_max_iters;
    o.hyper.chains = chains;
    o.hyper.burn_in = burn_in;
    o.hyper.kept_samples = samples;
    o.hyper.thin = thin;
    o.hyper.seed = seed;
    o.em_init = init == "prior-mean" ? EmInit::prior_mean : EmInit::literal_normalized;
    if (prior == "diag-decay") {
      o.prior = PriorKind::diagonal_decaying;
      o.decay = decay;
    } else if (decay != 0.0) {
      throw Fault("--decay requires --prior diag-decay");
    }
    return o;
  }
};

struct SpecFlags {
  bool fig2 = false;
  std::size_t items = 0;
  std::size_t judges = 0;
  int per_item = 0;
  std::string rho;
  std::vector<std::string> confusions;

  void add_to(CLI::App& app) {
    app.add_flag("--fig2", fig2, "Three-level, three-judge preset with rho = (0.05, 0.15, 0.8)");
    app.add_option("--items", items, "Number of items");
    app.add_option("--judges", judges, "Panel size cycling through the preset matrices");
    app.add_option("--per-item", per_item, "Ratings per item (0 = every judge rates every item)");
    app.add_option("--rho", rho, "True label distribution, comma separated");
    app.add_option("--confusion", confusions, "One judge's true confusion matrix: rows ';' cells ','")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  SyntheticSpec spec(std::size_t default_items) const {
    SyntheticSpec s;
    const std::size_t n = items ? items : default_items;
    if (!confusions.empty()) {
      if (fig2 || judges) throw Fault("--confusion cannot be combined with --fig2 or --judges");
      if (rho.empty()) throw Fault("--confusion needs --rho");
      s.rho_true = LabelDistribution(parse_list(rho));
      for (const auto& c : confusions) s.confusions_true.push_back(ConfusionMatrix::from_rows(parse_matrix(c)));
      s.n_items = n;
    } else {
      s = judges ? panel_spec(judges, n) : three_judge_spec(n);
      if (!rho.empty()) s.rho_true = LabelDistribution(parse_list(rho));
    }
    if (per_item > 0) {
      s.pattern = RatingPattern::per_item_count;
      s.ratings_per_item = per_item;
    }
    s.check();
    return s;
  }
};

int run_fit(const std::string& model, const std::string& input, int k, const CommonFit& common,
            const std::string& report_path) {
  const FitOptions options = common.options();
  LoadedRatings data = load_ratings(input, k > 0 ? std::optional<int>(k) : std::nullopt);
  if (auto report = validate_ratings(data.table); !report.ok()) {
    throw Fault("invalid ratings:\n" + report.describe());
  }
  const FitResult fit = fit_model(parse_model(model), data.table, options);
  const ReportDocument doc = make_report(fit, data, options);
  if (report_path.empty()) {
    std::cout << render_report(doc);
  } else {
    write_report(doc, report_path);
    std::cout << "wrote " << report_path << " (" << doc.model_kind << ", N=" << doc.n_items
              << ", J=" << doc.n_judges << ", K=" << doc.n_levels << ")\n";
  }
  return 0;
}

int run_simulate(const SpecFlags& flags, std::uint64_t seed, const std::string& output,
                 const std::string& truth_path) {
  if (!flags.fig2 && flags.confusions.empty() && !flags.judges) {
    throw Fault("simulate needs --fig2, --judges, or --confusion/--rho");
  }
  const SyntheticSpec spec = flags.spec(3000);
  Rng rng(seed);
  const SyntheticData data = generate_synthetic(spec, rng);
  write_ratings(output, data.table);
  if (!truth_path.empty()) write_truth(truth_path, data.truth);
  std::cout << "wrote " << data.table.n_items() << " items x " << data.table.n_judges()
            << " judges to " << output << '\n';
  return 0;
}

struct EvalFlags {
  std::string output;
  std::string per_run;
  std::string mode = "recovery";
  std::string ratio = "2:1";
  int runs = 100;
  std::string models = "mv,sc,ds,hc";
  std::string grid;
  unsigned threads = 0;
  double vote_smoothing = 1.0;
};

int run_evaluate(const EvalFlags& flags, const SpecFlags& spec_flags, const CommonFit& common) {
  BenchmarkConfig config;
  config.mode = parse_eval_mode(flags.mode);
  config.grid_kind = config.mode == EvalMode::recovery ? GridKind::items : GridKind::ratings_per_item;
  config.spec = spec_flags.spec(config.mode == EvalMode::recovery ? 0 : 48);
  config.runs = flags.runs;
  config.split = parse_ratio(flags.ratio);
  config.fit = common.options();
  config.memory_vote_smoothing = flags.vote_smoothing;
  config.threads = flags.threads;
  for (const auto& name : [&] {
         std::vector<std::string> out;
         std::stringstream ss(flags.models);
         for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
         return out;
       }()) {
    config.models.push_back(parse_model(name));
  }
  if (!flags.grid.empty()) {
    config.grid = parse_int_list(flags.grid);
  } else if (config.mode == EvalMode::recovery) {
    config.grid = {5, 10, 20, 50, 100, 200, 500, 1000, 2000, 3000};
  } else {
    for (std::size_t r = 1; r <= config.spec.judges(); ++r) config.grid.push_back(static_cast<int>(r));
  }

  const BenchmarkResult result = run_benchmark(config);
  emit_curves(result, flags.output);
  if (!flags.per_run.empty()) emit_per_run(result, flags.per_run);
  std::cout << "wrote " << result.series.size() << " curve rows to " << flags.output << '\n';

  // Paired one-sided sign tests: hybrid_confusion against every other model.
  const bool has_hybrid = std::find(config.models.begin(), config.models.end(),
                                    ModelKind::hybrid_confusion) != config.models.end();
  if (!has_hybrid) return 0;
  std::vector<std::string> metrics;
  if (config.mode == EvalMode::recovery) metrics = {"recovery"};
  if (config.mode == EvalMode::memory || config.mode == EvalMode::both) metrics.push_back("accuracy_memory");
  if (config.mode == EvalMode::memoryless || config.mode == EvalMode::both) {
    metrics.push_back("accuracy_memoryless");
  }
  std::printf("\nsign tests (hybrid_confusion better than other):\n");
  for (const auto& metric : metrics) {
    for (int g : config.grid) {
      const auto& hc = result.at(ModelKind::hybrid_confusion, g, metric);
      for (ModelKind other : config.models) {
        if (other == ModelKind::hybrid_confusion) continue;
        const auto& o = result.at(other, g, metric);
        const PairedOutcomes paired = tally_pairs(hc.per_run, o.per_run);
        if (paired.wins_a + paired.wins_b == 0) {
          std::printf("  %-20s %s=%-5d vs %-16s all runs tied\n", metric.c_str(),
                      grid_name(result.grid_kind), g, model_name(other));
          continue;
        }
        std::printf("  %-20s %s=%-5d vs %-16s wins %ld/%ld ties %ld  p=%.4g\n", metric.c_str(),
                    grid_name(result.grid_kind), g, model_name(other), paired.wins_a,
                    paired.wins_a + paired.wins_b, paired.ties, sign_test(paired));
      }
    }
  }
  return 0;
}

int run_report(const std::string& input) {
  const ReportDocument doc = load_report(input);
  const auto problems = validate_report(doc);
  std::cout << render_report(doc);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "report problem: " << p << '\n';
    return 1;
  }
  return 0;
}

std::string strip(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Expands `<subcommand> --config FILE` into `--key=value` arguments placed
/// before the command-line ones. Keys already given on the command line are
/// skipped, so flags override the file. Blank lines and `#` comments are
/// ignored; a key may repeat for multi-valued options.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  std::string config_path;
  std::set<std::string> given;
  for (std::size_t a = 1; a < args.size(); ++a) {
    const std::string& arg = args[a];
    if (arg.rfind("--", 0) != 0) continue;
    const auto eq = arg.find('=');
    const std::string name = arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    if (name == "config") {
      if (eq != std::string::npos) config_path = arg.substr(eq + 1);
      else if (a + 1 < args.size()) config_path = args[a + 1];
    }
    given.insert(name);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw CLI::FileError::Missing(config_path);
  std::vector<std::string> extra;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    line = strip(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ConfigError(config_path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (given.count(key)) continue;
    extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregate categorical ratings into true labels and judge confusion matrices"};
  app.require_subcommand(1);
  std::string config_file;  // consumed by expand_config

  auto* fit = app.add_subcommand("fit", "Fit a model to a ratings file");
  std::string model = "hc", input, report_path;
  int k = 0;
  CommonFit fit_common;
  fit->add_option("--config", config_file, "key = value file; command-line flags win");
  fit->add_option("--model", model, "mv | sc | ds | hc")
      ->check(CLI::IsMember({"mv", "sc", "ds", "hc"}))
      ->capture_default_str();
  fit->add_option("--input", input, "Ratings CSV (item,judge,rating)")->required();
  fit->add_option("--k", k, "Number of rating levels (default: largest rating)");
  fit->add_option("--report", report_path, "Write the JSON report here instead of printing");
  fit_common.add_to(*fit);

  auto* sim = app.add_subcommand("simulate", "Generate synthetic ratings");
  SpecFlags sim_spec;
  std::uint64_t sim_seed = 0;
  std::string sim_out, sim_truth;
  sim->add_option("--config", config_file, "key = value file; command-line flags win");
  sim_spec.add_to(*sim);
  sim->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  sim->add_option("--output", sim_out, "Ratings CSV to write")->required();
  sim->add_option("--truth", sim_truth, "True labels CSV to write");

  auto* eval = app.add_subcommand("evaluate", "Run a repeated synthetic benchmark");
  EvalFlags eval_flags;
  SpecFlags eval_spec;
  CommonFit eval_common;
  eval->add_option("--config", config_file, "key = value file; command-line flags win");
  eval->add_option("--output", eval_flags.output, "Curves CSV to write")->required();
  eval->add_option("--per-run", eval_flags.per_run, "Per-run values CSV to write");
  eval->add_option("--mode", eval_flags.mode, "recovery | memory | memoryless | both")
      ->check(CLI::IsMember({"recovery", "memory", "memoryless", "both"}))
      ->capture_default_str();
  eval->add_option("--ratio", eval_flags.ratio, "Train:test split")->capture_default_str();
  eval->add_option("--runs", eval_flags.runs, "Repetitions per grid point")->capture_default_str();
  eval->add_option("--models", eval_flags.models, "Comma separated models")->capture_default_str();
  eval->add_option("--grid", eval_flags.grid,
                   "Comma separated item counts (recovery) or ratings per item (split modes)");
  eval->add_option("--threads", eval_flags.threads, "Worker threads (0 = all cores)");
  eval->add_option("--vote-smoothing", eval_flags.vote_smoothing,
                   "Count smoothing for majority vote in memory mode")
      ->capture_default_str();
  eval_spec.add_to(*eval);
  eval_common.add_to(*eval);

  auto* rep = app.add_subcommand("report", "Validate and pretty-print a report");
  std::string rep_input;
  rep->add_option("--input", rep_input, "Report JSON")->required();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*fit) return run_fit(model, input, k, fit_common, report_path);
    if (*sim) return run_simulate(sim_spec, sim_seed, sim_out, sim_truth);
    if (*eval) return run_evaluate(eval_flags, eval_spec, eval_common);
    if (*rep) return run_report(rep_input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
