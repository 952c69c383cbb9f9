#include "rateagg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

namespace rateagg {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Fault("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Fault("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Fault("failed writing " + path.string());
}

std::string default_id(const char* prefix, std::size_t index) {
  return std::string(prefix) + std::to_string(index + 1);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::vector<double>> to_rows(const Grid& g) {
  std::vector<std::vector<double>> rows(g.rows());
  for (std::size_t r = 0; r < g.rows(); ++r) rows[r].assign(g.row(r).begin(), g.row(r).end());
  return rows;
}

}  // namespace

LoadedRatings parse_ratings(const std::string& text, std::optional<int> levels) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  struct Row {
    std::size_t item, judge;
    int rating;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::vector<std::string> item_ids, judge_ids;
  std::unordered_map<std::string, std::size_t> item_index, judge_index;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> first_line;
  std::vector<std::string> duplicates;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != "item,judge,rating") {
        throw Fault("line " + std::to_string(line_no) + ": expected header 'item,judge,rating'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 3) {
      throw Fault("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                  std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw Fault("line " + std::to_string(line_no) + ": empty item or judge identifier");
    }
    int rating = 0;
    const auto& rt = fields[2];
    auto [ptr, ec] = std::from_chars(rt.data(), rt.data() + rt.size(), rating);
    if (ec != std::errc() || ptr != rt.data() + rt.size()) {
      throw Fault("line " + std::to_string(line_no) + ": rating '" + rt + "' is not an integer");
    }
    if (rating < 1) {
      throw Fault("line " + std::to_string(line_no) + ": rating must be at least 1");
    }
    auto [it_item, new_item] = item_index.try_emplace(fields[0], item_ids.size());
    if (new_item) item_ids.push_back(fields[0]);
    auto [it_judge, new_judge] = judge_index.try_emplace(fields[1], judge_ids.size());
    if (new_judge) judge_ids.push_back(fields[1]);
    auto key = std::make_pair(it_item->second, it_judge->second);
    auto [seen, fresh] = first_line.try_emplace(key, line_no);
    if (!fresh) {
      duplicates.push_back("(" + fields[0] + ", " + fields[1] + ") on lines " +
                           std::to_string(seen->second) + " and " + std::to_string(line_no));
      continue;
    }
    rows.push_back({it_item->second, it_judge->second, rating, line_no});
  }

  if (!duplicates.empty()) {
    std::string msg = "duplicate (item, judge) pairs:";
    for (const auto& d : duplicates) msg += "\n  " + d;
    throw Fault(msg);
  }
  if (rows.empty()) throw Fault("no ratings");

  int max_rating = 0;
  for (const auto& r : rows) max_rating = std::max(max_rating, r.rating);
  int k = std::max(2, max_rating);
  if (levels) {
    if (*levels < 2) throw Fault("K must be at least 2");
    if (*levels < max_rating) {
      for (const auto& r : rows) {
        if (r.rating > *levels) {
          throw Fault("line " + std::to_string(r.line) + ": rating " + std::to_string(r.rating) +
                      " exceeds K=" + std::to_string(*levels));
        }
      }
    }
    k = *levels;
  }

  RatingsTable table(item_ids.size(), judge_ids.size(), k);
  for (const auto& r : rows) table.set(r.item, r.judge, r.rating);
  return LoadedRatings{std::move(table), std::move(item_ids), std::move(judge_ids)};
}

LoadedRatings load_ratings(const std::filesystem::path& path, std::optional<int> levels) {
  return parse_ratings(read_file(path), levels);
}

void write_ratings(const std::filesystem::path& path, const RatingsTable& table,
                   const std::vector<std::string>& item_ids,
                   const std::vector<std::string>& judge_ids) {
  auto out = open_output(path);
  out << "item,judge,rating\n";
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    for (std::size_t j = 0; j < table.n_judges(); ++j) {
      const int r = table.at(i, j);
      if (r == 0) continue;
      out << (item_ids.empty() ? default_id("item", i) : item_ids.at(i)) << ','
          << (judge_ids.empty() ? default_id("judge", j) : judge_ids.at(j)) << ',' << r << '\n';
    }
  }
  finish_output(out, path);
}

void write_truth(const std::filesystem::path& path, const TrueLabels& truth,
                 const std::vector<std::string>& item_ids) {
  auto out = open_output(path);
  out << "item,label\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out << (item_ids.empty() ? default_id("item", i) : item_ids.at(i)) << ',' << truth[i] << '\n';
  }
  finish_output(out, path);
}

MostConfused most_confused_pair(const std::vector<std::vector<double>>& matrix) {
  MostConfused best{0, 0, -1.0};
  for (std::size_t k = 0; k < matrix.size(); ++k) {
    for (std::size_t t = 0; t < matrix[k].size(); ++t) {
      if (k != t && matrix[k][t] > best.value) {
        best = {static_cast<int>(k) + 1, static_cast<int>(t) + 1, matrix[k][t]};
      }
    }
  }
  return best;
}

ReportDocument make_report(const FitResult& fit, const LoadedRatings& data, const FitOptions& options) {
  const RatingsTable& table = data.table;
  ReportDocument doc;
  doc.model_kind = model_name(fit.model_kind);
  doc.n_levels = table.n_levels();
  doc.n_items = static_cast<int>(table.n_items());
  doc.n_judges = static_cast<int>(table.n_judges());
  for (std::size_t i = 0; i < table.n_items(); ++i) {
    doc.items.push_back({data.item_ids.at(i), fit.labels[i]});
  }
  doc.rho = fit.rho.probs();
  if (fit.posterior) doc.rho_std = fit.posterior->std_rho;
  for (std::size_t j = 0; j < table.n_judges(); ++j) {
    JudgeReport judge;
    judge.id = data.judge_ids.at(j);
    judge.mean = to_rows(fit.confusions.at(j).cells());
    if (fit.posterior) judge.stddev = to_rows(fit.posterior->std_confusions.at(j));
    judge.most_confused = most_confused_pair(judge.mean);
    doc.judges.push_back(std::move(judge));
  }
  doc.loglik_trace = fit.loglik_trace;
  doc.converged = fit.converged;
  doc.iterations = fit.iterations;
  if (fit.posterior) doc.samples = SampleCounts{fit.posterior->n_samples, fit.posterior->chain_count};

  const HyperParams& h = options.hyper;
  doc.config = {
      {"model", model_name(fit.model_kind)},
      {"lambda", h.lambda},
      {"alpha", h.alpha_for(table.n_levels())},
      {"em_tol", h.em_tol},
      {"em_max_iters", h.em_max_iters},
      {"em_init", options.em_init == EmInit::prior_mean ? "prior-mean" : "literal-normalized"},
      {"chains", h.chains},
      {"burn_in", h.burn_in},
      {"kept_samples", h.kept_samples},
      {"thin", h.thin},
      {"seed", h.seed},
      {"prior", options.prior == PriorKind::symmetric ? "symmetric" : "diag-decay"},
      {"decay", options.decay ? nlohmann::json(*options.decay) : nlohmann::json(nullptr)},
      {"vote_smoothing", options.vote_smoothing},
  };
  return doc;
}

nlohmann::json report_to_json(const ReportDocument& doc) {
  using nlohmann::json;
  json j;
  j["format"] = "rateagg-report";
  j["version"] = 1;
  j["model_kind"] = doc.model_kind;
  j["n_levels"] = doc.n_levels;
  j["n_items"] = doc.n_items;
  j["n_judges"] = doc.n_judges;
  json items = json::array();
  for (const auto& it : doc.items) items.push_back({{"id", it.id}, {"label", it.label}});
  j["items"] = std::move(items);
  j["rho"] = {{"mean", doc.rho}, {"std", doc.rho_std ? json(*doc.rho_std) : json(nullptr)}};
  json judges = json::array();
  for (const auto& jr : doc.judges) {
    judges.push_back({
        {"id", jr.id},
        {"confusion", {{"mean", jr.mean}, {"std", jr.stddev ? json(*jr.stddev) : json(nullptr)}}},
        {"most_confused",
         {{"true", jr.most_confused.true_level},
          {"rated", jr.most_confused.rated_level},
          {"value", jr.most_confused.value}}},
    });
  }
  j["judges"] = std::move(judges);
  j["loglik_trace"] = doc.loglik_trace;
  j["converged"] = doc.converged;
  j["iterations"] = doc.iterations;
  j["samples"] = doc.samples ? json{{"kept", doc.samples->kept}, {"chains", doc.samples->chains}}
                             : json(nullptr);
  j["config"] = doc.config;
  return j;
}

ReportDocument report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "rateagg-report") throw Fault("not a rateagg report");
    if (j.at("version").get<int>() != 1) throw Fault("unsupported report version");
    ReportDocument doc;
    doc.model_kind = j.at("model_kind").get<std::string>();
    doc.n_levels = j.at("n_levels").get<int>();
    doc.n_items = j.at("n_items").get<int>();
    doc.n_judges = j.at("n_judges").get<int>();
    for (const auto& it : j.at("items")) {
      doc.items.push_back({it.at("id").get<std::string>(), it.at("label").get<int>()});
    }
    doc.rho = j.at("rho").at("mean").get<std::vector<double>>();
    if (!j.at("rho").at("std").is_null()) doc.rho_std = j["rho"]["std"].get<std::vector<double>>();
    for (const auto& jr : j.at("judges")) {
      JudgeReport judge;
      judge.id = jr.at("id").get<std::string>();
      judge.mean = jr.at("confusion").at("mean").get<std::vector<std::vector<double>>>();
      if (!jr.at("confusion").at("std").is_null()) {
        judge.stddev = jr["confusion"]["std"].get<std::vector<std::vector<double>>>();
      }
      const auto& mc = jr.at("most_confused");
      judge.most_confused = {mc.at("true").get<int>(), mc.at("rated").get<int>(),
                             mc.at("value").get<double>()};
      doc.judges.push_back(std::move(judge));
    }
    doc.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
    doc.converged = j.at("converged").get<bool>();
    doc.iterations = j.at("iterations").get<int>();
    if (!j.at("samples").is_null()) {
      doc.samples = SampleCounts{j["samples"].at("kept").get<int>(), j["samples"].at("chains").get<int>()};
    }
    doc.config = j.at("config");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw Fault(std::string("malformed report: ") + e.what());
  }
}

void write_report(const ReportDocument& doc, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << report_to_json(doc).dump(2) << '\n';
  finish_output(out, path);
}

ReportDocument load_report(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Fault("cannot parse report " + path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

std::vector<std::string> validate_report(const ReportDocument& doc) {
  std::vector<std::string> problems;
  auto bad = [&](std::string msg) { problems.push_back(std::move(msg)); };
  const auto k = static_cast<std::size_t>(std::max(doc.n_levels, 0));
  auto stochastic = [&](const std::vector<double>& row, const std::string& what) {
    if (row.size() != k) {
      bad(what + " has length " + std::to_string(row.size()));
      return;
    }
    double total = 0.0;
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0) bad(what + " has a negative or non-finite entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) bad(what + " sums to " + format_number(total));
  };

  if (doc.n_levels < 2) bad("n_levels must be at least 2");
  if (doc.items.size() != static_cast<std::size_t>(doc.n_items)) bad("item count mismatch");
  if (doc.judges.size() != static_cast<std::size_t>(doc.n_judges)) bad("judge count mismatch");
  for (const auto& it : doc.items) {
    if (it.label < 1 || it.label > doc.n_levels) bad("item " + it.id + " label out of range");
  }
  stochastic(doc.rho, "rho");
  const bool hybrid = doc.model_kind == "hybrid_confusion";
  if (doc.rho_std && !hybrid) bad("rho std present for a non-hybrid fit");
  for (const auto& jr : doc.judges) {
    if (jr.mean.size() != k) bad("judge " + jr.id + " confusion has wrong row count");
    for (std::size_t r = 0; r < jr.mean.size(); ++r) {
      stochastic(jr.mean[r], "judge " + jr.id + " confusion row " + std::to_string(r + 1));
    }
    if (jr.stddev.has_value() != hybrid) {
      bad("judge " + jr.id + (hybrid ? " lacks" : " has") + " confusion std");
    }
    if (jr.stddev) {
      if (jr.stddev->size() != k) bad("judge " + jr.id + " std has wrong row count");
      for (const auto& row : *jr.stddev) {
        if (row.size() != k) bad("judge " + jr.id + " std has wrong column count");
        for (double v : row) {
          if (!std::isfinite(v) || v < 0.0) bad("judge " + jr.id + " std has an invalid entry");
        }
      }
    }
  }
  for (double v : doc.loglik_trace) {
    if (!std::isfinite(v)) bad("log-likelihood trace has a non-finite value");
  }
  if (hybrid && !doc.samples) bad("hybrid fit lacks sample counts");
  return problems;
}

std::string render_report(const ReportDocument& doc) {
  std::ostringstream os;
  os << "model: " << doc.model_kind << "  K=" << doc.n_levels << "  N=" << doc.n_items
     << "  J=" << doc.n_judges << '\n';
  if (doc.samples) {
    os << "samples: " << doc.samples->kept << " kept over " << doc.samples->chains << " chains\n";
  } else if (!doc.loglik_trace.empty()) {
    os << "iterations: " << doc.iterations << (doc.converged ? " (converged)" : " (not converged)")
       << "  final log-likelihood: " << format_number(doc.loglik_trace.back()) << '\n';
  }

  std::vector<int> label_counts(static_cast<std::size_t>(std::max(doc.n_levels, 0)), 0);
  for (const auto& it : doc.items) {
    if (it.label >= 1 && it.label <= doc.n_levels) ++label_counts[it.label - 1];
  }
  os << "\nlabel  rho";
  if (doc.rho_std) os << "              items";
  else os << "      items";
  os << '\n';
  os << std::fixed;
  for (std::size_t k = 0; k < doc.rho.size(); ++k) {
    os << std::setw(5) << k + 1 << "  " << std::setprecision(4) << doc.rho[k];
    if (doc.rho_std) os << " (" << std::setprecision(4) << (*doc.rho_std)[k] << ")";
    os << "  " << std::setw(5) << (k < label_counts.size() ? label_counts[k] : 0) << '\n';
  }

  for (const auto& jr : doc.judges) {
    os << "\njudge " << jr.id << "  (rows: true label, columns: rating)\n";
    for (std::size_t r = 0; r < jr.mean.size(); ++r) {
      os << std::setw(5) << r + 1;
      for (std::size_t c = 0; c < jr.mean[r].size(); ++c) {
        os << "  " << std::setprecision(2) << jr.mean[r][c];
        if (jr.stddev) os << " (" << std::setprecision(2) << (*jr.stddev)[r][c] << ")";
      }
      os << '\n';
    }
    os << "  most confused: true " << jr.most_confused.true_level << " rated as "
       << jr.most_confused.rated_level << " with probability " << std::setprecision(3)
       << jr.most_confused.value << '\n';
  }
  return os.str();
}

std::string curves_csv(const BenchmarkResult& result) {
  std::vector<const MetricSeries*> rows;
  for (const auto& s : result.series) rows.push_back(&s);
  // Models keep their first-appearance order; metrics likewise within a model.
  auto first_index = [&](auto pred) {
    for (std::size_t i = 0; i < result.series.size(); ++i) {
      if (pred(result.series[i])) return i;
    }
    return result.series.size();
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const MetricSeries* a, const MetricSeries* b) {
    const auto ma = first_index([&](const MetricSeries& s) { return s.model == a->model; });
    const auto mb = first_index([&](const MetricSeries& s) { return s.model == b->model; });
    if (ma != mb) return ma < mb;
    const auto ka = first_index([&](const MetricSeries& s) { return s.model == a->model && s.metric == a->metric; });
    const auto kb = first_index([&](const MetricSeries& s) { return s.model == b->model && s.metric == b->metric; });
    if (ka != kb) return ka < kb;
    return a->grid_value < b->grid_value;
  });

  std::ostringstream os;
  os << "model,grid,grid_value,metric,mean,std,runs\n";
  for (const auto* s : rows) {
    if (!std::isfinite(s->mean) || !std::isfinite(s->stddev)) {
      throw Fault("non-finite benchmark value for " + s->metric);
    }
    os << model_name(s->model) << ',' << grid_name(result.grid_kind) << ',' << s->grid_value << ','
       << s->metric << ',' << format_number(s->mean) << ',' << format_number(s->stddev) << ','
       << s->per_run.size() << '\n';
  }
  return os.str();
}

void emit_curves(const BenchmarkResult& result, const std::filesystem::path& path) {
  if (result.series.empty()) throw Fault("no benchmark rows to emit");
  const std::string text = curves_csv(result);
  auto out = open_output(path);
  out << text;
  finish_output(out, path);
}

void emit_per_run(const BenchmarkResult& result, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "model,grid,grid_value,metric,run,value\n";
  for (const auto& s : result.series) {
    for (std::size_t r = 0; r < s.per_run.size(); ++r) {
      out << model_name(s.model) << ',' << grid_name(result.grid_kind) << ',' << s.grid_value << ','
          << s.metric << ',' << r + 1 << ',' << format_number(s.per_run[r]) << '\n';
    }
  }
  finish_output(out, path);
}

SplitRatio parse_ratio(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw Fault("ratio must look like 2:1");
  const auto ints = parse_int_list(parts[0] + "," + parts[1]);
  if (ints[0] < 1 || ints[1] < 1) throw Fault("ratio parts must be positive");
  return SplitRatio{ints[0], ints[1]};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : split(text, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(field, &used));
      if (used != field.size()) throw Fault("");
    } catch (const std::exception&) {
      throw Fault("'" + field + "' is not a number");
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& field : split(text, ',')) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw Fault("'" + field + "' is not an integer");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::vector<double>> parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : split(text, ';')) rows.push_back(parse_list(row));
  return rows;
}

}  // namespace rateagg
