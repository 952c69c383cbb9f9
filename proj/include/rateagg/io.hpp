#pragma once

// File formats:
//
//  ratings  CSV, header exactly `item,judge,rating`; one row per rating.
//           Item and judge are opaque strings, rating is an integer >= 1.
//           Indices are assigned in first-appearance order.
//  truth    CSV, header `item,label`.
//  report   JSON document (see ReportDocument).
//  curves   CSV, header `model,grid,grid_value,metric,mean,std,runs`;
//           rows grouped by model, then metric, with grid values ascending.
//  per-run  CSV, header `model,grid,grid_value,metric,run,value`.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rateagg/fit.hpp"
#include "rateagg/synth.hpp"
#include "rateagg/types.hpp"

namespace rateagg {

struct LoadedRatings {
  RatingsTable table;
  std::vector<std::string> item_ids;
  std::vector<std::string> judge_ids;
};

/// K is the largest rating (at least 2) unless `levels` overrides it.
LoadedRatings load_ratings(const std::filesystem::path& path, std::optional<int> levels = std::nullopt);
LoadedRatings parse_ratings(const std::string& text, std::optional<int> levels = std::nullopt);

/// Ids default to item<i>/judge<j> (one-based) when not supplied.
void write_ratings(const std::filesystem::path& path, const RatingsTable& table,
                   const std::vector<std::string>& item_ids = {},
                   const std::vector<std::string>& judge_ids = {});
void write_truth(const std::filesystem::path& path, const TrueLabels& truth,
                 const std::vector<std::string>& item_ids = {});

struct MostConfused {
  int true_level = 0;   // 1..K
  int rated_level = 0;  // 1..K
  double value = 0.0;
  bool operator==(const MostConfused&) const = default;
};

struct JudgeReport {
  std::string id;
  std::vector<std::vector<double>> mean;
  std::optional<std::vector<std::vector<double>>> stddev;
  MostConfused most_confused;
  bool operator==(const JudgeReport&) const = default;
};

struct ItemReport {
  std::string id;
  int label = 0;
  bool operator==(const ItemReport&) const = default;
};

struct SampleCounts {
  int kept = 0;
  int chains = 0;
  bool operator==(const SampleCounts&) const = default;
};

struct ReportDocument {
  std::string model_kind;
  int n_levels = 0;
  int n_items = 0;
  int n_judges = 0;
  std::vector<ItemReport> items;
  std::vector<double> rho;
  std::optional<std::vector<double>> rho_std;
  std::vector<JudgeReport> judges;
  std::vector<double> loglik_trace;
  bool converged = false;
  int iterations = 0;
  std::optional<SampleCounts> samples;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const ReportDocument&) const = default;
};

/// Off-diagonal cell with the largest value (first in row-major order on ties).
MostConfused most_confused_pair(const std::vector<std::vector<double>>& matrix);

ReportDocument make_report(const FitResult& fit, const LoadedRatings& data, const FitOptions& options);

nlohmann::json report_to_json(const ReportDocument& doc);
ReportDocument report_from_json(const nlohmann::json& j);

void write_report(const ReportDocument& doc, const std::filesystem::path& path);
ReportDocument load_report(const std::filesystem::path& path);

/// Schema and content checks: shapes agree with K/N/J, confusion rows and rho
/// stochastic within 1e-6, std blocks only for hybrid_confusion fits, all
/// numbers finite. Empty result means valid.
std::vector<std::string> validate_report(const ReportDocument& doc);

/// Human-readable rendering: labels summary, rho, and each judge's matrix as
/// `mean (std)` cells.
std::string render_report(const ReportDocument& doc);

void emit_curves(const BenchmarkResult& result, const std::filesystem::path& path);
std::string curves_csv(const BenchmarkResult& result);
void emit_per_run(const BenchmarkResult& result, const std::filesystem::path& path);

/// "2:1" -> {2, 1}.
SplitRatio parse_ratio(const std::string& text);
/// "0.1,0.2;0.3,0.4" -> rows; used for matrices on the command line.
std::vector<std::vector<double>> parse_matrix(const std::string& text);
std::vector<double> parse_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

}  // namespace rateagg
