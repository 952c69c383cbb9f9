#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rateagg/io.hpp"

using namespace rateagg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rateagg_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + RATEAGG_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("parse_ratings maps ids in first-appearance order") {
  auto loaded = parse_ratings("item,judge,rating\nq7,alice,2\nq7,bob,1\nq3,alice,3\n");
  CHECK(loaded.table.n_items() == 2);
  CHECK(loaded.table.n_judges() == 2);
  CHECK(loaded.table.n_levels() == 3);
  CHECK(loaded.item_ids == std::vector<std::string>{"q7", "q3"});
  CHECK(loaded.judge_ids == std::vector<std::string>{"alice", "bob"});
  CHECK(loaded.table.at(0, 0) == 2);
  CHECK(loaded.table.at(1, 1) == 0);
  CHECK(parse_ratings("item,judge,rating\na,b,1\n").table.n_levels() == 2);
  CHECK(parse_ratings("item,judge,rating\na,b,1\n", 5).table.n_levels() == 5);
}

TEST_CASE("parse_ratings faults with line numbers") {
  CHECK_THROWS_WITH_AS(parse_ratings("item,judge,rating\na,x,1\nb,x,2\na,x,2\n"),
                       doctest::Contains("lines 2 and 4"), Fault);
  CHECK_THROWS_WITH_AS(parse_ratings(""), "no ratings", Fault);
  CHECK_THROWS_WITH_AS(parse_ratings("item,judge,rating\n"), "no ratings", Fault);
  CHECK_THROWS_WITH_AS(parse_ratings("item,judge,rating\na,x\n"), doctest::Contains("line 2"), Fault);
  CHECK_THROWS_WITH_AS(parse_ratings("item,judge,rating\na,x,1\na,y,1.5\n"), doctest::Contains("line 3"), Fault);
  CHECK_THROWS_WITH_AS(parse_ratings("item,judge,rating\na,x,0\n"), doctest::Contains("line 2"), Fault);
  CHECK_THROWS_AS(parse_ratings("id,who,score\na,x,1\n"), Fault);
  CHECK_THROWS_AS(parse_ratings("item,judge,rating\na,x,4\n", 3), Fault);
}

TEST_CASE("ratings files round trip and keep a stable mapping") {
  auto t = RatingsTable::from_rows({{1, 2, 3}, {0, 2, 2}, {3, 0, 0}}, 3);
  const auto path = scratch("ratings.csv");
  write_ratings(path, t);
  auto a = load_ratings(path);
  auto b = load_ratings(path);
  CHECK(a.table == t);
  CHECK(a.item_ids == b.item_ids);
  CHECK(a.judge_ids == std::vector<std::string>{"judge1", "judge2", "judge3"});
  CHECK_THROWS_AS(load_ratings(scratch("missing.csv")), Fault);
  CHECK_THROWS_AS(write_ratings("/nonexistent-dir/x.csv", t), Fault);

  const auto truth = scratch("truth.csv");
  write_truth(truth, TrueLabels({2, 1}, 2));
  CHECK(slurp(truth) == "item,label\nitem1,2\nitem2,1\n");
}

TEST_CASE("most_confused_pair picks the largest off-diagonal cell") {
  auto m = most_confused_pair({{0.6, 0.3, 0.1}, {0.1, 0.5, 0.4}, {0.1, 0.4, 0.5}});
  CHECK(m == MostConfused{2, 3, 0.4});
}

namespace {

LoadedRatings small_data() {
  return parse_ratings(
      "item,judge,rating\n"
      "a,x,1\na,y,1\na,z,2\n"
      "b,x,2\nb,y,2\nb,z,2\n"
      "c,x,1\nc,y,1\nc,z,1\n"
      "d,x,2\nd,y,1\nd,z,2\n");
}

}  // namespace

TEST_CASE("reports round trip through JSON for every model") {
  auto data = small_data();
  FitOptions opts;
  opts.hyper.burn_in = 30;
  opts.hyper.kept_samples = 10;
  opts.hyper.thin = 1;
  for (ModelKind kind : {ModelKind::majority_vote, ModelKind::single_confusion, ModelKind::dawid_skene,
                         ModelKind::hybrid_confusion}) {
    auto fit = fit_model(kind, data.table, opts);
    auto doc = make_report(fit, data, opts);
    CHECK(validate_report(doc).empty());
    const bool hybrid = kind == ModelKind::hybrid_confusion;
    CHECK(doc.rho_std.has_value() == hybrid);
    for (const auto& j : doc.judges) CHECK(j.stddev.has_value() == hybrid);
    CHECK(doc.samples.has_value() == hybrid);
    CHECK(doc.items.front().id == "a");

    auto json = report_to_json(doc);
    CHECK(json["format"] == "rateagg-report");
    CHECK(report_from_json(json) == doc);
    CHECK(report_from_json(nlohmann::json::parse(json.dump())) == doc);

    const auto path = scratch(std::string("report_") + model_name(kind) + ".json");
    write_report(doc, path);
    CHECK(load_report(path) == doc);
    CHECK(render_report(doc).find("judge x") != std::string::npos);
  }
}

TEST_CASE("validate_report flags schema problems") {
  auto data = small_data();
  auto doc = make_report(fit_model(ModelKind::dawid_skene, data.table, FitOptions{}), data, FitOptions{});
  auto broken = doc;
  broken.judges[0].mean[0][0] += 0.1;
  CHECK_FALSE(validate_report(broken).empty());
  broken = doc;
  broken.judges[0].stddev = broken.judges[0].mean;
  CHECK_FALSE(validate_report(broken).empty());
  broken = doc;
  broken.items.pop_back();
  CHECK_FALSE(validate_report(broken).empty());
  broken = doc;
  broken.model_kind = "hybrid_confusion";
  CHECK_FALSE(validate_report(broken).empty());

  auto json = report_to_json(doc);
  json["format"] = "other";
  CHECK_THROWS_AS(report_from_json(json), Fault);
  auto missing = report_to_json(doc);
  missing.erase("rho");
  CHECK_THROWS_AS(report_from_json(missing), Fault);
}

TEST_CASE("curves CSV: one model, one grid point, two metrics") {
  BenchmarkResult r;
  r.grid_kind = GridKind::items;
  r.runs = 2;
  r.series.push_back({ModelKind::dawid_skene, 50, "recovery", {0.9, 0.8}, 0.85, 0.0707106781});
  r.series.push_back({ModelKind::dawid_skene, 50, "rho_l1", {0.1, 0.2}, 0.15, 0.0707106781});
  const auto path = scratch("curves.csv");
  emit_curves(r, path);
  CHECK(slurp(path) ==
        "model,grid,grid_value,metric,mean,std,runs\n"
        "dawid_skene,n_items,50,recovery,0.85,0.0707106781,2\n"
        "dawid_skene,n_items,50,rho_l1,0.15,0.0707106781,2\n");
  emit_per_run(r, scratch("per_run.csv"));
  std::istringstream lines(slurp(scratch("per_run.csv")));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 5);
  CHECK_THROWS_AS(emit_curves(BenchmarkResult{}, path), Fault);
}

TEST_CASE("curves rows are grouped by model and metric with ascending grid") {
  BenchmarkResult r;
  r.series.push_back({ModelKind::hybrid_confusion, 200, "recovery", {1.0}, 1.0, 0.0});
  r.series.push_back({ModelKind::majority_vote, 5, "recovery", {0.5}, 0.5, 0.0});
  r.series.push_back({ModelKind::hybrid_confusion, 5, "recovery", {0.7}, 0.7, 0.0});
  r.series.push_back({ModelKind::hybrid_confusion, 5, "rho_l1", {0.3}, 0.3, 0.0});
  std::istringstream in(curves_csv(r));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 5);
  CHECK(lines[1].rfind("hybrid_confusion,n_items,5,recovery", 0) == 0);
  CHECK(lines[2].rfind("hybrid_confusion,n_items,200,recovery", 0) == 0);
  CHECK(lines[3].rfind("hybrid_confusion,n_items,5,rho_l1", 0) == 0);
  CHECK(lines[4].rfind("majority_vote,n_items,5,recovery", 0) == 0);
}

TEST_CASE("command-line value parsers") {
  auto r = parse_ratio("2:1");
  CHECK(r.train == 2);
  CHECK(r.test == 1);
  CHECK_THROWS_AS(parse_ratio("2-1"), Fault);
  CHECK_THROWS_AS(parse_ratio("0:1"), Fault);
  CHECK(parse_list("0.1, 0.2,0.7") == std::vector<double>{0.1, 0.2, 0.7});
  CHECK(parse_int_list("5,10") == std::vector<int>{5, 10});
  CHECK_THROWS_AS(parse_int_list("5,x"), Fault);
  CHECK(parse_matrix("0.9,0.1;0.2,0.8") == std::vector<std::vector<double>>{{0.9, 0.1}, {0.2, 0.8}});
}

TEST_CASE("CLI: config file values apply and flags override them") {
  const auto ratings = scratch("cli_ratings.csv");
  const auto config = scratch("cli_fit.ini");
  const auto report = scratch("cli_report.json");
  REQUIRE(run_cli("simulate --fig2 --items 40 --seed 3 --output " + ratings.string()) == 0);

  spit(config, "model = ds\nlambda = 7\nem-max-iters = 4\n");
  REQUIRE(run_cli("fit --config " + config.string() + " --input " + ratings.string() + " --report " +
                  report.string()) == 0);
  auto doc = load_report(report);
  CHECK(doc.model_kind == "dawid_skene");
  CHECK(doc.config["lambda"] == 7.0);
  CHECK(doc.config["em_max_iters"] == 4);

  REQUIRE(run_cli("fit --config " + config.string() + " --lambda 2 --model sc --input " + ratings.string() +
                  " --report " + report.string()) == 0);
  doc = load_report(report);
  CHECK(doc.model_kind == "single_confusion");
  CHECK(doc.config["lambda"] == 2.0);
  CHECK(doc.config["em_max_iters"] == 4);
}

TEST_CASE("CLI: exit codes") {
  CHECK(run_cli("fit --input " + scratch("does_not_exist.csv").string()) != 0);
  CHECK(run_cli("fit --model zz --input x.csv") != 0);
  CHECK(run_cli("") != 0);
  const auto bad = scratch("bad_report.json");
  auto data = small_data();
  auto doc = make_report(fit_model(ModelKind::dawid_skene, data.table, FitOptions{}), data, FitOptions{});
  doc.judges[0].mean[0][0] = 0.5;
  write_report(doc, bad);
  CHECK(run_cli("report --input " + bad.string()) != 0);
}
