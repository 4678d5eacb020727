#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include "svyimp/config.hpp"
#include "svyimp/csv.hpp"
#include "svyimp/io.hpp"
#include "svyimp/pipeline.hpp"
#include "svyimp/random.hpp"

using namespace svyimp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("svyimp_pipeline_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json small_three_level() {
  return json::parse(R"({
    "generator": {"n_parents": 60, "n_independent_practices": 150},
    "design": {"design": "three_level", "strata_by": "nach",
               "stages": [{"method": "srswor", "sample_size": 8},
                          {"method": "srswor", "sample_size": 2, "take_all_if_smaller": true},
                          {"method": "srswor", "sample_size": 3, "take_all_if_smaller": true}],
               "independent_stage": {"method": "srswor", "sample_size": 60}},
    "response": {"targets": {"parent": 0.6, "subsidiary": 0.5, "practice": 0.5},
                 "slopes": {"npcp": 0.05}},
    "claims": {"per_practice_mean": 40},
    "imputation": {"n_burn": 10, "n_between": 2, "D": 3}
  })");
}

json single_level(std::int64_t sample_size, double target) {
  return json{{"generator", {{"n_parents", 40}, {"n_independent_practices", 200}}},
              {"design",
               {{"design", "single_level"},
                {"stages",
                 {{{"method", "srswor"}, {"sample_size", sample_size}, {"take_all_if_smaller", true}}}}}},
              {"response", {{"targets", {{"practice", target}}}, {"slopes", json::object()}}},
              {"methods", {"naive"}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ReplicateRecord record(std::int64_t index, std::vector<CellResult> cells) {
  ReplicateRecord r;
  r.index = index;
  r.result.emplace();
  r.result->table.cells = std::move(cells);
  return r;
}

CellResult ok_cell(Method m, std::string outcome, double mean, double se) {
  CellResult c;
  c.method = m;
  c.outcome = std::move(outcome);
  c.report.emplace();
  c.report->mean = mean;
  c.report->se = se;
  return c;
}

CellResult failed_cell(Method m, std::string outcome) {
  CellResult c;
  c.method = m;
  c.outcome = std::move(outcome);
  c.error = "boom";
  return c;
}

}  // namespace

TEST_CASE("summary of an estimator that always returns the truth") {
  std::vector<ReplicateRecord> records;
  for (int r = 0; r < 30; ++r)
    records.push_back(record(r, {ok_cell(Method::weighted, "y0", 0.42, 0.01 + 0.001 * r)}));
  const auto rows = summarize_replicates(records, {{"y0", 0.42}});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].bias == 0.0);
  CHECK(rows[0].coverage == 1.0);
  CHECK(rows[0].empirical_se == 0.0);
  CHECK(rows[0].n_ok == 30);
  CHECK(rows[0].n_failed == 0);
  CHECK(rows[0].mean_se == doctest::Approx(0.01 + 0.001 * 14.5));
  CHECK(rows[0].median_se == doctest::Approx(0.01 + 0.001 * 14.5));
}

TEST_CASE("summary statistics by hand") {
  std::vector<ReplicateRecord> records = {
      record(0, {ok_cell(Method::naive, "y0", 1.0, 0.5), failed_cell(Method::weighted, "y0")}),
      record(1, {ok_cell(Method::naive, "y0", 2.0, 0.2), failed_cell(Method::weighted, "y0")}),
      record(2, {ok_cell(Method::naive, "y0", 4.0, 1.0), failed_cell(Method::weighted, "y0")}),
  };
  ReplicateRecord lost;
  lost.index = 3;
  lost.error = "replicate crashed";
  records.push_back(lost);
  const auto rows = summarize_replicates(records, {{"y0", 2.0}});
  REQUIRE(rows.size() == 2);
  const auto& naive = rows[0];
  CHECK(naive.label() == "naive");
  CHECK(naive.n_ok == 3);
  CHECK(naive.n_failed == 1);
  CHECK(naive.mean_estimate == doctest::Approx(7.0 / 3.0));
  CHECK(naive.bias == doctest::Approx(1.0 / 3.0));
  CHECK(naive.empirical_se == doctest::Approx(std::sqrt(7.0 / 3.0)));
  CHECK(naive.median_se == doctest::Approx(0.5));
  // |1-2| <= 1.0 yes, |2-2| <= 0.4 yes, |4-2| <= 2.0 yes.
  CHECK(naive.coverage == 1.0);
  const auto& weighted = rows[1];
  CHECK(weighted.n_ok == 0);
  CHECK(weighted.n_failed == 4);
  CHECK(std::isnan(weighted.bias));

  StudyResult study;
  study.records = records;
  CHECK(study.exit_code() == 2);
  study.records = {records[0]};
  study.records[0].result->table.cells.pop_back();
  CHECK(study.exit_code() == 0);
  study.records = {lost};
  CHECK(study.exit_code() == 3);
}

TEST_CASE("comparison table exit codes and CSV") {
  TempDir dir("table");
  ComparisonTable t;
  t.outcomes = {"y0"};
  t.labels = {"naive", "weighted"};
  t.cells = {ok_cell(Method::naive, "y0", 0.5, 0.01)};
  CHECK(t.exit_code() == 0);
  auto bad = failed_cell(Method::weighted, "y0");
  bad.error = "stratum 2, single PSU";
  t.cells.push_back(bad);
  CHECK(t.exit_code() == 2);
  CHECK(t.find("weighted", "y0") != nullptr);
  CHECK(t.find("MI1", "y0") == nullptr);
  write_comparison_csv(dir.path / "c.csv", t);
  const auto csv = csv::Table::read(dir.path / "c.csv");
  REQUIRE(csv.rows() == 1);
  CHECK(csv.number(0, csv.column("naive_mean")) == 0.5);
  CHECK(csv.cell(0, csv.column("weighted_mean")) == "FAILED");
  CHECK(csv.cell(0, csv.column("errors")).find("stratum 2; single PSU") != std::string::npos);
  t.cells.erase(t.cells.begin());
  CHECK(t.exit_code() == 3);
}

TEST_CASE("naive mean on a fully responding census equals the population mean") {
  const auto config = parse_config(single_level(1000000, 1.0));
  const auto population = build_population(config);
  const auto truth = population_truth(config, population.frame);
  const auto result = run_replicate(config, population, 3, std::nullopt);
  for (const auto& o : config.outcome_columns()) {
    const auto* c = result.table.find("naive", o);
    REQUIRE(c != nullptr);
    REQUIRE(c->ok());
    CHECK(c->report->mean == doctest::Approx(truth.at(o)).epsilon(1e-12));
  }
}

TEST_CASE("replicates are reproducible byte for byte") {
  auto j = small_three_level();
  j["replicates"] = 2;
  j["scenarios"] = {"MI1"};
  const auto config = parse_config(j);
  TempDir a("det_a"), b("det_b");
  const auto sa = replicate_study(config, a.path);
  const auto sb = replicate_study(config, b.path);
  CHECK(sa.exit_code() == sb.exit_code());
  std::set<std::string> seen;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a.path);
    seen.insert(rel.string());
    if (rel.filename() == "manifest.json" && rel.parent_path().empty()) {
      auto ma = io::read_json(e.path()), mb = io::read_json(b.path / rel);
      ma.erase("runtime_seconds");
      mb.erase("runtime_seconds");
      CHECK(ma == mb);
      continue;
    }
    CHECK_MESSAGE(slurp(e.path()) == slurp(b.path / rel), rel.string());
  }
  CHECK(seen.count("summary.csv") == 1);
  CHECK(seen.count("replicates/r0000/comparison.csv") == 1);
  CHECK(seen.count("replicates/r0001/estimates.json") == 1);
  const auto manifest = io::read_json(a.path / "manifest.json");
  CHECK(manifest["replicate_seeds"][1] == replicate_seed(config.base_seed, 1));
  CHECK(replicate_seed(1, 0) != replicate_seed(1, 1));
  CHECK(replicate_seed(1, 0) != replicate_seed(2, 0));
}

TEST_CASE("run_pipeline persists every stage") {
  auto j = small_three_level();
  const auto config = parse_config(j);
  TempDir dir("run");
  const auto table = run_pipeline(config, config.base_seed, dir.path);
  CHECK(table.labels == std::vector<std::string>{"naive", "weighted", "MI1", "MI2"});
  CHECK(table.cells.size() == 8);
  for (const auto& c : table.cells) CHECK_MESSAGE(c.ok(), c.label() << " " << c.outcome << ": " << c.error);
  for (const char* f :
       {"frame/practices.csv", "frame/frame.json", "claims/aggregates.csv",
        "claims/beneficiaries.csv", "claims/attribution.csv", "sample/sample.csv",
        "sample/design_units.csv", "missingness/dataset.csv", "missingness/mask.csv",
        "missingness/response_model.json", "imputations/MI1/imputation_1.csv",
        "imputations/MI2/diagnostics.json", "comparison.csv", "efficiency.csv", "estimates.json",
        "manifest.json", "efficiency_MI1_y0.csv", "correlations_MI2_y1.csv"})
    CHECK_MESSAGE(fs::exists(dir.path / f), f);
  const auto manifest = io::read_json(dir.path / "manifest.json");
  CHECK(manifest["config_digest"] == config_digest(config));
  CHECK(manifest["seeds"]["sample"] == derive_seed(config.base_seed, "sample"));
  CHECK(manifest.contains("population_truth"));
  CHECK(manifest.contains("runtime_seconds"));
  // The manifest's config re-parses to the same experiment.
  CHECK(config_digest(parse_config(manifest["config"])) == config_digest(config));
}

TEST_CASE("stage failures mark cells instead of aborting") {
  SUBCASE("weighted variance undefined") {
    auto j = small_three_level();
    j["design"]["stages"][0]["sample_size"] = 1;  // one parent per stratum
    j["methods"] = {"naive", "weighted"};
    const auto config = parse_config(j);
    const auto result = run_replicate(config, build_population(config), 4, std::nullopt);
    CHECK(result.table.exit_code() == 2);
    CHECK(result.table.find("naive", "y0")->ok());
    CHECK(!result.table.find("weighted", "y0")->ok());
  }
  SUBCASE("sampling fails") {
    auto j = small_three_level();
    j["design"]["stages"][1]["take_all_if_smaller"] = false;
    j["design"]["stages"][1]["sample_size"] = 50;
    const auto config = parse_config(j);
    const auto result = run_replicate(config, build_population(config), 4, std::nullopt);
    CHECK(result.table.exit_code() == 3);
    CHECK(result.table.cells.size() == 8);
    for (const auto& c : result.table.cells) CHECK(c.error.rfind("sample: ", 0) == 0);
  }
}

TEST_CASE("naive bias under MCAR and under selection on a correlated covariate") {
  const std::int64_t replicates = 60;
  const auto bias_ratio = [&](double slope) {
    auto j = single_level(400, 0.5);
    j["generator"]["covariate_outcome_corr"] = 0.6;
    j["generator"]["outcome_count"] = 1;
    j["response"]["slopes"]["npcp"] = slope;
    j["replicates"] = replicates;
    const auto study = replicate_study(parse_config(j), std::nullopt);
    REQUIRE(study.summary.size() == 1);
    const auto& row = study.summary[0];
    REQUIRE(row.n_ok == replicates);
    return std::abs(row.bias) / (row.empirical_se / std::sqrt(static_cast<double>(replicates)));
  };
  CHECK(bias_ratio(0.0) < 3.0);
  CHECK(bias_ratio(0.6) > 3.0);
}
