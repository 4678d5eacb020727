#include "svyimp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "svyimp/csv.hpp"
#include "svyimp/dataset.hpp"
#include "svyimp/error.hpp"
#include "svyimp/io.hpp"
#include "svyimp/missingness.hpp"
#include "svyimp/random.hpp"
#include "svyimp/sampling.hpp"
#include "svyimp/stats.hpp"

namespace svyimp {

using csv::format_number;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell_label(Method method, const std::optional<Scenario>& scenario) {
  if (method == Method::mi && scenario) return std::string(to_string(*scenario));
  return std::string(to_string(method));
}

std::vector<std::string> requested_labels(const ExperimentConfig& config) {
  std::vector<std::string> labels;
  if (config.wants(Method::naive)) labels.emplace_back("naive");
  if (config.wants(Method::weighted)) labels.emplace_back("weighted");
  for (auto s : config.scenarios)
    if (config.wants(s)) labels.emplace_back(to_string(s));
  return labels;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::size_t outcome_index(const std::string& column) {
  for (std::size_t m = 0; m < 64; ++m)
    if (outcome_column_name(m) == column) return m;
  throw ConfigError("not an outcome column: " + column);
}

nlohmann::json seeds_json(std::uint64_t seed, const ExperimentConfig& config) {
  nlohmann::json j = {{"seed", seed},
                      {"base_seed", config.base_seed},
                      {"frame", derive_seed(config.base_seed, "frame")},
                      {"claims", derive_seed(config.base_seed, "claims")},
                      {"sample", derive_seed(seed, "sample")},
                      {"response", derive_seed(seed, "response")}};
  for (auto s : config.scenarios)
    j[fmt::format("impute_{}", to_string(s))] = derive_seed(seed, "impute", to_string(s));
  return j;
}

nlohmann::json manifest(const ExperimentConfig& config, std::uint64_t seed,
                        const std::vector<std::string>& files) {
  return {{"config_digest", config_digest(config)},
          {"config", config_to_json(config)},
          {"seeds", seeds_json(seed, config)},
          {"files", files}};
}

void write_efficiency_long(const fs::path& path, const std::vector<EfficiencyRecord>& records) {
  csv::Writer w(path);
  w.header({"scenario", "outcome", "imputation", "se_imputed", "ratio", "se_original",
            "size_ratio", "n_original", "n_imputed"});
  for (const auto& r : records) {
    const auto& d = r.diagnostic;
    for (std::size_t i = 0; i < d.se_imputed.size(); ++i)
      w.row({std::string(to_string(r.scenario)), r.outcome,
             format_number(static_cast<std::int64_t>(i + 1)), format_number(d.se_imputed[i]),
             format_number(d.per_imputation_ratio[i]), format_number(d.se_original),
             format_number(d.size_ratio), format_number(d.n_original),
             format_number(d.n_imputed)});
  }
}

ImputationSet impute_scenario(const ExperimentConfig& config, const StudyDataset& data,
                              Scenario s, std::uint64_t seed) {
  ImputationModelSpec spec = config.imputation;
  spec.outcome_columns = config.outcome_columns();
  const auto cols = scenario(s);
  const auto stream = derive_seed(seed, "impute", to_string(s));
  if (cols.extra_covariates.empty()) {
    spec.predictor_columns = cols.frame_covariates;
    return gibbs_impute(data, spec, stream);
  }
  return two_step_impute(data, cols.frame_covariates, cols.extra_covariates, spec, stream);
}

}  // namespace

std::string CellResult::label() const { return cell_label(method, scenario); }

std::string SummaryRow::label() const { return cell_label(method, scenario); }

const CellResult* ComparisonTable::find(const std::string& label,
                                        const std::string& outcome) const {
  for (const auto& c : cells)
    if (c.outcome == outcome && c.label() == label) return &c;
  return nullptr;
}

std::size_t ComparisonTable::failed() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok(); }));
}

int ComparisonTable::exit_code() const {
  const auto f = failed();
  if (f == 0) return 0;
  return f == cells.size() ? 3 : 2;
}

void to_json(nlohmann::json& j, const CellResult& c) {
  j = {{"method", std::string(to_string(c.method))},
       {"label", c.label()},
       {"outcome", c.outcome},
       {"ok", c.ok()}};
  if (c.report) j["report"] = *c.report;
  if (!c.error.empty()) j["error"] = c.error;
}

void write_comparison_csv(const fs::path& path, const ComparisonTable& table) {
  csv::Writer w(path);
  std::vector<std::string> header = {"outcome"};
  for (const auto& l : table.labels) {
    header.push_back(l + "_mean");
    header.push_back(l + "_se");
  }
  header.emplace_back("errors");
  w.header(header);
  for (const auto& outcome : table.outcomes) {
    std::vector<std::string> row = {outcome};
    std::string errors;
    for (const auto& l : table.labels) {
      const auto* c = table.find(l, outcome);
      if (c != nullptr && c->ok()) {
        row.push_back(format_number(c->report->mean));
        row.push_back(format_number(c->report->se));
        continue;
      }
      row.emplace_back("FAILED");
      row.emplace_back("FAILED");
      if (!errors.empty()) errors += " | ";
      errors += l + ": " + (c != nullptr ? c->error : std::string("cell missing"));
    }
    row.push_back(errors.empty() ? std::string(csv::kMissing) : csv_safe(errors));
    w.row(row);
  }
}

Population build_population(const ExperimentConfig& config) {
  Population p;
  p.frame = generate_frame(config.generator, derive_seed(config.base_seed, "frame"));
  if (config.wants(Scenario::MI2)) {
    p.beneficiaries =
        generate_beneficiaries(p.frame, config.claims, derive_seed(config.base_seed, "claims"));
    p.attribution = attribute(p.beneficiaries, p.frame);
    p.aggregates = aggregate(p.beneficiaries, p.attribution, p.frame);
  }
  return p;
}

std::map<std::string, double> population_truth(const ExperimentConfig& config,
                                               const Frame& frame) {
  std::map<std::string, double> truth;
  for (const auto& o : config.outcome_columns())
    truth[o] = population_mean(frame, outcome_index(o), config.level);
  return truth;
}

namespace {

std::vector<CellResult> failed_cells(const ExperimentConfig& config, const std::string& error) {
  std::vector<CellResult> cells;
  for (const auto& o : config.outcome_columns()) {
    if (config.wants(Method::naive)) cells.push_back({Method::naive, {}, o, {}, error});
    if (config.wants(Method::weighted)) cells.push_back({Method::weighted, {}, o, {}, error});
    for (auto s : config.scenarios)
      if (config.wants(s)) cells.push_back({Method::mi, s, o, {}, error});
  }
  return cells;
}

ComparisonTable empty_table(const ExperimentConfig& config, std::uint64_t seed) {
  ComparisonTable table;
  table.outcomes = config.outcome_columns();
  table.labels = requested_labels(config);
  table.metadata = {{"config_digest", config_digest(config)}, {"seeds", seeds_json(seed, config)}};
  return table;
}

}  // namespace

std::vector<ScenarioImputation> impute_scenarios(const ExperimentConfig& config,
                                                 const StudyDataset& data, std::uint64_t seed) {
  std::vector<ScenarioImputation> out;
  for (auto s : config.scenarios) {
    if (!config.wants(s)) continue;
    ScenarioImputation si;
    si.scenario = s;
    try {
      si.set = impute_scenario(config, data, s, seed);
    } catch (const std::exception& e) {
      si.error = fmt::format("impute {}: {}", to_string(s), e.what());
    }
    out.push_back(std::move(si));
  }
  return out;
}

ReplicateResult estimate_all(const ExperimentConfig& config, const StudyDataset& data,
                             const SampleDraw& draw,
                             const std::vector<ScenarioImputation>& imputations,
                             std::uint64_t seed, const std::optional<fs::path>& detail_out) {
  ReplicateResult result;
  result.seed = seed;
  result.table = empty_table(config, seed);
  auto& table = result.table;
  for (const auto& o : table.outcomes) {
    if (config.wants(Method::naive)) {
      CellResult c{Method::naive, {}, o, {}, {}};
      try {
        c.report = naive_mean(data, o, config.level);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
      table.cells.push_back(std::move(c));
    }
    if (config.wants(Method::weighted)) {
      CellResult c{Method::weighted, {}, o, {}, {}};
      try {
        c.report = weighted_mean(data, draw, o, config.level);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
      table.cells.push_back(std::move(c));
    }
  }
  for (auto s : config.scenarios) {
    if (!config.wants(s)) continue;
    const std::string name(to_string(s));
    const auto it = std::find_if(imputations.begin(), imputations.end(),
                                 [&](const ScenarioImputation& si) { return si.scenario == s; });
    const ImputationSet* set = nullptr;
    std::string error = "impute " + name + ": no imputations";
    if (it != imputations.end()) {
      if (it->set) set = &*it->set;
      error = it->error;
    }
    for (const auto& o : table.outcomes) {
      CellResult c{Method::mi, s, o, {}, set ? std::string() : error};
      if (set) {
        try {
          c.report = mi_mean(*set, o, config.level, config.estimators.finite_population_correction);
          c.report->scenario = s;
        } catch (const std::exception& e) {
          c.error = e.what();
        }
        try {
          auto diag = efficiency_diagnostic(*set, data, o);
          if (detail_out)
            io::write_efficiency(*detail_out / fmt::format("efficiency_{}_{}.csv", name, o), *set,
                                 diag, o);
          result.efficiency.push_back({s, o, std::move(diag)});
        } catch (const std::exception&) {
          // The comparison cell carries the error; the diagnostic is optional.
        }
        if (detail_out) {
          const auto cols = scenario(s);
          auto covariates = cols.frame_covariates;
          covariates.insert(covariates.end(), cols.extra_covariates.begin(),
                            cols.extra_covariates.end());
          io::write_correlations(*detail_out / fmt::format("correlations_{}_{}.csv", name, o),
                                 correlation_summary(*set, covariates, o));
        }
      }
      table.cells.push_back(std::move(c));
    }
  }
  return result;
}

void write_estimates(const fs::path& out, const ExperimentConfig& config,
                     const ReplicateResult& result, std::vector<std::string> files) {
  fs::create_directories(out);
  write_comparison_csv(out / "comparison.csv", result.table);
  write_efficiency_long(out / "efficiency.csv", result.efficiency);
  io::write_json(out / "estimates.json",
                 {{"metadata", result.table.metadata}, {"cells", result.table.cells}});
  files.insert(files.end(), {"comparison.csv", "efficiency.csv", "estimates.json"});
  io::write_json(out / "manifest.json", manifest(config, result.seed, files));
}

ReplicateResult run_replicate(const ExperimentConfig& config, const Population& population,
                              std::uint64_t seed, const std::optional<fs::path>& out,
                              Persist persist) {
  const auto& frame = population.frame;
  const bool all = out && persist == Persist::everything;
  std::vector<std::string> files;

  SampleDraw draw;
  StudyDataset data;
  std::string stage = "sample";
  std::optional<ReplicateResult> result;
  try {
    draw = draw_sample(frame, config.design, derive_seed(seed, "sample"));
    if (all) {
      io::write_sample(*out / "sample", draw);
      files.emplace_back("sample/");
    }
    stage = "missingness";
    const auto calibrated = calibrate_response_model(frame, draw, config.response);
    data = apply_missingness(frame, draw, population.aggregates, calibrated,
                             derive_seed(seed, "response"));
    if (all) {
      io::write_dataset(*out / "missingness", data);
      io::write_json(*out / "missingness" / "response_model.json", calibrated);
      files.emplace_back("missingness/");
    }
  } catch (const std::exception& e) {
    result.emplace();
    result->seed = seed;
    result->table = empty_table(config, seed);
    result->table.cells = failed_cells(config, stage + ": " + e.what());
  }

  if (!result) {
    const auto imputations = impute_scenarios(config, data, seed);
    if (all) {
      for (const auto& si : imputations) {
        if (!si.set) continue;
        const std::string name(to_string(si.scenario));
        io::write_imputations(*out / "imputations" / name, *si.set);
        files.push_back("imputations/" + name + "/");
      }
    }
    result = estimate_all(config, data, draw, imputations, seed,
                          all ? out : std::optional<fs::path>());
    if (all) {
      for (const auto& entry : fs::directory_iterator(*out)) {
        const auto name = entry.path().filename().string();
        if (name.starts_with("efficiency_") || name.starts_with("correlations_"))
          files.push_back(name);
      }
      std::sort(files.begin(), files.end());
    }
  }
  if (out) write_estimates(*out, config, *result, files);
  return std::move(*result);
}

ComparisonTable run_pipeline(const ExperimentConfig& config, std::uint64_t seed,
                             const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out);
  const auto population = build_population(config);
  io::write_frame(out / "frame", population.frame);
  if (!population.aggregates.empty()) {
    const auto dir = out / "claims";
    fs::create_directories(dir);
    io::write_beneficiaries(dir / "beneficiaries.csv", population.beneficiaries);
    io::write_attribution(dir / "attribution.csv", population.attribution);
    io::write_aggregates(dir / "aggregates.csv", population.aggregates);
  }
  auto result = run_replicate(config, population, seed, out, Persist::everything);

  auto m = io::read_json(out / "manifest.json");
  m["files"].push_back("frame/");
  if (!population.aggregates.empty()) m["files"].push_back("claims/");
  nlohmann::json truth;
  for (const auto& [k, v] : population_truth(config, population.frame)) truth[k] = v;
  m["population_truth"] = truth;
  m["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::write_json(out / "manifest.json", m);
  result.table.metadata["runtime_seconds"] = m["runtime_seconds"];
  return std::move(result.table);
}

std::uint64_t replicate_seed(std::uint64_t base_seed, std::int64_t replicate) {
  return derive_seed(base_seed, "replicate", replicate);
}

std::vector<SummaryRow> summarize_replicates(const std::vector<ReplicateRecord>& records,
                                             const std::map<std::string, double>& truth) {
  struct Acc {
    SummaryRow row;
    std::vector<double> est, se;
  };
  std::vector<Acc> acc;
  auto find = [&](const CellResult& c) -> Acc& {
    for (auto& a : acc)
      if (a.row.method == c.method && a.row.scenario == c.scenario && a.row.outcome == c.outcome)
        return a;
    Acc a;
    a.row.method = c.method;
    a.row.scenario = c.scenario;
    a.row.outcome = c.outcome;
    const auto t = truth.find(c.outcome);
    a.row.truth = t == truth.end() ? kNaN : t->second;
    acc.push_back(std::move(a));
    return acc.back();
  };
  std::int64_t whole_failures = 0;
  for (const auto& r : records) {
    if (!r.result) {
      ++whole_failures;
      continue;
    }
    for (const auto& c : r.result->table.cells) {
      auto& a = find(c);
      if (!c.ok()) {
        ++a.row.n_failed;
        continue;
      }
      a.est.push_back(c.report->mean);
      a.se.push_back(c.report->se);
    }
  }
  std::vector<SummaryRow> rows;
  for (auto& a : acc) {
    auto& row = a.row;
    row.n_failed += whole_failures;
    row.n_ok = static_cast<std::int64_t>(a.est.size());
    if (a.est.empty()) {
      row.mean_estimate = row.bias = row.empirical_se = row.mean_se = row.median_se =
          row.coverage = kNaN;
    } else {
      row.mean_estimate = stats::mean(a.est);
      row.bias = row.mean_estimate - row.truth;
      row.empirical_se = a.est.size() > 1 ? std::sqrt(stats::sample_variance(a.est)) : kNaN;
      row.mean_se = stats::mean(a.se);
      auto sorted = a.se;
      std::sort(sorted.begin(), sorted.end());
      const auto n = sorted.size();
      row.median_se = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      std::size_t covered = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (std::abs(a.est[i] - row.truth) <= 2.0 * a.se[i]) ++covered;
      row.coverage = static_cast<double>(covered) / static_cast<double>(n);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  csv::Writer w(path);
  w.header({"method", "scenario", "outcome", "truth", "n_ok", "n_failed", "mean_estimate", "bias",
            "empirical_se", "mean_se", "median_se", "coverage"});
  for (const auto& r : rows)
    w.row({std::string(to_string(r.method)),
           r.scenario ? std::string(to_string(*r.scenario)) : std::string(csv::kMissing),
           r.outcome, format_number(r.truth), format_number(r.n_ok), format_number(r.n_failed),
           format_number(r.mean_estimate), format_number(r.bias), format_number(r.empirical_se),
           format_number(r.mean_se), format_number(r.median_se), format_number(r.coverage)});
}

int StudyResult::exit_code() const {
  std::size_t ok = 0, bad = 0;
  for (const auto& r : records) {
    if (!r.result) {
      ++bad;
      continue;
    }
    const auto f = r.result->table.failed();
    bad += f;
    ok += r.result->table.cells.size() - f;
  }
  if (bad == 0) return 0;
  return ok == 0 ? 3 : 2;
}

StudyResult replicate_study(const ExperimentConfig& config, const std::optional<fs::path>& out) {
  const auto start = std::chrono::steady_clock::now();
  StudyResult study;
  const auto population = build_population(config);
  study.truth = population_truth(config, population.frame);
  const auto n = config.replicates;
  study.records.resize(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic) num_threads(config.workers)
  for (std::int64_t r = 0; r < n; ++r) {
    auto& rec = study.records[static_cast<std::size_t>(r)];
    rec.index = r;
    rec.seed = replicate_seed(config.base_seed, r);
    std::optional<fs::path> dir;
    if (out) dir = *out / "replicates" / fmt::format("r{:04d}", r);
    try {
      rec.result = run_replicate(config, population, rec.seed, dir, Persist::summary);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  }

  study.summary = summarize_replicates(study.records, study.truth);
  if (out) {
    write_summary_csv(*out / "summary.csv", study.summary);
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& r : study.records)
      if (!r.result) failures.push_back({{"replicate", r.index}, {"error", r.error}});
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& r : study.records) seeds.push_back(r.seed);
    io::write_json(*out / "manifest.json",
                   {{"config_digest", config_digest(config)},
                    {"config", config_to_json(config)},
                    {"replicate_seeds", seeds},
                    {"failures", failures},
                    {"files", {"summary.csv", "replicates/"}},
                    {"runtime_seconds", std::chrono::duration<double>(
                                            std::chrono::steady_clock::now() - start)
                                            .count()}});
  }
  return study;
}

}  // namespace svyimp
