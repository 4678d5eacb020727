#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <omp.h>

#include "svyimp/config.hpp"
#include "svyimp/error.hpp"
#include "svyimp/io.hpp"
#include "svyimp/missingness.hpp"
#include "svyimp/pipeline.hpp"
#include "svyimp/random.hpp"

namespace fs = std::filesystem;
using namespace svyimp;

namespace {

constexpr int kConfigError = 1;
constexpr int kTotalFailure = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
};

struct Context {
  ExperimentConfig config;
  fs::path out;
  std::uint64_t seed = 0;
};

Context load(const Options& o) {
  Context c;
  c.config = load_config(o.config);
  if (o.seed) c.config.base_seed = *o.seed;
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers: must be >= 1");
    c.config.workers = *o.workers;
  }
  omp_set_num_threads(c.config.workers);
  c.out = o.out ? fs::path(*o.out) : fs::path(c.config.output_dir);
  c.seed = c.config.base_seed;
  return c;
}

void stage_manifest(const Context& c, const fs::path& dir, const std::string& stage,
                    nlohmann::json seeds) {
  seeds["base_seed"] = c.config.base_seed;
  io::write_json(dir / "manifest.json", {{"stage", stage},
                                         {"config_digest", config_digest(c.config)},
                                         {"config", config_to_json(c.config)},
                                         {"seeds", seeds}});
}

int cmd_generate(const Context& c) {
  const auto seed = derive_seed(c.config.base_seed, "frame");
  const auto frame = generate_frame(c.config.generator, seed);
  io::write_frame(c.out / "frame", frame);
  stage_manifest(c, c.out / "frame", "generate", {{"frame", seed}});
  fmt::print("frame: {} parents, {} subsidiaries, {} practices -> {}\n", frame.parents.size(),
             frame.subsidiaries.size(), frame.practices.size(), (c.out / "frame").string());
  return 0;
}

int cmd_claims(const Context& c) {
  const auto frame = io::read_frame(c.out / "frame");
  const auto seed = derive_seed(c.config.base_seed, "claims");
  const auto bens = generate_beneficiaries(frame, c.config.claims, seed);
  const auto attribution = attribute(bens, frame);
  const auto aggregates = aggregate(bens, attribution, frame);
  const auto dir = c.out / "claims";
  fs::create_directories(dir);
  io::write_beneficiaries(dir / "beneficiaries.csv", bens);
  io::write_attribution(dir / "attribution.csv", attribution);
  io::write_aggregates(dir / "aggregates.csv", aggregates);
  stage_manifest(c, dir, "claims", {{"claims", seed}});
  fmt::print("claims: {} beneficiaries -> {}\n", bens.size(), dir.string());
  return 0;
}

int cmd_sample(const Context& c) {
  const auto frame = io::read_frame(c.out / "frame");
  const auto seed = derive_seed(c.seed, "sample");
  const auto draw = draw_sample(frame, c.config.design, seed);
  io::write_sample(c.out / "sample", draw);
  stage_manifest(c, c.out / "sample", "sample", {{"sample", seed}});
  fmt::print("sample: {} practices -> {}\n", draw.units.size(), (c.out / "sample").string());
  return 0;
}

int cmd_missingness(const Context& c) {
  const auto frame = io::read_frame(c.out / "frame");
  const auto draw = io::read_sample(c.out / "sample");
  std::vector<ClaimsAggregate> aggregates;
  if (c.config.wants(Scenario::MI2)) {
    const auto path = c.out / "claims" / "aggregates.csv";
    if (!fs::exists(path))
      throw FormatError(path.string() + " not found; run the claims subcommand first");
    aggregates = io::read_aggregates(path);
  }
  const auto calibrated = calibrate_response_model(frame, draw, c.config.response);
  const auto seed = derive_seed(c.seed, "response");
  const auto data = apply_missingness(frame, draw, aggregates, calibrated, seed);
  const auto dir = c.out / "missingness";
  io::write_dataset(dir, data);
  io::write_json(dir / "response_model.json", calibrated);
  stage_manifest(c, dir, "missingness", {{"response", seed}});
  const auto y0 = data.column_index(outcome_column_name(0));
  fmt::print("missingness: {} of {} outcome cells observed -> {}\n", data.observed_count(y0),
             data.rows(), dir.string());
  return 0;
}

int cmd_impute(const Context& c) {
  const auto data = io::read_dataset(c.out / "missingness");
  const auto sets = impute_scenarios(c.config, data, c.seed);
  nlohmann::json seeds;
  std::size_t failed = 0;
  for (const auto& si : sets) {
    const std::string name(to_string(si.scenario));
    seeds[name] = derive_seed(c.seed, "impute", name);
    if (!si.set) {
      ++failed;
      fmt::print(stderr, "{}\n", si.error);
      continue;
    }
    const auto dir = c.out / "imputations" / name;
    io::write_imputations(dir, *si.set);
    fmt::print("impute {}: D = {} -> {}\n", name, si.set->D(), dir.string());
  }
  stage_manifest(c, c.out / "imputations", "impute", seeds);
  if (failed == 0) return 0;
  return failed == sets.size() ? kTotalFailure : 2;
}

int print_table(const ComparisonTable& table) {
  for (const auto& cell : table.cells) {
    if (cell.ok())
      fmt::print("{:>8} {:>4}  mean {:.6f}  se {:.6f}\n", cell.label(), cell.outcome,
                 cell.report->mean, cell.report->se);
    else
      fmt::print("{:>8} {:>4}  FAILED: {}\n", cell.label(), cell.outcome, cell.error);
  }
  return table.exit_code();
}

int cmd_estimate(const Context& c) {
  const auto data = io::read_dataset(c.out / "missingness");
  const auto draw = io::read_sample(c.out / "sample");
  std::vector<ScenarioImputation> sets;
  for (auto s : c.config.scenarios) {
    if (!c.config.wants(s)) continue;
    ScenarioImputation si;
    si.scenario = s;
    const auto dir = c.out / "imputations" / std::string(to_string(s));
    try {
      si.set = io::read_imputations(dir, data);
    } catch (const std::exception& e) {
      si.error = fmt::format("impute {}: {}", to_string(s), e.what());
    }
    sets.push_back(std::move(si));
  }
  const auto result = estimate_all(c.config, data, draw, sets, c.seed, c.out);
  write_estimates(c.out, c.config, result, {});
  return print_table(result.table);
}

int cmd_run(const Context& c) {
  const auto table = run_pipeline(c.config, c.seed, c.out);
  fmt::print("run: artifacts in {}\n", c.out.string());
  return print_table(table);
}

int cmd_replicate(const Context& c) {
  const auto study = replicate_study(c.config, c.out);
  for (const auto& r : study.summary)
    fmt::print("{:>8} {:>4}  bias {:+.6f}  emp_se {:.6f}  mean_se {:.6f}  coverage {:.3f}  "
               "failed {}\n",
               r.label(), r.outcome, r.bias, r.empirical_se, r.mean_se, r.coverage, r.n_failed);
  fmt::print("replicate: {} replicates -> {}\n", study.records.size(),
             (c.out / "summary.csv").string());
  return study.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic survey pipeline with multilevel multiple imputation"};
  app.require_subcommand(1);
  Options opts;

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Context&);
  };
  const Sub subs[] = {
      {"generate", "Generate the synthetic sampling frame", cmd_generate},
      {"claims", "Generate beneficiaries, attribute them and aggregate per practice", cmd_claims},
      {"sample", "Draw the sample from the frame", cmd_sample},
      {"missingness", "Calibrate the response model and mask non-respondents", cmd_missingness},
      {"impute", "Multiply impute the requested scenarios", cmd_impute},
      {"estimate", "Estimate every requested method and scenario", cmd_estimate},
      {"run", "Run the full pipeline", cmd_run},
      {"replicate", "Monte Carlo replication study", cmd_replicate},
  };
  int (*selected)(const Context&) = nullptr;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", opts.config, "Experiment config (JSON)")->required();
    sub->add_option("--seed", opts.seed, "Override the config base_seed");
    sub->add_option("--out", opts.out, "Output directory (default: config output_dir)");
    sub->add_option("--workers", opts.workers, "Worker threads");
    sub->callback([&selected, fn = s.fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    return selected(load(opts));
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kTotalFailure;
  }
}
