#include "svyimp/io.hpp"

#include <charconv>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "svyimp/csv.hpp"
#include "svyimp/error.hpp"

namespace svyimp::io {

using csv::format_number;

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

namespace {

std::string fmt_int(std::int64_t v) { return format_number(v); }

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_number(v[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& part : csv::split(s, ';')) out.push_back(std::stod(part));
  return out;
}

}  // namespace

void write_frame(const fs::path& dir, const Frame& frame) {
  {
    csv::Writer w(dir / "parents.csv");
    w.header({"id", "nach", "nmg", "nos", "pertot"});
    for (const auto& p : frame.parents)
      w.row({fmt_int(p.id), fmt_int(p.nach), fmt_int(p.nmg), fmt_int(p.nos),
             format_number(p.pertot)});
  }
  {
    csv::Writer w(dir / "subsidiaries.csv");
    w.header({"id", "parent_id", "latent_trait"});
    for (const auto& s : frame.subsidiaries)
      w.row({fmt_int(s.id), fmt_int(s.parent_id), format_number(s.latent_trait)});
  }
  {
    csv::Writer w(dir / "practices.csv");
    w.header({"id", "os_id", "np", "npcp", "tin", "true_outcomes"});
    for (const auto& p : frame.practices)
      w.row({fmt_int(p.id), p.os_id ? fmt_int(*p.os_id) : std::string(csv::kMissing),
             fmt_int(p.np), fmt_int(p.npcp), p.tin, join_doubles(p.true_outcomes)});
  }
  write_json(dir / "frame.json", {{"generation_config", frame.generation_config},
                                  {"seed", frame.seed}});
}

Frame read_frame(const fs::path& dir) {
  Frame frame;
  const auto meta = read_json(dir / "frame.json");
  frame.generation_config = meta.at("generation_config").get<GeneratorConfig>();
  frame.seed = meta.at("seed").get<std::uint64_t>();
  {
    const auto t = csv::Table::read(dir / "parents.csv");
    const auto id = t.column("id"), nach = t.column("nach"), nmg = t.column("nmg"),
               nos = t.column("nos"), pertot = t.column("pertot");
    for (std::size_t r = 0; r < t.rows(); ++r)
      frame.parents.push_back({t.integer(r, id), t.integer(r, nach), t.integer(r, nmg),
                               t.integer(r, nos), t.number(r, pertot)});
  }
  {
    const auto t = csv::Table::read(dir / "subsidiaries.csv");
    const auto id = t.column("id"), parent = t.column("parent_id"), lt = t.column("latent_trait");
    for (std::size_t r = 0; r < t.rows(); ++r)
      frame.subsidiaries.push_back({t.integer(r, id), t.integer(r, parent), t.number(r, lt)});
  }
  {
    const auto t = csv::Table::read(dir / "practices.csv");
    const auto id = t.column("id"), os = t.column("os_id"), np = t.column("np"),
               npcp = t.column("npcp"), tin = t.column("tin"), y = t.column("true_outcomes");
    for (std::size_t r = 0; r < t.rows(); ++r) {
      Practice p;
      p.id = t.integer(r, id);
      if (t.cell(r, os) != csv::kMissing) p.os_id = t.integer(r, os);
      p.np = t.integer(r, np);
      p.npcp = t.integer(r, npcp);
      p.tin = t.cell(r, tin);
      try {
        p.true_outcomes = split_doubles(t.cell(r, y));
      } catch (const std::exception&) {
        throw FormatError(fmt::format("practices.csv: bad true_outcomes in row {}", r + 1));
      }
      frame.practices.push_back(std::move(p));
    }
  }
  frame.index();
  frame.validate();
  return frame;
}

void write_sample(const fs::path& dir, const SampleDraw& draw) {
  {
    csv::Writer w(dir / "sample.csv");
    w.header({"practice_id", "pi1", "pi2", "pi3", "pi_final", "weight"});
    for (const auto& u : draw.units)
      w.row({fmt_int(u.practice_id), format_number(u.pi1), format_number(u.pi2),
             format_number(u.pi3), format_number(u.pi_final), format_number(u.weight)});
  }
  {
    csv::Writer w(dir / "design_units.csv");
    w.header({"level", "unit_id", "stratum", "psu", "pi"});
    for (const auto& u : draw.units)
      w.row({"practice", fmt_int(u.practice_id), fmt_int(u.stratum), fmt_int(u.psu),
             format_number(u.pi_final)});
    for (const auto& u : draw.subsidiaries)
      w.row({"subsidiary", fmt_int(u.id), fmt_int(u.stratum), fmt_int(u.psu),
             format_number(u.pi)});
    for (const auto& u : draw.parents)
      w.row({"parent", fmt_int(u.id), fmt_int(u.stratum), fmt_int(u.psu), format_number(u.pi)});
  }
  write_json(dir / "sample.json", {{"design", std::string(to_string(draw.design))},
                                   {"n_practices", draw.units.size()},
                                   {"n_subsidiaries", draw.subsidiaries.size()},
                                   {"n_parents", draw.parents.size()}});
}

SampleDraw read_sample(const fs::path& dir) {
  SampleDraw draw;
  const auto meta = read_json(dir / "sample.json");
  draw.design = parse_design_kind(meta.at("design").get<std::string>());
  const auto t = csv::Table::read(dir / "sample.csv");
  const auto id = t.column("practice_id"), p1 = t.column("pi1"), p2 = t.column("pi2"),
             p3 = t.column("pi3"), pf = t.column("pi_final"), w = t.column("weight");
  for (std::size_t r = 0; r < t.rows(); ++r) {
    SelectedPractice u;
    u.practice_id = t.integer(r, id);
    u.pi1 = t.number(r, p1);
    u.pi2 = t.number(r, p2);
    u.pi3 = t.number(r, p3);
    u.pi_final = t.number(r, pf);
    u.weight = t.number(r, w);
    draw.units.push_back(u);
  }
  const auto d = csv::Table::read(dir / "design_units.csv");
  const auto lv = d.column("level"), uid = d.column("unit_id"), st = d.column("stratum"),
             psu = d.column("psu"), pi = d.column("pi");
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto level = parse_level(d.cell(r, lv));
    const auto unit = d.integer(r, uid);
    const auto stratum = static_cast<int>(d.integer(r, st));
    const auto first = d.integer(r, psu);
    if (level == Level::practice) {
      auto* u = const_cast<SelectedPractice*>(draw.find(unit));
      if (u == nullptr) throw FormatError(fmt::format("design_units.csv: unknown practice {}", unit));
      u->stratum = stratum;
      u->psu = first;
    } else {
      auto& list = level == Level::subsidiary ? draw.subsidiaries : draw.parents;
      list.push_back({unit, stratum, first, d.number(r, pi)});
    }
  }
  return draw;
}

void write_beneficiaries(const fs::path& path, const std::vector<Beneficiary>& beneficiaries) {
  csv::Writer w(path);
  w.header({"id", "age", "female", "income", "race", "rural", "partial_dual", "full_dual",
            "hcc_count", "admissions", "depression", "smi", "visit_tins"});
  for (const auto& b : beneficiaries) {
    std::string visits;
    for (std::size_t i = 0; i < b.visit_tins.size(); ++i) {
      if (i) visits += ';';
      visits += b.visit_tins[i].tin + ":" + fmt_int(b.visit_tins[i].visits);
    }
    w.row({fmt_int(b.id), format_number(b.age), fmt_int(b.female), format_number(b.income),
           std::string(to_string(b.race)), fmt_int(b.rural), fmt_int(b.partial_dual),
           fmt_int(b.full_dual), fmt_int(b.hcc_count), fmt_int(b.admissions),
           fmt_int(b.depression), fmt_int(b.smi), visits});
  }
}

std::vector<Beneficiary> read_beneficiaries(const fs::path& path) {
  const auto t = csv::Table::read(path);
  const auto c_id = t.column("id"), c_age = t.column("age"), c_f = t.column("female"),
             c_inc = t.column("income"), c_race = t.column("race"), c_rural = t.column("rural"),
             c_pd = t.column("partial_dual"), c_fd = t.column("full_dual"),
             c_hcc = t.column("hcc_count"), c_adm = t.column("admissions"),
             c_dep = t.column("depression"), c_smi = t.column("smi"),
             c_vis = t.column("visit_tins");
  std::vector<Beneficiary> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Beneficiary b;
    b.id = t.integer(r, c_id);
    b.age = t.number(r, c_age);
    b.female = static_cast<int>(t.integer(r, c_f));
    b.income = t.number(r, c_inc);
    b.race = parse_race(t.cell(r, c_race));
    b.rural = static_cast<int>(t.integer(r, c_rural));
    b.partial_dual = static_cast<int>(t.integer(r, c_pd));
    b.full_dual = static_cast<int>(t.integer(r, c_fd));
    b.hcc_count = t.integer(r, c_hcc);
    b.admissions = t.integer(r, c_adm);
    b.depression = static_cast<int>(t.integer(r, c_dep));
    b.smi = static_cast<int>(t.integer(r, c_smi));
    for (const auto& item : csv::split(t.cell(r, c_vis), ';')) {
      if (item.empty()) continue;
      const auto parts = csv::split(item, ':');
      std::int64_t count = 0;
      const auto* end = parts.size() == 2 ? parts[1].data() + parts[1].size() : nullptr;
      if (parts.size() != 2 || parts[0].empty() ||
          std::from_chars(parts[1].data(), end, count).ptr != end)
        throw FormatError(fmt::format("{}: bad visit entry '{}'", path.string(), item));
      b.visit_tins.push_back({parts[0], count});
    }
    out.push_back(std::move(b));
  }
  return out;
}

void write_attribution(const fs::path& path, const std::vector<std::int64_t>& attribution) {
  csv::Writer w(path);
  w.header({"beneficiary_id", "practice_id"});
  for (std::size_t b = 0; b < attribution.size(); ++b)
    w.row({fmt_int(static_cast<std::int64_t>(b)),
           attribution[b] == kUnattributed ? std::string(csv::kMissing) : fmt_int(attribution[b])});
}

void write_aggregates(const fs::path& path, const std::vector<ClaimsAggregate>& aggregates) {
  csv::Writer w(path);
  std::vector<std::string> header = {"practice_id", "region"};
  for (const auto& f : claims_aggregate_fields()) header.push_back(f);
  w.header(header);
  for (const auto& a : aggregates) {
    std::vector<std::string> row = {fmt_int(a.practice_id), std::string(to_string(a.region))};
    for (const auto& f : claims_aggregate_fields()) {
      if (f == "practice_size") {
        row.push_back(fmt_int(a.practice_size));
      } else if (f == "system_size") {
        row.push_back(fmt_int(a.system_size));
      } else {
        row.push_back(format_number(aggregate_field(a, f)));
      }
    }
    w.row(row);
  }
}

std::vector<ClaimsAggregate> read_aggregates(const fs::path& path) {
  const auto t = csv::Table::read(path);
  std::vector<ClaimsAggregate> out;
  const auto c_id = t.column("practice_id"), c_region = t.column("region");
  for (std::size_t r = 0; r < t.rows(); ++r) {
    ClaimsAggregate a;
    a.practice_id = t.integer(r, c_id);
    a.region = parse_region(t.cell(r, c_region));
    auto num = [&](const char* name) { return t.number(r, t.column(name)); };
    a.practice_size = t.integer(r, t.column("practice_size"));
    a.system_size = t.integer(r, t.column("system_size"));
    a.pct_rural = num("pct_rural");
    a.pct_female = num("pct_female");
    a.pct_white = num("pct_white");
    a.pct_black = num("pct_black");
    a.pct_hispanic = num("pct_hispanic");
    a.pct_other = num("pct_other");
    a.pct_partial_dual = num("pct_partial_dual");
    a.pct_full_dual = num("pct_full_dual");
    a.pct_depression = num("pct_depression");
    a.pct_smi = num("pct_smi");
    a.mean_age = num("mean_age");
    a.mean_income = num("mean_income");
    a.mean_hcc = num("mean_hcc");
    a.admissions_per_100 = num("admissions_per_100");
    out.push_back(a);
  }
  return out;
}

namespace {

const std::vector<std::string> kRowMeta = {"practice_id", "subsidiary_id", "parent_id",
                                           "cluster_id",  "selected",      "responded"};

void write_values(const fs::path& path, const StudyDataset& data) {
  csv::Writer w(path);
  std::vector<std::string> header = kRowMeta;
  header.insert(header.end(), data.columns.begin(), data.columns.end());
  w.header(header);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::vector<std::string> row = {fmt_int(data.practice_id[i]), fmt_int(data.subsidiary_id[i]),
                                    fmt_int(data.parent_id[i]),   data.cluster_id[i],
                                    fmt_int(data.selected[i]),    fmt_int(data.responded[i])};
    for (std::size_t c = 0; c < data.cols(); ++c)
      row.push_back(format_number(data.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))));
    w.row(row);
  }
}

void write_level(csv::Writer& w, const char* level, const LevelResponses& t) {
  for (std::size_t u = 0; u < t.unit_id.size(); ++u) {
    std::vector<std::string> row = {level, fmt_int(t.unit_id[u]), fmt_int(t.responded[u])};
    for (Eigen::Index m = 0; m < t.outcomes.cols(); ++m)
      row.push_back(format_number(t.outcomes(static_cast<Eigen::Index>(u), m)));
    w.row(row);
  }
}

}  // namespace

void write_dataset(const fs::path& dir, const StudyDataset& data) {
  write_values(dir / "dataset.csv", data);
  {
    csv::Writer w(dir / "mask.csv");
    std::vector<std::string> header = {"practice_id"};
    header.insert(header.end(), data.columns.begin(), data.columns.end());
    w.header(header);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      std::vector<std::string> row = {fmt_int(data.practice_id[i])};
      for (std::size_t c = 0; c < data.cols(); ++c)
        row.push_back(data.observed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))
                          ? "obs"
                          : "mis");
      w.row(row);
    }
  }
  const auto outcomes = data.outcome_columns();
  {
    csv::Writer w(dir / "level_responses.csv");
    std::vector<std::string> header = {"level", "unit_id", "responded"};
    header.insert(header.end(), outcomes.begin(), outcomes.end());
    w.header(header);
    write_level(w, "subsidiary", data.subsidiaries);
    write_level(w, "parent", data.parents);
  }
  nlohmann::json roles = nlohmann::json::array();
  for (std::size_t c = 0; c < data.cols(); ++c)
    roles.push_back({{"column", data.columns[c]}, {"role", std::string(to_string(data.roles[c]))}});
  write_json(dir / "dataset.json", {{"columns", roles}, {"rows", data.rows()}});
}

StudyDataset read_dataset(const fs::path& dir) {
  StudyDataset d;
  const auto meta = read_json(dir / "dataset.json");
  for (const auto& c : meta.at("columns")) {
    d.columns.push_back(c.at("column").get<std::string>());
    d.roles.push_back(parse_column_role(c.at("role").get<std::string>()));
  }
  const auto t = csv::Table::read(dir / "dataset.csv");
  const auto m = csv::Table::read(dir / "mask.csv");
  const auto n = static_cast<Eigen::Index>(t.rows());
  const auto k = static_cast<Eigen::Index>(d.columns.size());
  if (m.rows() != t.rows()) throw FormatError("mask.csv and dataset.csv row counts differ");
  d.values.resize(n, k);
  d.observed.resize(n, k);
  const auto c_pid = t.column("practice_id"), c_sid = t.column("subsidiary_id"),
             c_par = t.column("parent_id"), c_cl = t.column("cluster_id"),
             c_sel = t.column("selected"), c_resp = t.column("responded");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    d.practice_id.push_back(t.integer(r, c_pid));
    d.subsidiary_id.push_back(t.integer(r, c_sid));
    d.parent_id.push_back(t.integer(r, c_par));
    d.cluster_id.push_back(t.cell(r, c_cl));
    d.selected.push_back(static_cast<std::uint8_t>(t.integer(r, c_sel)));
    d.responded.push_back(static_cast<std::uint8_t>(t.integer(r, c_resp)));
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto tc = t.column(d.columns[c]);
    const auto mc = m.column(d.columns[c]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      d.values(i, c) = t.number(r, tc);
      const auto& flag = m.cell(r, mc);
      if (flag != "obs" && flag != "mis")
        throw FormatError(fmt::format("mask.csv: bad flag '{}'", flag));
      d.observed(i, c) = flag == "obs";
    }
  }
  const auto lr = csv::Table::read(dir / "level_responses.csv");
  const auto outcomes = d.outcome_columns();
  const auto c_level = lr.column("level"), c_unit = lr.column("unit_id"),
             c_r = lr.column("responded");
  for (auto* table : {&d.subsidiaries, &d.parents}) {
    const std::string name = table == &d.subsidiaries ? "subsidiary" : "parent";
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < lr.rows(); ++r)
      if (lr.cell(r, c_level) == name) rows.push_back(r);
    table->outcomes.resize(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(outcomes.size()));
    for (std::size_t u = 0; u < rows.size(); ++u) {
      table->unit_id.push_back(lr.integer(rows[u], c_unit));
      table->responded.push_back(static_cast<std::uint8_t>(lr.integer(rows[u], c_r)));
      for (std::size_t o = 0; o < outcomes.size(); ++o)
        table->outcomes(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(o)) =
            lr.number(rows[u], lr.column(outcomes[o]));
    }
  }
  d.validate();
  return d;
}

void write_imputations(const fs::path& dir, const ImputationSet& set) {
  const auto width = set.D() >= 10 ? 2 : 1;
  for (std::size_t d = 0; d < set.D(); ++d)
    write_values(dir / fmt::format("imputation_{:0{}}.csv", d + 1, width), set.datasets[d]);
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& c : set.chain_diagnostics)
    chains.push_back({{"parameter", c.parameter},
                      {"length", c.length},
                      {"mean", c.mean},
                      {"variance", c.variance},
                      {"lag1_autocorrelation", c.lag1_autocorrelation},
                      {"retained_autocorrelation", c.retained_autocorrelation}});
  write_json(dir / "diagnostics.json", {{"seed", set.seed},
                                        {"D", set.D()},
                                        {"imputed_columns", set.imputed_columns},
                                        {"dropped_predictors", set.dropped_predictors},
                                        {"chains", chains}});
}

ImputationSet read_imputations(const fs::path& dir, const StudyDataset& original) {
  const auto meta = read_json(dir / "diagnostics.json");
  ImputationSet set;
  set.original = original;
  set.seed = meta.at("seed").get<std::uint64_t>();
  set.imputed_columns = meta.at("imputed_columns").get<std::vector<std::string>>();
  set.dropped_predictors = meta.at("dropped_predictors").get<std::vector<std::string>>();
  for (const auto& c : meta.at("chains")) {
    ChainSummary s;
    s.parameter = c.at("parameter").get<std::string>();
    s.length = c.at("length").get<std::size_t>();
    s.mean = c.at("mean").get<double>();
    s.variance = c.at("variance").get<double>();
    s.lag1_autocorrelation = c.at("lag1_autocorrelation").get<double>();
    s.retained_autocorrelation = c.at("retained_autocorrelation").get<double>();
    set.chain_diagnostics.push_back(s);
  }
  const auto D = meta.at("D").get<std::size_t>();
  const auto width = D >= 10 ? 2 : 1;
  for (std::size_t d = 0; d < D; ++d) {
    const auto t = csv::Table::read(dir / fmt::format("imputation_{:0{}}.csv", d + 1, width));
    if (t.rows() != original.rows())
      throw FormatError("imputation file row count does not match the dataset");
    StudyDataset ds = original;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
      const auto tc = t.column(ds.columns[c]);
      for (std::size_t i = 0; i < ds.rows(); ++i) {
        const double v = t.number(i, tc);
        const auto ri = static_cast<Eigen::Index>(i);
        const auto ci = static_cast<Eigen::Index>(c);
        ds.values(ri, ci) = v;
        ds.observed(ri, ci) = !std::isnan(v);
      }
    }
    set.datasets.push_back(std::move(ds));
  }
  return set;
}

void write_efficiency(const fs::path& path, const ImputationSet& set,
                      const EfficiencyDiagnostic& diag, const std::string& outcome) {
  csv::Writer w(path);
  std::vector<std::string> header = {"statistic"};
  for (std::size_t d = 0; d < set.D(); ++d) header.push_back(fmt::format("Y{}", d + 1));
  header.push_back("original");
  header.push_back("size_ratio");
  w.header(header);
  const auto original = naive_mean(set.original, outcome);
  std::vector<std::string> mean_row = {"Mean"}, se_row = {"S.E."}, ratio_row = {"Ratio"};
  for (std::size_t d = 0; d < set.D(); ++d) {
    mean_row.push_back(format_number(naive_mean(set.datasets[d], outcome).mean));
    se_row.push_back(format_number(diag.se_imputed[d]));
    ratio_row.push_back(format_number(diag.per_imputation_ratio[d]));
  }
  mean_row.push_back(format_number(original.mean));
  se_row.push_back(format_number(diag.se_original));
  ratio_row.push_back(format_number(1.0));
  mean_row.push_back(std::string(csv::kMissing));
  se_row.push_back(std::string(csv::kMissing));
  ratio_row.push_back(format_number(diag.size_ratio));
  w.row(mean_row);
  w.row(se_row);
  w.row(ratio_row);
}

void write_correlations(const fs::path& path, const std::vector<CorrelationRow>& rows) {
  csv::Writer w(path);
  w.header({"covariate", "Y", "Minimum", "Mean", "Maximum", "St. Dev"});
  auto opt = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string(csv::kMissing);
  };
  for (const auto& r : rows)
    w.row({r.covariate, opt(r.observed), opt(r.minimum), opt(r.mean), opt(r.maximum), opt(r.sd)});
}

}  // namespace svyimp::io
