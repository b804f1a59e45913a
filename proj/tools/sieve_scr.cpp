#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "settings.hpp"
#include "sieve/basis.hpp"
#include "sieve/bootstrap.hpp"
#include "sieve/core_model.hpp"
#include "sieve/dgp.hpp"
#include "sieve/error.hpp"
#include "sieve/format.hpp"
#include "sieve/harness.hpp"
#include "sieve/inference.hpp"
#include "sieve/loss.hpp"
#include "sieve/parallel.hpp"
#include "sieve/selection.hpp"
#include "sieve/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using sieve::cli::Settings;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct OptionDef {
  std::string flag;
  std::string key;
  std::string help;
};

const std::map<std::string, OptionDef>& option_catalog() {
  static const std::map<std::string, OptionDef> catalog{
      {"data", {"--data", "data", "Dataset CSV with header x1,...,xd,y"}},
      {"loss", {"--loss", "loss", "Loss: quantile:TAU, huber:C, expectile:TAU, lq:Q or ls (default ls)"}},
      {"losses", {"--loss", "loss", "Comma-separated losses, e.g. ls,quantile:0.5 (default ls)"}},
      {"basis", {"--basis", "basis", "Basis family: trig, legendre or daubechies:N (default legendre)"}},
      {"basis_trig", {"--basis", "basis", "Basis family: trig, legendre or daubechies:N (default trig)"}},
      {"k", {"--k", "k", "Per-coordinate basis counts k1,k2,... or auto (default auto)"}},
      {"candidates", {"--candidates", "candidates", "Per-coordinate counts tried by automatic k selection"}},
      {"alpha", {"--alpha", "alpha", "Significance levels, comma separated (default 0.05,0.10)"}},
      {"M", {"--M", "M", "Block length: auto or an integer (default auto)"}},
      {"block_floor", {"--block-floor", "block_floor", "Floor of automatic block lengths as a multiple of K (default 6)"}},
      {"B", {"--B", "B", "Bootstrap replicates (default 500)"}},
      {"seed", {"--seed", "seed", "Random seed; overrides SIEVE_SCR_SEED (default 1)"}},
      {"scaling", {"--scaling", "scaling", "Band shape: unit or stddev (default unit)"}},
      {"grid", {"--grid", "grid", "Grid points per coordinate, e.g. 41x41 (default 41 per coordinate, 201 if d = 1)"}},
      {"trim", {"--trim", "trim", "Quantile trimmed from each end of every covariate for the domain (default 0.02)"}},
      {"out", {"--out", "out", "Output directory (default .)"}},
      {"threads", {"--threads", "threads", "Worker threads; 0 uses every core (default 0)"}},
      {"null", {"--null", "null", "Null hypothesis: linear, or keep:J1,J2,... to test the other covariates as redundant"}},
      {"model", {"--model", "model", "Simulation target: Q1 or Q2 (default Q1)"}},
      {"n", {"--n", "n", "Sample size (default 500)"}},
      {"burn_in", {"--burn-in", "burn_in", "Discarded warm-up observations (default 200)"}},
      {"replications", {"--replications", "replications", "Monte Carlo replications R (default 200)"}},
  };
  return catalog;
}

struct CommandDef {
  std::string name;
  std::string help;
  std::vector<std::string> options;
};

const std::vector<CommandDef>& command_catalog() {
  static const std::vector<CommandDef> commands{
      {"fit", "Fit a sieve M-estimator and write fit.json",
       {"data", "loss", "basis", "k", "candidates", "trim", "out", "threads"}},
      {"scr", "Build simultaneous confidence regions; writes scr.csv, result.json and plot.dat",
       {"data", "loss", "basis", "k", "candidates", "trim", "alpha", "M", "block_floor", "B", "seed", "scaling", "grid",
        "out", "threads"}},
      {"test", "Sup-norm bootstrap test of a null regression function; writes test.json",
       {"data", "loss", "basis", "k", "candidates", "trim", "null", "alpha", "M", "block_floor", "B", "seed", "scaling",
        "grid", "out", "threads"}},
      {"select-k", "Choose basis counts by terminal-window validation; writes select_k.json",
       {"data", "loss", "basis", "candidates", "trim", "out", "threads"}},
      {"select-block", "Automatic block length from fitted scores; writes select_block.json",
       {"data", "loss", "basis", "k", "candidates", "trim", "block_floor", "out", "threads"}},
      {"simulate", "Draw a dataset from the bivariate simulation model; writes dataset.csv and simulate.json",
       {"model", "n", "burn_in", "seed", "out", "threads"}},
      {"coverage", "Monte Carlo coverage study; writes coverage.csv, coverage.json and replications.jsonl",
       {"model", "n", "burn_in", "basis_trig", "losses", "replications", "B", "alpha", "seed", "k", "candidates", "M",
        "block_floor", "grid", "trim", "scaling", "out", "threads"}},
  };
  return commands;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json domain_json(const sieve::Domain& domain) {
  return {{"lower", to_json(domain.lower())}, {"upper", to_json(domain.upper())}};
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw sieve::DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw sieve::DataError("failed writing " + path.string());
}

fs::path output_dir(const Settings& s) {
  fs::path dir = s.text("out", ".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sieve::ConfigError("cannot create output directory " + dir.string() + ": " + ec.message(), "out");
  return dir;
}

template <typename Fn>
auto with_key(const std::string& key, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const sieve::ConfigError& e) {
    if (!e.key().empty()) throw;
    throw sieve::ConfigError(e.what(), key);
  }
}

/// Dataset, domain and model choices shared by the data-driven commands.
struct DataContext {
  sieve::Dataset data;
  sieve::Domain domain;
  sieve::BasisFamily family;
  std::vector<sieve::BasisFamily> families;
  sieve::LossSpec loss;
};

DataContext load_context(const Settings& s) {
  const auto path = s.text("data");
  if (!path) throw sieve::ConfigError("missing required key 'data'", "data");
  const auto family = with_key("basis", [&] { return sieve::BasisFamily::parse(s.text("basis", "legendre")); });
  const auto loss = with_key("loss", [&] { return sieve::LossSpec::parse(s.text("loss", "ls")); });
  const double trim = s.number("trim", 0.02);
  auto data = sieve::load_dataset(*path);
  auto domain = with_key("trim", [&] { return sieve::default_domain(data, trim); });
  std::vector<sieve::BasisFamily> families(data.d(), family);
  return {std::move(data), std::move(domain), family, std::move(families), loss};
}

std::vector<std::size_t> candidate_counts(const Settings& s, const sieve::BasisFamily& family) {
  if (!s.has("candidates")) return sieve::default_k_candidates(family);
  auto c = s.counts("candidates", ',');
  for (auto v : c) with_key("candidates", [&] { family.validate_count(v); });
  return c;
}

json selection_json(const sieve::DimSelection& sel, std::size_t validation_length) {
  json cands = json::array();
  for (const auto& r : sel.risks) {
    json entry{{"k", r.counts}, {"K", r.dim}, {"risk", nullptr}};
    if (r.risk) entry["risk"] = *r.risk;
    if (!r.error.empty()) entry["error"] = r.error;
    cands.push_back(entry);
  }
  return {{"chosen", sel.chosen}, {"validation_length", validation_length}, {"candidates", cands}};
}

/// Fixed counts from `k`, or the automatic choice with its diagnostics.
std::pair<std::vector<std::size_t>, json> choose_counts(const Settings& s, const DataContext& ctx) {
  if (!s.is_auto("k")) {
    auto k = s.counts("k", ',');
    if (k.size() != ctx.data.d()) {
      throw sieve::ConfigError("k needs " + std::to_string(ctx.data.d()) + " counts, got " + std::to_string(k.size()),
                               "k");
    }
    for (auto v : k) with_key("k", [&] { ctx.family.validate_count(v); });
    return {k, nullptr};
  }
  const auto set = sieve::tensor_candidates(candidate_counts(s, ctx.family), ctx.data.d(), ctx.data.n());
  if (set.candidates.empty()) throw sieve::ConfigError("no admissible k candidates for this sample size", "candidates");
  const auto sel = sieve::select_sieve_dim(ctx.data, ctx.families, ctx.domain, set, ctx.loss);
  return {sel.chosen, selection_json(sel, set.validation_length)};
}

json fit_json(const sieve::FittedModel& f) {
  return {{"theta", to_json(f.theta)},
          {"objective", f.objective_value},
          {"iterations", f.solver_iterations},
          {"converged", f.converged},
          {"gradient_norm", f.gradient_norm},
          {"ridge", f.ridge},
          {"in_domain_count", f.in_domain_count}};
}

json block_json(const sieve::BlockSelectionDiagnostics& d) {
  json coords = json::array();
  for (const auto& c : d.per_coordinate) {
    coords.push_back({{"coordinate", c.coordinate + 1},
                      {"skipped", c.skipped},
                      {"fallback", c.fallback},
                      {"m_bar", c.m_bar},
                      {"M_bar", c.M_bar},
                      {"G", c.G},
                      {"D", c.D},
                      {"M_hat", c.M_hat}});
  }
  return {{"M_hat", d.M_hat},         {"M_mean", d.M_mean}, {"lag_run", d.lag_run},
          {"threshold", d.threshold}, {"warnings", d.warnings}, {"per_coordinate", coords}};
}

sieve::EvaluationGrid make_grid(const Settings& s, const sieve::Domain& domain) {
  auto counts = s.has("grid") ? s.counts("grid", 'x') : sieve::default_grid_counts(domain.d());
  return with_key("grid", [&] { return sieve::EvaluationGrid(domain, counts); });
}

/// Fit, block length and bootstrap shared by scr and test.
struct BandRun {
  DataContext ctx;
  sieve::FittedModel fitted;
  json k_selection;
  std::size_t M = 0;
  json block_selection;
  sieve::EvaluationGrid grid;
  sieve::BootstrapResult boot;
  std::vector<double> alphas;
  std::uint64_t seed = 1;
};

BandRun run_band(const Settings& s) {
  auto ctx = load_context(s);
  const auto alphas = s.numbers("alpha", {0.05, 0.10});
  const auto B = s.count("B", 500);
  const auto seed = s.u64("seed", 1);
  const auto scaling = with_key("scaling", [&] { return sieve::parse_scaling(s.text("scaling", "unit")); });
  const double floor = s.number("block_floor", 6.0);
  if (!(floor >= 0.0)) throw sieve::ConfigError("block_floor must be nonnegative", "block_floor");
  auto grid = make_grid(s, ctx.domain);

  auto [k, k_selection] = choose_counts(s, ctx);
  const sieve::SieveBasis basis(ctx.families, k, ctx.domain);
  auto fitted = sieve::fit(ctx.data, basis, ctx.loss);

  std::size_t M = 0;
  json block = nullptr;
  if (s.is_auto("M")) {
    const auto diag = sieve::select_block_size(ctx.data, fitted);
    M = sieve::effective_block_length(diag.M_hat, basis.dim(), ctx.data.n(), floor);
    block = block_json(diag);
  } else {
    M = s.count("M", 0);
  }

  sieve::BootstrapConfig cfg;
  cfg.M = M;
  cfg.B = B;
  cfg.alphas = alphas;
  cfg.scaling = scaling;
  cfg.seed = seed;
  cfg.stream_id = 0;
  with_key("M", [&] { cfg.validate(ctx.data.n()); });
  auto boot = sieve::run_bootstrap(ctx.data, fitted, grid, cfg);
  return {std::move(ctx), std::move(fitted), std::move(k_selection), M, std::move(block), std::move(grid),
          std::move(boot), alphas, seed};
}

json model_header(const DataContext& ctx, const sieve::FittedModel& f) {
  return {{"n", ctx.data.n()},
          {"d", ctx.data.d()},
          {"loss", ctx.loss.to_string()},
          {"basis", ctx.family.to_string()},
          {"k", f.basis.per_dim_counts()},
          {"K", f.basis.dim()},
          {"domain", domain_json(ctx.domain)}};
}

int cmd_fit(const Settings& s) {
  const auto dir = output_dir(s);
  const auto ctx = load_context(s);
  auto [k, k_selection] = choose_counts(s, ctx);
  const sieve::SieveBasis basis(ctx.families, k, ctx.domain);
  const auto fitted = sieve::fit(ctx.data, basis, ctx.loss);
  json doc{{"command", "fit"}};
  doc.update(model_header(ctx, fitted));
  doc["fit"] = fit_json(fitted);
  doc["k_selection"] = k_selection;
  write_json(dir / "fit.json", doc);
  return 0;
}

int cmd_scr(const Settings& s) {
  const auto dir = output_dir(s);
  const auto run = run_band(s);
  const auto& grid = run.grid;
  std::vector<sieve::ScrResult> bands;
  for (double a : run.alphas) bands.push_back(sieve::build_scr(run.fitted, run.boot, grid, a));

  const std::size_t d = grid.d();
  {
    std::ofstream csv(dir / "scr.csv");
    std::ofstream dat(dir / "plot.dat");
    if (!csv || !dat) throw sieve::DataError("cannot write band files in " + dir.string());
    std::string header, plot_header = "#";
    for (std::size_t j = 0; j < d; ++j) {
      header += "x" + std::to_string(j + 1) + ",";
      plot_header += " x" + std::to_string(j + 1);
    }
    csv << header << "center,lower,upper\n";
    dat << plot_header << " center lower upper  (alpha = " << sieve::format_double(bands.front().alpha) << ")\n";
    const auto lower = bands.front().lower();
    const auto upper = bands.front().upper();
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const auto i = static_cast<Eigen::Index>(p);
      for (std::size_t j = 0; j < d; ++j) {
        const auto x = sieve::format_double(grid.points()(i, static_cast<Eigen::Index>(j)));
        csv << x << ',';
        dat << x << ' ';
      }
      const auto c = sieve::format_double(bands.front().center(i));
      const auto lo = sieve::format_double(lower(i));
      const auto hi = sieve::format_double(upper(i));
      csv << c << ',' << lo << ',' << hi << '\n';
      dat << c << ' ' << lo << ' ' << hi << '\n';
    }
    if (!csv || !dat) throw sieve::DataError("failed writing band files in " + dir.string());
  }

  json crit = json::array();
  for (const auto& b : bands) {
    crit.push_back({{"alpha", b.alpha}, {"C", b.critical_value}, {"mean_half_width", b.half_width.mean()},
                    {"max_half_width", b.half_width.maxCoeff()}});
  }
  json doc{{"command", "scr"}};
  doc.update(model_header(run.ctx, run.fitted));
  doc["theta"] = to_json(run.fitted.theta);
  doc["M"] = run.M;
  doc["B"] = run.boot.sup_stats.size();
  doc["seed"] = run.seed;
  doc["scaling"] = std::string(sieve::to_string(run.boot.scaling));
  doc["grid"] = grid.per_dim_counts();
  doc["critical_values"] = crit;
  doc["band_columns"] = {{"alpha", bands.front().alpha}, {"rows", grid.size()}};
  doc["diagnostics"] = {{"fit", fit_json(run.fitted)},
                        {"k_selection", run.k_selection},
                        {"block_selection", run.block_selection},
                        {"warnings", run.boot.warnings}};
  doc["diagnostics"]["fit"].erase("theta");
  write_json(dir / "result.json", doc);
  return 0;
}

int cmd_test(const Settings& s) {
  const auto dir = output_dir(s);
  const std::string null = s.text("null", "linear");
  std::vector<std::size_t> kept;
  if (null != "linear") {
    if (null.rfind("keep:", 0) != 0) throw sieve::ConfigError("null must be 'linear' or 'keep:J1,J2,...'", "null");
    for (auto j : sieve::cli::split(null.substr(5), ',')) {
      const auto v = sieve::cli::parse_count(j, "null");
      if (v < 1) throw sieve::ConfigError("covariate indices in null are 1-based", "null");
      kept.push_back(v - 1);
    }
  }
  const auto run = run_band(s);
  const auto& ctx = run.ctx;
  sieve::ScrTestResult result;
  if (kept.empty()) {
    const auto lin = sieve::fit_linear(ctx.data, ctx.loss, ctx.domain);
    result = sieve::scr_test(run.fitted, run.boot, run.grid, lin.predict(run.grid.points()), run.alphas,
                             "linear: a + c^T x");
  } else {
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (kept[j] >= ctx.data.d() || (j > 0 && kept[j] <= kept[j - 1])) {
        throw sieve::ConfigError("kept covariates must be increasing and at most d", "null");
      }
    }
    if (kept.size() == ctx.data.d()) throw sieve::ConfigError("keep list must omit at least one covariate", "null");
    std::vector<sieve::BasisFamily> families;
    std::vector<std::size_t> counts;
    for (auto j : kept) {
      families.push_back(ctx.families[j]);
      counts.push_back(run.fitted.basis.per_dim_counts()[j]);
    }
    const sieve::SieveBasis reduced_basis(families, counts, ctx.domain.select(kept));
    const auto reduced = sieve::fit(ctx.data.select_covariates(kept), reduced_basis, ctx.loss);
    result = sieve::redundancy_test(run.fitted, reduced, kept, run.boot, run.grid, run.alphas);
  }
  json reject = json::array();
  for (const auto& [a, r] : result.reject_at) reject.push_back({{"alpha", a}, {"reject", r}});
  json doc{{"command", "test"}};
  doc.update(model_header(ctx, run.fitted));
  doc["null"] = result.null_description;
  doc["statistic"] = result.statistic;
  doc["p_value"] = result.p_value;
  doc["reject"] = reject;
  doc["M"] = run.M;
  doc["B"] = run.boot.sup_stats.size();
  doc["seed"] = run.seed;
  doc["scaling"] = std::string(sieve::to_string(run.boot.scaling));
  doc["grid"] = run.grid.per_dim_counts();
  write_json(dir / "test.json", doc);
  return 0;
}

int cmd_select_k(const Settings& s) {
  const auto dir = output_dir(s);
  const auto ctx = load_context(s);
  const auto set = sieve::tensor_candidates(candidate_counts(s, ctx.family), ctx.data.d(), ctx.data.n());
  if (set.candidates.empty()) throw sieve::ConfigError("no admissible k candidates for this sample size", "candidates");
  const auto sel = sieve::select_sieve_dim(ctx.data, ctx.families, ctx.domain, set, ctx.loss);
  json doc{{"command", "select-k"},
           {"n", ctx.data.n()},
           {"d", ctx.data.d()},
           {"loss", ctx.loss.to_string()},
           {"basis", ctx.family.to_string()},
           {"domain", domain_json(ctx.domain)}};
  doc.update(selection_json(sel, set.validation_length));
  write_json(dir / "select_k.json", doc);
  return 0;
}

int cmd_select_block(const Settings& s) {
  const auto dir = output_dir(s);
  const auto ctx = load_context(s);
  const double floor = s.number("block_floor", 6.0);
  if (!(floor >= 0.0)) throw sieve::ConfigError("block_floor must be nonnegative", "block_floor");
  auto [k, k_selection] = choose_counts(s, ctx);
  const sieve::SieveBasis basis(ctx.families, k, ctx.domain);
  const auto fitted = sieve::fit(ctx.data, basis, ctx.loss);
  const auto diag = sieve::select_block_size(ctx.data, fitted);
  json doc{{"command", "select-block"}};
  doc.update(model_header(ctx, fitted));
  doc.update(block_json(diag));
  doc["block_floor"] = floor;
  doc["M_effective"] = sieve::effective_block_length(diag.M_hat, basis.dim(), ctx.data.n(), floor);
  doc["k_selection"] = k_selection;
  write_json(dir / "select_block.json", doc);
  return 0;
}

sieve::SimModelSpec sim_model(const Settings& s) {
  sieve::SimModelSpec model;
  model.target = with_key("model", [&] { return sieve::parse_sim_target(s.text("model", "Q1")); });
  return model;
}

int cmd_simulate(const Settings& s) {
  const auto dir = output_dir(s);
  const auto model = sim_model(s);
  const auto n = s.count("n", 500);
  const auto burn_in = s.count("burn_in", 200);
  const auto seed = s.u64("seed", 1);
  if (n < 1) throw sieve::ConfigError("n must be positive", "n");
  const auto data = sieve::gen_sim_model(model, n, sieve::RngStream(seed, 0), burn_in);
  sieve::write_dataset(dir / "dataset.csv", data);
  json doc{{"command", "simulate"},
           {"model", std::string(sieve::to_string(model.target))},
           {"n", data.n()},
           {"d", data.d()},
           {"burn_in", burn_in},
           {"seed", seed},
           {"file", "dataset.csv"},
           {"response_mean", data.responses().mean()},
           {"covariate_mean", to_json(data.covariates().colwise().mean().transpose())}};
  write_json(dir / "simulate.json", doc);
  return 0;
}

int cmd_coverage(const Settings& s) {
  const auto dir = output_dir(s);
  sieve::ExperimentSpec spec;
  spec.model = sim_model(s);
  spec.n = s.count("n", spec.n);
  spec.burn_in = s.count("burn_in", spec.burn_in);
  spec.family = with_key("basis", [&] { return sieve::BasisFamily::parse(s.text("basis", "trig")); });
  spec.losses.clear();
  for (const auto& l : s.texts("loss", {"ls"})) {
    spec.losses.push_back(with_key("loss", [&] { return sieve::LossSpec::parse(l); }));
  }
  spec.replications = s.count("replications", spec.replications);
  spec.B = s.count("B", spec.B);
  spec.alphas = s.numbers("alpha", spec.alphas);
  spec.seed = s.u64("seed", spec.seed);
  if (s.has("grid")) spec.grid = s.counts("grid", 'x');
  spec.trim = s.number("trim", spec.trim);
  spec.scaling = with_key("scaling", [&] { return sieve::parse_scaling(s.text("scaling", "unit")); });
  if (!s.is_auto("k")) spec.k = s.counts("k", ',');
  if (s.has("candidates")) spec.k_candidates = s.counts("candidates", ',');
  if (!s.is_auto("M")) spec.M = s.count("M", 0);
  spec.block_floor = s.number("block_floor", spec.block_floor);
  spec.validate();

  const auto table = sieve::run_coverage_experiment(spec);

  std::ofstream csv(dir / "coverage.csv");
  if (!csv) throw sieve::DataError("cannot write coverage.csv in " + dir.string());
  csv << "loss,alpha,coverage,band_lower,band_upper,mean_half_width,mean_seconds,successes,failures\n";
  json rows = json::array();
  json timing = json::array();
  double total_seconds = 0.0;
  for (const auto& r : table.rows) {
    csv << r.loss << ',' << sieve::format_double(r.alpha) << ',' << sieve::format_double(r.coverage) << ','
        << sieve::format_double(r.coverage - r.band) << ',' << sieve::format_double(r.coverage + r.band) << ','
        << sieve::format_double(r.mean_half_width) << ',' << sieve::format_double(r.mean_seconds) << ','
        << r.successes << ',' << r.failures << '\n';
    rows.push_back({{"loss", r.loss},
                    {"alpha", r.alpha},
                    {"coverage", r.coverage},
                    {"band", r.band},
                    {"band_lower", r.coverage - r.band},
                    {"band_upper", r.coverage + r.band},
                    {"mean_half_width", r.mean_half_width},
                    {"successes", r.successes},
                    {"failures", r.failures}});
    timing.push_back({{"loss", r.loss}, {"alpha", r.alpha}, {"mean_seconds", r.mean_seconds}});
  }
  if (!csv) throw sieve::DataError("failed writing coverage.csv");

  std::ofstream log(dir / "replications.jsonl");
  if (!log) throw sieve::DataError("cannot write replications.jsonl in " + dir.string());
  for (const auto& rec : table.log) {
    json line{{"replication", rec.replication}, {"loss", rec.loss}};
    if (!rec.error.empty()) {
      line["error"] = rec.error;
    } else {
      json per_alpha = json::array();
      for (std::size_t a = 0; a < rec.covered.size(); ++a) {
        per_alpha.push_back({{"alpha", rec.covered[a].first},
                             {"C", rec.critical_values[a].second},
                             {"covered", rec.covered[a].second},
                             {"mean_half_width", rec.mean_half_width[a].second}});
      }
      line["k"] = rec.k;
      line["M"] = rec.M;
      line["M_hat"] = rec.M_hat;
      line["levels"] = per_alpha;
      line["seconds"] = rec.seconds;
      total_seconds += rec.seconds;
    }
    log << line.dump() << '\n';
  }

  json doc{{"command", "coverage"},
           {"model", std::string(sieve::to_string(spec.model.target))},
           {"n", spec.n},
           {"basis", spec.family.to_string()},
           {"replications", spec.replications},
           {"B", spec.B},
           {"seed", spec.seed},
           {"grid", spec.grid},
           {"scaling", std::string(sieve::to_string(spec.scaling))},
           {"k", spec.k ? json(*spec.k) : json("auto")},
           {"M", spec.M ? json(*spec.M) : json("auto")},
           {"block_floor", spec.block_floor},
           {"rows", rows},
           {"timing", {{"rows", timing}, {"total_seconds", total_seconds}}}};
  write_json(dir / "coverage.json", doc);
  return 0;
}

int emit_error(int code, const std::string& kind, const std::string& message, const json& extra = json::object()) {
  json err{{"kind", kind}, {"message", message}, {"exit_code", code}};
  err.update(extra);
  std::cerr << json{{"error", err}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sieve M-regression with simultaneous confidence regions for dependent data", "sieve-scr"};
  app.require_subcommand(1);
  app.fallthrough(false);

  const std::map<std::string, std::function<int(const Settings&)>> handlers{
      {"fit", cmd_fit},           {"scr", cmd_scr},           {"test", cmd_test},       {"select-k", cmd_select_k},
      {"select-block", cmd_select_block}, {"simulate", cmd_simulate}, {"coverage", cmd_coverage}};

  struct Bound {
    CLI::App* app;
    const CommandDef* def;
    std::map<std::string, std::string> values;
    std::string config;
  };
  std::vector<Bound> bound;
  bound.reserve(command_catalog().size());
  for (const auto& cmd : command_catalog()) {
    bound.push_back({app.add_subcommand(cmd.name, cmd.help), &cmd, {}, {}});
  }
  for (auto& b : bound) {
    b.app->add_option("--config", b.config, "JSON config file; flags override its keys");
    for (const auto& name : b.def->options) {
      const auto& opt = option_catalog().at(name);
      b.app->add_option(opt.flag, b.values[opt.key], opt.help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ExtrasError& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    return emit_error(kExitConfig, "config", what, {{"key", colon == std::string::npos ? "" : what.substr(colon + 2)}});
  } catch (const CLI::ParseError& e) {
    return emit_error(kExitConfig, "config", e.what(), {{"key", e.get_name()}});
  }

  for (auto& b : bound) {
    if (!b.app->parsed()) continue;
    try {
      std::set<std::string> keys;
      for (const auto& name : b.def->options) keys.insert(option_catalog().at(name).key);
      Settings settings(b.def->name, keys);
      if (!b.config.empty()) settings.load_file(b.config);
      if (keys.contains("seed")) {
        if (const char* env = std::getenv("SIEVE_SCR_SEED"); env != nullptr && *env != '\0') {
          settings.set("seed", sieve::cli::parse_u64(env, "SIEVE_SCR_SEED"));
        }
      }
      for (const auto& name : b.def->options) {
        const auto& opt = option_catalog().at(name);
        if (b.app->get_option(opt.flag)->count() > 0) settings.set(opt.key, b.values.at(opt.key));
      }
      sieve::set_worker_count(settings.count("threads", 0));
      return handlers.at(b.def->name)(settings);
    } catch (const sieve::ConfigError& e) {
      return emit_error(kExitConfig, "config", e.what(), {{"key", e.key()}});
    } catch (const sieve::DataError& e) {
      json extra = json::object();
      if (e.row() != 0) extra["row"] = e.row();
      if (!e.column().empty()) extra["column"] = e.column();
      return emit_error(kExitData, "data", e.what(), extra);
    } catch (const sieve::SingularDesignError& e) {
      json extra{{"smallest_singular_value", e.smallest_singular_value()}};
      if (e.window() >= 0) extra["window"] = e.window();
      return emit_error(kExitNumeric, "numeric", e.what(), extra);
    } catch (const sieve::Error& e) {
      const int code = e.kind() == sieve::ErrorKind::data ? kExitData : kExitNumeric;
      return emit_error(code, code == kExitData ? "data" : "numeric", e.what());
    } catch (const fs::filesystem_error& e) {
      return emit_error(kExitData, "data", e.what());
    } catch (const std::exception& e) {
      return emit_error(kExitNumeric, "numeric", e.what());
    }
  }
  return emit_error(kExitConfig, "config", "no subcommand given");
}
