#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "config_file.hpp"
#include "hetscan/heterogeneity.hpp"
#include "hetscan/parallel.hpp"
#include "hetscan/simulation.hpp"
#include "hetscan/verification.hpp"

namespace hetscan::cli {

namespace {

struct OptimizerFlags {
  int restarts = 5;
  int max_iters = 200;
  double grad_tol = 1e-6;

  void add_to(CLI::App* app) {
    app->add_option("--restarts", restarts, "Optimizer restarts")->check(CLI::PositiveNumber);
    app->add_option("--max-iters", max_iters, "Optimizer iterations per restart")->check(CLI::PositiveNumber);
    app->add_option("--grad-tol", grad_tol, "Gradient tolerance (log-parameter space)")->check(CLI::PositiveNumber);
  }

  OptConfig config(std::uint64_t seed) const {
    OptConfig cfg;
    cfg.restarts = restarts;
    cfg.max_iters = max_iters;
    cfg.grad_tol = grad_tol;
    cfg.rng_seed = seed;
    return cfg;
  }

  nlohmann::json to_json() const {
    return {{"restarts", restarts}, {"max_iters", max_iters}, {"grad_tol", grad_tol}};
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- assess

struct AssessArgs {
  std::string data;
  std::string response;
  std::vector<std::string> groups;
  std::string family;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::string out;
  std::string select = "chosen";
  OptimizerFlags opt;
};

void print_ranking(const HeterogeneityReport& report, std::ostream& out) {
  out << "interaction strength (mean KL-diff^2) per grouping:\n";
  for (int k = 0; k < report.slope_matrix.cols(); ++k) {
    out << "  " << report.grouping_names[k] << "  total=" << std::setprecision(6) << report.grouping_totals[k]
        << "  intercept=" << report.intercept_vector[k] << "\n";
    std::vector<int> order(report.slope_matrix.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return report.slope_matrix(a, k) > report.slope_matrix(b, k); });
    for (int d : order)
      out << "    " << std::left << std::setw(20) << report.predictor_names[d] << std::right << " "
          << report.slope_matrix(d, k) << "\n";
  }
}

int cmd_assess(const AssessArgs& a, std::ostream& out) {
  CsvSchema schema{a.response, a.groups, parse_family(a.family)};
  const Dataset data = load_csv(a.data, schema);
  const HeterogeneityReport report = assess(data, a.opt.config(a.seed));
  Selection selection = select_top_t(report, a.threshold);
  const int chosen = choose_grouping(report);
  if (a.select == "chosen") selection = restrict_to_grouping(selection, chosen);
  const std::string formula =
      recommend_formula(data.response_name, data.predictor_names, data.grouping_names, selection);

  nlohmann::json j = report_to_json(report, selection, formula);
  j["chosen_grouping"] = data.grouping_names[chosen];
  j["seed"] = a.seed;
  j["config"] = {{"data", a.data},          {"response", a.response}, {"groups", a.groups},
                 {"family", to_string(schema.family)}, {"threshold", a.threshold}, {"select", a.select},
                 {"optimizer", a.opt.to_json()}};
  write_text(a.out, dump(j));

  out << formula << "\n";
  print_ranking(report, out);
  out << "chosen grouping: " << data.grouping_names[chosen] << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_data;
  std::string out_truth;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg;
  if (!a.config.empty()) {
    const auto sections = load_config(a.config);
    if (sections.size() > 1) throw ConfigError("simulation config must not contain sections");
    cfg = sim_config_from_section(sections.front());
  }
  cfg.seed = a.seed;
  const auto [data, truth] = generate(cfg);
  std::ostringstream csv;
  write_csv(data, csv);
  write_text(a.out_data, csv.str());
  nlohmann::json j = truth_to_json(truth);
  j["seed"] = a.seed;
  j["config"] = sim_config_to_json(cfg);
  write_text(a.out_truth, dump(j));
  out << "wrote " << data.n_obs() << " rows (" << data.n_predictors() << " predictors, " << data.n_groupings()
      << " groupings) to " << a.out_data << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkArgs {
  std::string grid;
  int reps = 10;
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t seed = 0;
  std::string out;
  OptimizerFlags opt;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out, std::ostream& err) {
  const std::vector<SimConfig> cells = grid_from_sections(load_config(a.grid));
  std::vector<CellResult> results;
  try {
    results = run_benchmark(cells, a.reps, a.thresholds, a.seed, a.opt.config(a.seed));
  } catch (const BenchmarkAborted& e) {
    err << "error: " << e.what() << "\ncell: " << e.cell_id << "\n";
    return kExitFailure;
  }
  std::ostringstream csv;
  write_benchmark_csv(results, csv);
  write_text(a.out, csv.str());

  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json c = sim_config_to_json(r.cell);
    c.erase("seed");
    c["n_ok"] = r.n_ok;
    c["n_fail"] = r.n_fail;
    c["failures"] = r.failures;
    c["auc_mean_roc"] = mean_roc_auc(r.points);
    cells_json.push_back(std::move(c));
  }
  nlohmann::json meta = {{"seed", a.seed},         {"grid", a.grid},     {"reps", a.reps},
                         {"thresholds", a.thresholds}, {"optimizer", a.opt.to_json()}, {"cells", cells_json}};
  write_text(a.out + ".meta.json", dump(meta));

  for (const auto& r : results)
    out << cell_id(r.cell) << "  AUC(mean ROC)=" << std::setprecision(4) << mean_roc_auc(r.points)
        << "  ok=" << r.n_ok << " fail=" << r.n_fail << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- verify-derivatives

struct VerifyArgs {
  std::string family;
  int trials = 20;
  std::uint64_t seed = 0;
  double tol = 1e-3;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const VerificationSummary s = verify_derivatives(parse_family(a.family), a.trials, a.seed);
  out << "family=" << a.family << " trials=" << s.trials << " seed=" << a.seed << " tol=" << a.tol << "\n";
  for (const auto& c : s.checks)
    out << "  " << std::left << std::setw(32) << c.name << std::right << " max_rel_error=" << std::scientific
        << std::setprecision(3) << c.max_rel_error << std::defaultfloat << "  "
        << (c.max_rel_error < a.tol ? "ok" : "FAIL") << "\n";
  const bool ok = s.passed(a.tol);
  out << (ok ? "all checks passed" : "some checks failed") << "\n";
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_threads_from_env();

  CLI::App app{"hetscan: group heterogeneity assessment with GP surrogates and KL-divergence derivatives"};
  app.require_subcommand(1);

  AssessArgs assess_args;
  auto* assess_cmd = app.add_subcommand("assess", "Rank predictor x grouping interactions in a CSV dataset");
  assess_cmd->add_option("--data", assess_args.data, "Input CSV")->required();
  assess_cmd->add_option("--response", assess_args.response, "Response column")->required();
  assess_cmd->add_option("--groups", assess_args.groups, "Grouping columns, comma separated")
      ->required()
      ->delimiter(',');
  assess_cmd->add_option("--family", assess_args.family, "gaussian or bernoulli")
      ->required()
      ->check(CLI::IsMember({"gaussian", "bernoulli"}, CLI::ignore_case));
  assess_cmd->add_option("--threshold", assess_args.threshold, "Top-T fraction t in [0, 1]")
      ->check(CLI::Range(0.0, 1.0));
  assess_cmd->add_option("--seed", assess_args.seed, "Optimizer seed");
  assess_cmd->add_option("--out", assess_args.out, "Report JSON")->required();
  assess_cmd->add_option("--select", assess_args.select,
                         "Apply slopes to the chosen grouping only (chosen) or every grouping (all)")
      ->check(CLI::IsMember({"chosen", "all"}));
  assess_args.opt.add_to(assess_cmd);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a dataset from the multilevel generator");
  sim_cmd->add_option("--config", sim_args.config, "key=value simulation config");
  sim_cmd->add_option("--seed", sim_args.seed, "Generator seed")->required();
  sim_cmd->add_option("--out-data", sim_args.out_data, "Dataset CSV")->required();
  sim_cmd->add_option("--out-truth", sim_args.out_truth, "Ground truth JSON")->required();

  BenchmarkArgs bench_args;
  auto* bench_cmd = app.add_subcommand("benchmark", "ROC benchmark over a grid of simulation cells");
  bench_cmd->add_option("--grid", bench_args.grid, "Grid config file")->required();
  bench_cmd->add_option("--reps", bench_args.reps, "Replications per cell (>= 2)")->required();
  bench_cmd->add_option("--thresholds", bench_args.thresholds, "Thresholds, comma separated")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  bench_cmd->add_option("--seed", bench_args.seed, "Master seed");
  bench_cmd->add_option("--out", bench_args.out, "Output CSV")->required();
  bench_args.opt.add_to(bench_cmd);

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify-derivatives", "Analytic vs finite-difference derivative checks");
  verify_cmd->add_option("--family", verify_args.family, "gaussian or bernoulli")
      ->required()
      ->check(CLI::IsMember({"gaussian", "bernoulli"}, CLI::ignore_case));
  verify_cmd->add_option("--trials", verify_args.trials, "Random instances")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", verify_args.seed, "Seed");
  verify_cmd->add_option("--tol", verify_args.tol, "Relative error tolerance")->check(CLI::PositiveNumber);

  std::vector<std::string> argv_storage{"hetscan"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  if (*bench_cmd && bench_args.reps < 2) {
    err << "error: --reps must be at least 2 (intervals need two replications)\n" << bench_cmd->help();
    return kExitUsage;
  }

  try {
    if (*assess_cmd) return cmd_assess(assess_args, out);
    if (*sim_cmd) return cmd_simulate(sim_args, out);
    if (*bench_cmd) return cmd_benchmark(bench_args, out, err);
    if (*verify_cmd) return cmd_verify(verify_args, out);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hetscan::cli
