// Acceptance suite: one PASS/FAIL line per criterion. Criteria can be chosen
// on the command line ("hetscan_acceptance 1 2 8"); the default runs all.
// Exit status is 0 only if every selected criterion passes.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "config_file.hpp"
#include "hetscan/heterogeneity.hpp"
#include "hetscan/kl_sensitivity.hpp"
#include "hetscan/simulation.hpp"
#include "hetscan/verification.hpp"

namespace fs = std::filesystem;
using namespace hetscan;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

const std::vector<double> kThresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
constexpr std::uint64_t kMasterSeed = 20200;
constexpr int kReplications = 10;

// ---------------------------------------------------------------------------

Verdict derivatives() {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool ok = true;
  for (const char* family : {"gaussian", "bernoulli"}) {
    std::ostringstream out, err;
    const int code = cli::run({"verify-derivatives", "--family", family, "--trials", "20", "--seed", "1", "--tol",
                               "1e-3"},
                              out, err);
    ok = ok && code == 0;
    detail << family << " exit " << code << "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  detail << "runtime " << fmt(secs, 3) << " s (limit 120 s)";
  return {ok && secs < 120.0, detail.str()};
}

Verdict fisher() {
  double worst_closed = 0.0, worst_fd = 0.0;
  for (double mu : {-2.0, 0.0, 3.5})
    for (double sigma : {0.1, 0.5, 1.0, 4.0}) {
      PredictiveDistribution d{Family::Gaussian, Eigen::Vector2d(mu, sigma)};
      const Eigen::MatrixXd f = fisher_at_coincidence(d);
      Eigen::Matrix2d closed = Eigen::Matrix2d::Zero();
      closed(0, 0) = 1.0 / (sigma * sigma);
      closed(1, 1) = 2.0 / (sigma * sigma);
      const double scale = closed.cwiseAbs().maxCoeff();
      worst_closed = std::max(worst_closed, (f - closed).cwiseAbs().maxCoeff() / scale);
      worst_fd = std::max(worst_fd, (finite_difference_fisher(d) - f).cwiseAbs().maxCoeff() / scale);
    }
  for (double p : {0.01, 0.2, 0.5, 0.7, 0.99}) {
    PredictiveDistribution d{Family::Bernoulli, Eigen::VectorXd::Constant(1, p)};
    const double f = fisher_at_coincidence(d)(0, 0);
    const double closed = 1.0 / (p * (1.0 - p));
    worst_closed = std::max(worst_closed, std::abs(f - closed) / closed);
    worst_fd = std::max(worst_fd, std::abs(finite_difference_fisher(d)(0, 0) - f) / closed);
  }
  return {worst_closed <= 1e-6 && worst_fd <= 1e-6, "max rel. deviation from closed form " + fmt(worst_closed) +
                                                        ", from finite-difference KL Hessian " + fmt(worst_fd) +
                                                        " (limit 1e-6)"};
}

std::vector<CellResult> benchmark_cells(const std::string& config_name) {
  const auto cells = cli::grid_from_sections(cli::load_config(fs::path(HETSCAN_SOURCE_DIR) / "configs" / config_name));
  return run_benchmark(cells, kReplications, kThresholds, kMasterSeed, OptConfig{});
}

// Every threshold of every cell must be strictly above the chance diagonal.
void above_chance(const std::vector<CellResult>& results, bool& ok, std::ostringstream& detail) {
  for (const auto& r : results) {
    std::vector<std::string> bad;
    for (const auto& p : r.points)
      if (!(p.tpr_mean > p.fpr_mean))
        bad.push_back("t=" + fmt(p.threshold, 2) + " (tpr " + fmt(p.tpr_mean, 3) + ", fpr " + fmt(p.fpr_mean, 3) + ")");
    if (!bad.empty()) {
      ok = false;
      detail << cell_id(r.cell) << " not above chance at";
      for (const auto& b : bad) detail << ' ' << b;
      detail << "; ";
    }
  }
}

Verdict gaussian_roc() {
  const auto results = benchmark_cells("gaussian_desk.cfg");
  std::map<std::pair<int, int>, double> auc;
  for (const auto& r : results) auc[{r.cell.n_predictors, r.cell.n_groupings}] = mean_roc_auc(r.points);

  std::ostringstream detail;
  bool a_ok = true;
  std::ostringstream a_detail;
  for (const auto& r : results)
    if (r.cell.n_groupings <= 2) above_chance({r}, a_ok, a_detail);
  detail << "(a) " << (a_ok ? "ok" : "FAIL: " + a_detail.str()) << " ";

  const double auc51 = auc.at({5, 1});
  const bool b_ok = auc51 >= 0.85;
  detail << "(b) AUC(D=5,K=1)=" << fmt(auc51) << (b_ok ? " ok" : " FAIL") << "; ";

  const double k1 = auc.at({10, 1}), k2 = auc.at({10, 2}), k3 = auc.at({10, 3});
  const bool c_ok = k1 >= k2 && k2 >= k3;
  detail << "(c) AUC(D=10,K=1..3)=" << fmt(k1) << ", " << fmt(k2) << ", " << fmt(k3) << (c_ok ? " ok" : " FAIL")
         << " (K=3 <= K=1: " << (k3 <= k1 ? "yes" : "no") << ")";

  int failures = 0;
  for (const auto& r : results) failures += r.n_fail;
  detail << "; failed replications " << failures;
  return {a_ok && b_ok && c_ok, detail.str()};
}

Verdict bernoulli_parity() {
  const auto results = benchmark_cells("bernoulli_d5k1.cfg");
  bool ok = true;
  std::ostringstream detail;
  above_chance(results, ok, detail);
  for (const auto& r : results) detail << "AUC " << fmt(mean_roc_auc(r.points)) << ", failed replications " << r.n_fail;
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------

// Accepts either the prepared schema or the raw UCI day.csv layout.
std::string bike_csv_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::vector<std::string> cols;
  {
    std::istringstream hs(header);
    for (std::string c; std::getline(hs, c, ',');) {
      c.erase(std::remove(c.begin(), c.end(), '\r'), c.end());
      c.erase(std::remove(c.begin(), c.end(), '"'), c.end());
      cols.push_back(c);
    }
  }
  std::ostringstream rest;
  rest << in.rdbuf();
  if (std::find(cols.begin(), cols.end(), "dailyuses") != cols.end()) return header + "\n" + rest.str();

  const std::vector<std::pair<std::string, std::string>> mapping{
      {"cnt", "dailyuses"}, {"temp", "temperature"},  {"hum", "humidity"},  {"windspeed", "windspeed"},
      {"mnth", "month"},    {"weekday", "day_of_week"}, {"season", "season"}, {"weathersit", "weather"},
      {"holiday", "holiday"}};
  std::vector<std::size_t> idx;
  std::string out;
  for (const auto& [raw, name] : mapping) {
    const auto it = std::find(cols.begin(), cols.end(), raw);
    if (it == cols.end()) throw std::runtime_error("bike CSV lacks column '" + raw + "'");
    idx.push_back(static_cast<std::size_t>(it - cols.begin()));
    out += (out.empty() ? "" : ",") + name;
  }
  out += "\n";
  std::istringstream body(rest.str());
  for (std::string line; std::getline(body, line);) {
    line.erase(std::remove(line.begin(), line.end(), '\r'), line.end());
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    for (std::size_t j = 0; j < idx.size(); ++j) out += (j ? "," : "") + cells.at(idx[j]);
    out += "\n";
  }
  return out;
}

Verdict bike() {
  fs::path path;
  if (const char* env = std::getenv("HETSCAN_BIKE_CSV")) path = env;
  else path = fs::path(HETSCAN_SOURCE_DIR) / "data" / "bike_day.csv";
  if (!fs::exists(path))
    return {false, "bike-sharing data not found at " + path.string() +
                       " (set HETSCAN_BIKE_CSV to the UCI day.csv or a prepared file)"};
  const auto start = std::chrono::steady_clock::now();
  CsvSchema schema;
  schema.response_name = "dailyuses";
  schema.grouping_names = {"month", "day_of_week", "season", "weather", "holiday"};
  std::istringstream text(bike_csv_text(path));
  const Dataset data = parse_csv(text, schema);
  const HeterogeneityReport rep = assess(data, OptConfig{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string chosen = rep.grouping_names[choose_grouping(rep)];
  auto find = [](const std::vector<std::string>& v, const std::string& s) {
    const auto it = std::find(v.begin(), v.end(), s);
    if (it == v.end()) throw std::runtime_error("bike data lacks '" + s + "'");
    return static_cast<Eigen::Index>(it - v.begin());
  };
  const Eigen::Index month = find(rep.grouping_names, "month");
  const double t = rep.slope_matrix(find(rep.predictor_names, "temperature"), month);
  const double h = rep.slope_matrix(find(rep.predictor_names, "humidity"), month);
  const double w = rep.slope_matrix(find(rep.predictor_names, "windspeed"), month);
  const bool a_ok = chosen == "month";
  const bool b_ok = t > h && h > w;
  const bool time_ok = secs < 300.0;
  std::ostringstream detail;
  detail << "N=" << data.n_obs() << "; (a) chosen grouping '" << chosen << "'" << (a_ok ? " ok" : " FAIL")
         << "; (b) month column temperature " << fmt(t) << ", humidity " << fmt(h) << ", windspeed " << fmt(w)
         << (b_ok ? " ok" : " FAIL") << "; runtime " << fmt(secs, 3) << " s" << (time_ok ? "" : " (over 300 s)");
  return {a_ok && b_ok && time_ok, detail.str()};
}

// ---------------------------------------------------------------------------

struct Moments {
  double n = 0.0, sum = 0.0, sum_sq = 0.0;
  void add(double v) {
    n += 1.0;
    sum += v;
    sum_sq += v * v;
  }
  double mean() const { return sum / n; }
  double variance() const { return (sum_sq - n * mean() * mean()) / (n - 1.0); }
};

Verdict generator() {
  bool ok = true;
  std::ostringstream detail;
  auto check = [&](const std::string& label, const Moments& m, double mu, double var) {
    const double se = std::sqrt(var / m.n);
    const bool mean_ok = std::abs(m.mean() - mu) <= 3.0 * se;
    // Zero-variance priors are checked exactly.
    const bool var_ok = var == 0.0 ? m.variance() <= 1e-24 : std::abs(m.variance() - var) <= 0.2 * var;
    ok = ok && mean_ok && var_ok;
    detail << label << " mean " << fmt(m.mean()) << " (target " << mu << ")" << (mean_ok ? "" : " FAIL") << ", var "
           << fmt(m.variance()) << " (target " << var << ")" << (var_ok ? "" : " FAIL") << "; ";
  };
  for (Family family : {Family::Gaussian, Family::Bernoulli}) {
    SimConfig cfg;
    cfg.family = family;
    cfg.params = FamilyParams::defaults(family);
    cfg.n_predictors = 5;
    cfg.n_groupings = 1;
    Moments slopes, intercept, group_slopes, group_intercepts, active;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      cfg.seed = seed;
      const GroundTruth truth = generate(cfg).second;
      for (double b : truth.slopes) slopes.add(b);
      intercept.add(truth.intercept);
      for (const auto& per_level : truth.group_slopes)
        for (const auto& b : per_level)
          for (double v : b) group_slopes.add(v);
      for (Eigen::Index i = 0; i < truth.group_intercepts.size(); ++i) group_intercepts.add(truth.group_intercepts.data()[i]);
      for (int z : truth.active) active.add(z);
    }
    const FamilyParams& p = cfg.params;
    detail << to_string(family) << ": ";
    check("b_d", slopes, p.mu_f, p.var_f);
    check("a", intercept, p.mu_bf, p.var_bf);
    check("b_lkd", group_slopes, p.mu_g, p.var_g);
    check("a_lk", group_intercepts, p.mu_bg, p.var_bg);
    const double se = std::sqrt(0.6 * 0.4 / active.n);
    const bool rate_ok = std::abs(active.mean() - 0.6) <= 3.0 * se;
    ok = ok && rate_ok;
    detail << "active rate " << fmt(active.mean()) << " (target 0.6 +- " << fmt(3 * se, 2) << ")"
           << (rate_ok ? "" : " FAIL") << "; ";
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "hetscan_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  std::ofstream(p("grid.cfg")) << "D = 5\nK = 1, 2\nN = 80\n";

  // Each command is run twice with {tag} substituted by "a" and "b"; the
  // listed outputs and standard output must agree byte for byte.
  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::string> outputs;
  };
  const std::vector<Case> cases{
      {"simulate",
       {"simulate", "--seed", "11", "--out-data", "{dir}/sim_{tag}.csv", "--out-truth", "{dir}/truth_{tag}.json"},
       {"sim_{tag}.csv", "truth_{tag}.json"}},
      {"assess",
       {"assess", "--data", "{dir}/sim_a.csv", "--response", "y", "--groups", "g1", "--family", "gaussian", "--seed",
        "3", "--out", "{dir}/report_{tag}.json"},
       {"report_{tag}.json"}},
      {"benchmark",
       {"benchmark", "--grid", "{dir}/grid.cfg", "--reps", "2", "--seed", "5", "--out", "{dir}/bench_{tag}.csv"},
       {"bench_{tag}.csv", "bench_{tag}.csv.meta.json"}},
      {"verify-derivatives", {"verify-derivatives", "--family", "bernoulli", "--trials", "5", "--seed", "9"}, {}},
  };
  auto subst = [&](std::string s, const std::string& tag) {
    for (const auto& [key, value] : {std::pair<std::string, std::string>{"{dir}", dir.string()}, {"{tag}", tag}})
      for (std::size_t pos; (pos = s.find(key)) != std::string::npos;) s.replace(pos, key.size(), value);
    return s;
  };

  bool ok = true;
  std::ostringstream detail;
  for (const Case& c : cases) {
    std::string stdout_text[2];
    int codes[2];
    for (int run = 0; run < 2; ++run) {
      const std::string tag = run == 0 ? "a" : "b";
      std::vector<std::string> args;
      for (const auto& a : c.args) args.push_back(subst(a, tag));
      std::ostringstream out, err;
      codes[run] = cli::run(args, out, err);
      stdout_text[run] = out.str();
    }
    // Output paths appear in standard output; compare with the tag neutralised.
    std::string s0 = stdout_text[0], s1 = stdout_text[1];
    for (auto* s : {&s0, &s1})
      for (const std::string tagged : {"_a.", "_b."})
        for (std::size_t pos; (pos = s->find(tagged)) != std::string::npos;) s->replace(pos, tagged.size(), "_?.");
    bool same = codes[0] == 0 && codes[1] == 0 && s0 == s1;
    for (const auto& o : c.outputs) same = same && slurp(dir / subst(o, "a")) == slurp(dir / subst(o, "b"));
    ok = ok && same;
    detail << c.name << (same ? " identical" : " DIFFERENT") << "; ";
  }
  fs::remove_all(dir);
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------

std::string normalize_ws(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

Verdict formulas() {
  struct Case {
    std::string label;
    std::string response;
    std::vector<std::string> predictors, groupings;
    std::vector<std::vector<int>> selection;
    std::string expected;
  };
  const std::vector<std::string> bike_preds{"temperature", "humidity", "windspeed"};
  const std::vector<std::string> bike_groups{"month", "day_of_week", "season", "weather", "holiday"};
  const std::vector<Case> cases{
      {"no-heterogeneity model", "y", {"x1", "x2"}, {}, {}, "y ~ x1 + x2"},
      {"both slopes over both groupings",
       "y",
       {"x1", "x2"},
       {"g1", "g2"},
       {{0, 1}, {0, 1}},
       "y ~ x1 + x2 + (x1 + x2 | g1) + (x1 + x2 | g2)"},
      {"x1 over g2 only", "y", {"x1", "x2"}, {"g1", "g2"}, {{}, {0}}, "y ~ x1 + x2 + (x1 | g2)"},
      {"bike base model",
       "dailyuses",
       bike_preds,
       bike_groups,
       {{}, {}, {}, {}, {}},
       "dailyuses ~ temperature + humidity + windspeed + (1 | month) + (1 | day_of_week) + (1 | season) +\n"
       "  (1 | weather) + (1 | holiday)"},
      {"bike recommended model",
       "dailyuses",
       bike_preds,
       bike_groups,
       {{0, 1, 2}, {}, {}, {}, {}},
       "dailyuses ~ temperature + humidity + windspeed + (temperature + humidity + windspeed | month) +\n"
       "  (1 | day_of_week) + (1 | season) +\n  (1 | weather) + (1 | holiday)"},
  };
  bool ok = true;
  std::ostringstream detail;
  for (const Case& c : cases) {
    Selection sel;
    sel.selected = c.selection;
    const std::string got = recommend_formula(c.response, c.predictors, c.groupings, sel);
    const bool same = normalize_ws(got) == normalize_ws(c.expected);
    ok = ok && same;
    detail << c.label << (same ? " ok" : " FAIL (got \"" + got + "\")") << "; ";
  }
  return {ok, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"derivative correctness", derivatives},
      {"Fisher matrix values", fisher},
      {"Gaussian ROC at desk scale", gaussian_roc},
      {"Bernoulli parity", bernoulli_parity},
      {"bike case study", bike},
      {"generator fidelity", generator},
      {"CLI determinism", determinism},
      {"formula emission", formulas},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::cerr << "usage: hetscan_acceptance [criterion numbers 1-" << criteria.size() << "]\n";
      return 2;
    }
    wanted.insert(c);
  }
  if (wanted.empty())
    for (int c = 1; c <= static_cast<int>(criteria.size()); ++c) wanted.insert(c);

  int failed = 0;
  for (int c : wanted) {
    const auto& [name, fn] = criteria[c - 1];
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !v.pass;
    std::cout << "criterion " << c << " [" << name << "]: " << (v.pass ? "PASS" : "FAIL") << " -- " << v.detail
              << " [" << fmt(secs, 3) << " s]" << std::endl;
  }
  std::cout << (wanted.size() - failed) << " of " << wanted.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
