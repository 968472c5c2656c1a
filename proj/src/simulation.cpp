#include "hetscan/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "hetscan/probit.hpp"

namespace hetscan {

FamilyParams FamilyParams::defaults(Family family) {
  if (family == Family::Gaussian) return {5.0, 10.0, 0.0, 20.0, 0.0, 5.0, 0.0, 5.0};
  return {0.0, 2.0, 0.0, 4.0, 0.0, 3.0, 0.0, 3.0};
}

void SimConfig::validate() const {
  if (n_obs < 2) throw std::invalid_argument("simulation: n_obs must be >= 2");
  if (n_predictors < 1) throw std::invalid_argument("simulation: n_predictors must be >= 1");
  if (n_groupings < 0) throw std::invalid_argument("simulation: n_groupings must be >= 0");
  if (n_levels < 2) throw std::invalid_argument("simulation: n_levels must be >= 2");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("simulation: sparsity must be in [0, 1]");
  if (!(snr > 0.0) || !std::isfinite(snr)) throw std::invalid_argument("simulation: snr must be > 0");
  for (double v : {params.var_f, params.var_bf, params.var_g, params.var_bg})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("simulation: variances must be >= 0");
  for (double m : {params.mu_f, params.mu_bf, params.mu_g, params.mu_bg})
    if (!std::isfinite(m)) throw std::invalid_argument("simulation: means must be finite");
}

nlohmann::json sim_config_to_json(const SimConfig& cfg) {
  return {{"family", to_string(cfg.family)},
          {"n_obs", cfg.n_obs},
          {"n_predictors", cfg.n_predictors},
          {"n_groupings", cfg.n_groupings},
          {"n_levels", cfg.n_levels},
          {"sparsity", cfg.sparsity},
          {"snr", cfg.snr},
          {"mu_f", cfg.params.mu_f},
          {"var_f", cfg.params.var_f},
          {"mu_bf", cfg.params.mu_bf},
          {"var_bf", cfg.params.var_bf},
          {"mu_g", cfg.params.mu_g},
          {"var_g", cfg.params.var_g},
          {"mu_bg", cfg.params.mu_bg},
          {"var_bg", cfg.params.var_bg},
          {"seed", cfg.seed}};
}

nlohmann::json truth_to_json(const GroundTruth& truth) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json a_lk = json::array();
  json b_lkd = json::array();
  for (Eigen::Index l = 0; l < truth.group_intercepts.rows(); ++l) {
    json row = json::array();
    json slopes = json::array();
    for (Eigen::Index k = 0; k < truth.group_intercepts.cols(); ++k) {
      row.push_back(truth.group_intercepts(l, k));
      slopes.push_back(vec(truth.group_slopes[l][k]));
    }
    a_lk.push_back(std::move(row));
    b_lkd.push_back(std::move(slopes));
  }
  return json{{"active", truth.active},
              {"intercept", truth.intercept},
              {"slopes", vec(truth.slopes)},
              {"group_intercepts", std::move(a_lk)},
              {"group_slopes", std::move(b_lkd)},
              {"linear_predictor", vec(truth.linear_predictor)},
              {"noise_sd", truth.noise_sd},
              {"latent_scale", truth.latent_scale}};
}

namespace {

std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

double sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

std::pair<Dataset, GroundTruth> generate(const SimConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_obs, dim = cfg.n_predictors, k_count = cfg.n_groupings, levels = cfg.n_levels;
  const FamilyParams& fp = cfg.params;
  auto rng = make_rng({cfg.seed, 0x73696dULL});
  std::normal_distribution<double> std_normal(0.0, 1.0);
  auto normal = [&](double mean, double var) { return mean + std::sqrt(var) * std_normal(rng); };

  Eigen::MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) x(i, d) = std_normal(rng);

  GroundTruth truth;
  truth.slopes.resize(dim);
  for (int d = 0; d < dim; ++d) truth.slopes[d] = normal(fp.mu_f, fp.var_f);
  truth.intercept = normal(fp.mu_bf, fp.var_bf);
  std::bernoulli_distribution active(1.0 - cfg.sparsity);
  truth.active.resize(dim);
  for (int d = 0; d < dim; ++d) truth.active[d] = active(rng) ? 1 : 0;

  std::uniform_int_distribution<int> level_dist(1, levels);
  std::vector<std::vector<int>> raw_groups(k_count, std::vector<int>(n));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < k_count; ++k) raw_groups[k][i] = level_dist(rng);

  truth.group_intercepts.resize(levels, k_count);
  truth.group_slopes.assign(levels, std::vector<Eigen::VectorXd>(k_count, Eigen::VectorXd(dim)));
  for (int k = 0; k < k_count; ++k) {
    for (int l = 0; l < levels; ++l) {
      truth.group_intercepts(l, k) = normal(fp.mu_bg, fp.var_bg);
      for (int d = 0; d < dim; ++d) truth.group_slopes[l][k][d] = normal(fp.mu_g, fp.var_g);
    }
  }

  // Each observation gets one group term per grouping: the one of its own level.
  truth.linear_predictor.resize(n);
  for (int i = 0; i < n; ++i) {
    double mu = truth.intercept;
    for (int d = 0; d < dim; ++d)
      if (truth.active[d]) mu += truth.slopes[d] * x(i, d);
    for (int k = 0; k < k_count; ++k) {
      const int l = raw_groups[k][i] - 1;
      mu += truth.group_intercepts(l, k);
      for (int d = 0; d < dim; ++d)
        if (truth.active[d]) mu += truth.group_slopes[l][k][d] * x(i, d);
    }
    truth.linear_predictor[i] = mu;
  }

  // A constant linear predictor leaves only roundoff in its sd; fall back to
  // unit scale rather than scaling by that.
  const double mu_sd = sample_sd(truth.linear_predictor);
  const bool constant = !(mu_sd > 1e-12 * (1.0 + truth.linear_predictor.cwiseAbs().maxCoeff()));
  Eigen::VectorXd y(n);
  if (cfg.family == Family::Gaussian) {
    truth.noise_sd = constant ? 1.0 : mu_sd / cfg.snr;
    for (int i = 0; i < n; ++i) y[i] = truth.linear_predictor[i] + truth.noise_sd * std_normal(rng);
  } else {
    truth.latent_scale = constant ? 1.0 : mu_sd;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      y[i] = unif(rng) < probit::normal_cdf(truth.linear_predictor[i] / truth.latent_scale) ? 1.0 : 0.0;
  }

  Dataset data;
  data.family = cfg.family;
  data.x = std::move(x);
  data.y = std::move(y);
  data.response_name = "y";
  for (int d = 0; d < dim; ++d) data.predictor_names.push_back("x" + std::to_string(d + 1));
  for (int k = 0; k < k_count; ++k) {
    data.grouping_names.push_back("g" + std::to_string(k + 1));
    std::vector<std::string> labels;
    labels.reserve(n);
    for (int v : raw_groups[k]) labels.push_back(std::to_string(v));
    LevelEncoding enc = encode_groups(labels);
    data.groups.push_back(std::move(enc.codes));
    data.level_labels.push_back(std::move(enc.labels));
  }
  data.validate();
  return {std::move(data), std::move(truth)};
}

RocRates score_selection(const Selection& selection, const GroundTruth& truth) {
  const int k_count = truth.n_groupings();
  const int dim = static_cast<int>(truth.active.size());
  if (static_cast<int>(selection.selected.size()) != k_count)
    throw std::invalid_argument("score_selection: selection has wrong number of groupings");
  const int positives_per_grouping = static_cast<int>(std::count(truth.active.begin(), truth.active.end(), 1));
  const int positives = positives_per_grouping * k_count;
  const int negatives = (dim - positives_per_grouping) * k_count;
  int tp = 0, fp = 0;
  for (const auto& chosen : selection.selected) {
    std::vector<bool> seen(dim, false);
    for (int d : chosen) {
      if (d < 0 || d >= dim) throw std::invalid_argument("score_selection: predictor index out of range");
      if (seen[d]) continue;
      seen[d] = true;
      (truth.active[d] ? tp : fp) += 1;
    }
  }
  RocRates r;
  r.tpr = positives > 0 ? static_cast<double>(tp) / positives : 0.0;
  r.fpr = negatives > 0 ? static_cast<double>(fp) / negatives : 0.0;
  return r;
}

std::string cell_id(const SimConfig& cell) {
  std::ostringstream os;
  os << to_string(cell.family) << "/D=" << cell.n_predictors << "/K=" << cell.n_groupings << "/L=" << cell.n_levels
     << "/N=" << cell.n_obs;
  return os.str();
}

std::uint64_t replication_seed(std::uint64_t master_seed, const SimConfig& cell, int replication) {
  auto rng = make_rng({master_seed, static_cast<std::uint64_t>(cell.family == Family::Gaussian ? 1 : 2),
                       static_cast<std::uint64_t>(cell.n_predictors), static_cast<std::uint64_t>(cell.n_groupings),
                       static_cast<std::uint64_t>(cell.n_levels), static_cast<std::uint64_t>(cell.n_obs),
                       static_cast<std::uint64_t>(replication)});
  return rng();
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

bool cell_less(const SimConfig& a, const SimConfig& b) {
  auto key = [](const SimConfig& c) {
    return std::make_tuple(to_string(c.family), c.n_predictors, c.n_groupings, c.n_levels, c.n_obs);
  };
  return key(a) < key(b);
}

}  // namespace

std::vector<CellResult> run_benchmark(const std::vector<SimConfig>& cells_in, int replications,
                                      const std::vector<double>& thresholds, std::uint64_t master_seed,
                                      const OptConfig& opt) {
  if (replications < 2) throw std::invalid_argument("benchmark: at least 2 replications are needed for intervals");
  if (thresholds.empty()) throw std::invalid_argument("benchmark: no thresholds given");
  for (double t : thresholds)
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("benchmark: thresholds must lie in [0, 1]");
  std::vector<SimConfig> cells = cells_in;
  std::stable_sort(cells.begin(), cells.end(), cell_less);
  for (const auto& c : cells) c.validate();
  std::vector<double> sorted_thresholds = thresholds;
  std::sort(sorted_thresholds.begin(), sorted_thresholds.end());

  const int n_cells = static_cast<int>(cells.size());
  const int n_jobs = n_cells * replications;
  struct Job {
    bool ok = false;
    std::string error;
    std::vector<RocRates> rates;
  };
  std::vector<Job> jobs(n_jobs);

#pragma omp parallel for schedule(dynamic, 1)
  for (int j = 0; j < n_jobs; ++j) {
    const int c = j / replications;
    const int r = j % replications;
    Job& job = jobs[j];
    try {
      SimConfig cfg = cells[c];
      cfg.seed = replication_seed(master_seed, cells[c], r);
      const auto [data, truth] = generate(cfg);
      OptConfig local = opt;
      local.rng_seed = cfg.seed;
      const HeterogeneityReport report = assess(data, local, Execution::Serial);
      for (double t : sorted_thresholds) job.rates.push_back(score_selection(select_top_t(report, t), truth));
      job.ok = true;
    } catch (const std::exception& e) {
      job.error = e.what();
    }
  }

  std::vector<CellResult> results;
  for (int c = 0; c < n_cells; ++c) {
    CellResult res;
    res.cell = cells[c];
    for (int r = 0; r < replications; ++r) {
      Job& job = jobs[c * replications + r];
      if (job.ok) {
        ++res.n_ok;
        res.replications.push_back(std::move(job.rates));
      } else {
        ++res.n_fail;
        res.failures.push_back("replication " + std::to_string(r) + ": " + job.error);
      }
    }
    if (res.n_fail > 0.2 * replications || res.n_ok == 0) {
      std::ostringstream msg;
      msg << "benchmark cell " << cell_id(res.cell) << " aborted: " << res.n_fail << " of " << replications
          << " replications failed";
      if (!res.failures.empty()) msg << " (first: " << res.failures.front() << ")";
      throw BenchmarkAborted(msg.str(), cell_id(res.cell));
    }
    for (std::size_t ti = 0; ti < sorted_thresholds.size(); ++ti) {
      std::vector<double> tprs, fprs;
      for (const auto& rep : res.replications) {
        tprs.push_back(rep[ti].tpr);
        fprs.push_back(rep[ti].fpr);
      }
      RocPoint pt;
      pt.threshold = sorted_thresholds[ti];
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      pt.tpr_mean = mean(tprs);
      pt.fpr_mean = mean(fprs);
      pt.tpr_lo = std::min(percentile(tprs, 0.025), pt.tpr_mean);
      pt.tpr_hi = std::max(percentile(tprs, 0.975), pt.tpr_mean);
      pt.fpr_lo = std::min(percentile(fprs, 0.025), pt.fpr_mean);
      pt.fpr_hi = std::max(percentile(fprs, 0.975), pt.fpr_mean);
      res.points.push_back(pt);
    }
    results.push_back(std::move(res));
  }
  return results;
}

double mean_roc_auc(const std::vector<RocPoint>& points) {
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}, {1.0, 1.0}};
  for (const auto& p : points) curve.emplace_back(p.fpr_mean, p.tpr_mean);
  std::sort(curve.begin(), curve.end());
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  return area;
}

void write_benchmark_csv(const std::vector<CellResult>& results, std::ostream& out) {
  out << "family,D,K,L,N,threshold,tpr_mean,tpr_lo,tpr_hi,fpr_mean,fpr_lo,fpr_hi,n_ok,n_fail\n";
  std::vector<const CellResult*> ordered;
  for (const auto& r : results) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const CellResult* a, const CellResult* b) { return cell_less(a->cell, b->cell); });
  for (const CellResult* r : ordered) {
    for (const RocPoint& p : r->points) {
      out << to_string(r->cell.family) << ',' << r->cell.n_predictors << ',' << r->cell.n_groupings << ','
          << r->cell.n_levels << ',' << r->cell.n_obs << ',' << format_number(p.threshold) << ','
          << format_number(p.tpr_mean) << ',' << format_number(p.tpr_lo) << ',' << format_number(p.tpr_hi) << ','
          << format_number(p.fpr_mean) << ',' << format_number(p.fpr_lo) << ',' << format_number(p.fpr_hi) << ','
          << r->n_ok << ',' << r->n_fail << '\n';
    }
  }
}

}  // namespace hetscan
