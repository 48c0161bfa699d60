#include "mjsq/stats.hpp"

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "mjsq/ctmc.hpp"
#include "mjsq/jackson.hpp"

namespace mjsq {

EmpiricalLaw EmpiricalLaw::from_samples(std::vector<double> values) {
  std::vector<std::pair<double, double>> vw;
  vw.reserve(values.size());
  for (double v : values) vw.emplace_back(v, 1.0);
  return from_weighted(std::move(vw));
}

EmpiricalLaw EmpiricalLaw::from_weighted(std::vector<std::pair<double, double>> vw) {
  std::sort(vw.begin(), vw.end());
  EmpiricalLaw law;
  for (const auto& [v, w] : vw) {
    if (w < 0.0) throw std::invalid_argument("EmpiricalLaw: negative weight");
    if (w == 0.0) continue;
    if (!law.values_.empty() && law.values_.back() == v) {
      law.weights_.back() += w;
    } else {
      law.values_.push_back(v);
      law.weights_.push_back(w);
    }
    law.total_ += w;
  }
  if (law.values_.empty()) throw std::invalid_argument("EmpiricalLaw: empty sample");
  return law;
}

double EmpiricalLaw::cdf(double x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size() && values_[i] <= x; ++i) acc += weights_[i];
  return acc / total_;
}

double ks_distance(const EmpiricalLaw& emp, const std::function<double(double)>& target_cdf) {
  double sup = 0.0;
  double below = 0.0;
  const auto& v = emp.values();
  const auto& w = emp.weights();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double g = target_cdf(v[i]);
    const double above = below + w[i] / emp.total_weight();
    sup = std::max({sup, std::fabs(above - g), std::fabs(g - below)});
    below = above;
  }
  return sup;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sup = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    sup = std::max(sup, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
  }
  return sup;
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  double acc = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    acc += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * acc, 0.0, 1.0);
}

double ks_p_value(double d, double sample_size) {
  const double sm = std::sqrt(sample_size);
  return kolmogorov_sf((sm + 0.12 + 0.11 / sm) * d);
}

double ks_two_sample_p_value(double d, double m, double n) {
  const double eff = m * n / (m + n);
  return ks_p_value(d, eff);
}

double student_t_quantile_975(int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_quantile_975: dof must be >= 1");
  return gsl_cdf_tdist_Pinv(0.975, static_cast<double>(dof));
}

BatchMeansCi batch_means_ci(const std::vector<double>& series, int batch_count) {
  if (batch_count < 2) throw std::invalid_argument("batch_means_ci: need >= 2 batches");
  if (series.size() < 2 * static_cast<std::size_t>(batch_count))
    throw std::invalid_argument("batch_means_ci: series shorter than 2x batch count");
  const std::size_t len = series.size() / batch_count;  // remainder dropped
  std::vector<double> means(batch_count, 0.0);
  for (int b = 0; b < batch_count; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) acc += series[i];
    means[b] = acc / static_cast<double>(len);
  }
  return t_interval(means);
}

BatchMeansCi t_interval(const std::vector<double>& replicates) {
  const int m = static_cast<int>(replicates.size());
  if (m < 2) throw std::invalid_argument("t_interval: need >= 2 replicates");
  double mean = 0.0;
  for (double v : replicates) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : replicates) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (m - 1));
  BatchMeansCi out;
  out.mean = mean;
  out.batches = m;
  out.half_width = student_t_quantile_975(m - 1) * sd / std::sqrt(static_cast<double>(m));
  return out;
}

Chi2Result chi2_gof(const std::map<std::int64_t, std::int64_t>& counts,
                    const std::function<double(std::int64_t)>& pmf, double min_expected) {
  if (counts.empty()) throw std::invalid_argument("chi2_gof: empty counts");
  double total = 0.0;
  std::int64_t max_value = 0;
  for (const auto& [v, c] : counts) {
    if (v < 0 || c < 0) throw std::invalid_argument("chi2_gof: negative value or count");
    total += static_cast<double>(c);
    max_value = std::max(max_value, v);
  }

  // Bins 0,1,2,... merged greedily so every expected count reaches
  // min_expected; everything above the last full bin joins the tail bin.
  std::vector<double> observed, expected;
  double obs_acc = 0.0, exp_acc = 0.0, cum_p = 0.0;
  for (std::int64_t v = 0; v <= max_value; ++v) {
    const auto it = counts.find(v);
    obs_acc += it == counts.end() ? 0.0 : static_cast<double>(it->second);
    const double p = pmf(v);
    cum_p += p;
    exp_acc += total * p;
    if (exp_acc >= min_expected) {
      observed.push_back(obs_acc);
      expected.push_back(exp_acc);
      obs_acc = exp_acc = 0.0;
    }
  }
  // Tail bin: everything not yet assigned, expectation from the remaining mass.
  const double tail_exp = total * (1.0 - cum_p) + exp_acc;
  if (!observed.empty() && tail_exp < min_expected) {
    observed.back() += obs_acc;
    expected.back() += tail_exp;
  } else {
    observed.push_back(obs_acc);
    expected.push_back(tail_exp);
  }

  Chi2Result res;
  res.bins = static_cast<int>(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i)
    res.statistic += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  res.dof = res.bins - 1;
  if (res.dof < 1) {
    res.dof = 0;
    res.p_value = 1.0;
  } else {
    res.p_value = gsl_cdf_chisq_Q(res.statistic, static_cast<double>(res.dof));
  }
  return res;
}

double harmonic_number(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("harmonic_number: n must be >= 1");
  if (n <= 2'000'000) {
    double acc = 0.0;
    for (std::int64_t m = n; m >= 1; --m) acc += 1.0 / static_cast<double>(m);
    return acc;
  }
  // Euler-Maclaurin; error O(n^{-6}).
  const double x = static_cast<double>(n);
  return std::log(x) + 0.57721566490153286060 + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x) +
         1.0 / (120.0 * x * x * x * x);
}

CorstatPredictions corstat_predictions(std::int64_t n, double a, double b, int k) {
  if (!(a > b && b > 0.0)) throw std::invalid_argument("corstat_predictions: require a > b > 0");
  if (k < 1 || n < 1) throw std::invalid_argument("corstat_predictions: bad n or k");
  const double sn = std::sqrt(static_cast<double>(n));
  CorstatPredictions out;
  out.ranked_k = sn * (1.0 / (a - b) + (k - 1) / a);
  out.imbalance = sn * sn * sn * std::log(static_cast<double>(n)) / a;
  out.average = sn * sn * sn / a;
  return out;
}

RrPredictions rr_predictions(std::int64_t n, double a, double b, int k) {
  if (!(a > b)) throw std::invalid_argument("rr_predictions: require a > b");
  if (k < 1 || n < 1) throw std::invalid_argument("rr_predictions: bad n or k");
  const double sn = std::sqrt(static_cast<double>(n));
  RrPredictions out;
  out.mean_queue = sn * sn * sn / (a - b) - 1.0;
  out.ranked_k_mean = k * sn / (a - b);
  out.gamma_shape = k;
  out.gamma_rate = a - b;
  out.imbalance_growth = sn * sn * sn * std::log(static_cast<double>(n)) / (a - b);
  return out;
}

double ranked_limit_cdf(int j, double a, double b, double z) {
  if (j < 1) throw std::invalid_argument("ranked_limit_cdf: j must be >= 1");
  if (!(a > b && b > 0.0)) throw std::invalid_argument("ranked_limit_cdf: require a > b > 0");
  if (z <= 0.0) return 0.0;
  const double r0 = a - b;
  if (j == 1) return -std::expm1(-r0 * z);
  // X ~ Exp(a-b) plus Gamma(j-1, a):
  // P(X + G > z) = e^{-r0 z} (a/b)^{j-1} P(j-1, b z) + Q(j-1, a z).
  const int m = j - 1;
  const double surv = std::exp(-r0 * z + m * std::log(a / b) +
                               std::log(gsl_sf_gamma_inc_P(m, b * z))) +
                      gsl_sf_gamma_inc_Q(m, a * z);
  return std::clamp(1.0 - surv, 0.0, 1.0);
}

double ranked_limit_quantile(int j, double a, double b, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("ranked_limit_quantile: p in (0,1)");
  double lo = 0.0, hi = 1.0;
  while (ranked_limit_cdf(j, a, b, hi) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ranked_limit_cdf(j, a, b, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, count));
  if (nthreads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (count + nthreads - 1) / nthreads;
  for (int t = 0; t < nthreads; ++t) {
    const int lo = t * chunk, hi = std::min(count, lo + chunk);
    if (lo < hi)
      pool.emplace_back([&body, lo, hi]() {
        for (int i = lo; i < hi; ++i) body(i);
      });
  }
  for (auto& th : pool) th.join();
}

GapVector start_for_policy(Policy policy, int n, double a, double b, CounterRng& rng) {
  switch (policy) {
    case Policy::MjsqPauses:
    case Policy::MjsqOriginal:
      return stationary_gaps_pauses(n, a, b, rng);
    case Policy::Rr:
      return stationary_gaps_rr(n, a, b, rng);
    default:
      return zero_start(n);
  }
}

}  // namespace

ComparisonReport compare_policies(const CompareConfig& config) {
  ComparisonReport report;
  report.a = config.a;
  report.b = config.b;
  report.horizon = config.horizon;
  report.replications = config.replications;
  report.seed = config.seed;
  if (config.replications < 2)
    throw std::invalid_argument("compare_policies: need >= 2 replications");

  for (Policy policy : config.policies) {
    for (int n : config.n_values) {
      SystemParams params;
      params.n = n;
      params.a = config.a;
      params.b = config.b;
      params.policy = policy;
      params.d = config.jsq_d;
      params.horizon = config.horizon;
      params.validate();

      const int kmax = std::min(config.ranked_k, n);
      const int metrics = 3 + kmax;  // shortest handled as ranked k=1 separately
      std::vector<std::vector<double>> values(metrics,
                                              std::vector<double>(config.replications, 0.0));
      parallel_for(config.replications, config.threads, [&](int r) {
        SystemParams local = params;
        const std::uint64_t stream =
            derive_stream(config.seed, (static_cast<std::uint64_t>(n) << 20) ^
                                           (static_cast<std::uint64_t>(policy) << 16) ^
                                           static_cast<std::uint64_t>(r));
        CounterRng init_rng(derive_stream(stream, 0));
        local.seed = derive_stream(stream, 1);
        const GapVector start = start_for_policy(policy, n, config.a, config.b, init_rng);
        RecorderConfig rec;
        rec.tie_scope_k = 0;
        const EventLog log = simulate(local, start, rec);
        int m = 0;
        values[m++][r] = log.gap_time_average(1);
        for (int k = 1; k <= kmax; ++k) values[m++][r] = log.ranked_time_average(k);
        values[m++][r] = log.imbalance();
        values[m++][r] = log.average_queue_length();
      });

      auto push_row = [&](const std::string& metric, const std::vector<double>& reps,
                          bool has_pred, double predicted) {
        const BatchMeansCi ci = t_interval(reps);
        MetricRow row;
        row.policy = policy_name(policy);
        row.n = n;
        row.metric = metric;
        row.estimate = ci.mean;
        row.ci_half = ci.half_width;
        row.has_prediction = has_pred;
        row.predicted = predicted;
        row.ratio = has_pred && predicted != 0.0 ? ci.mean / predicted : 0.0;
        report.rows.push_back(row);
      };

      const bool mjsq = policy == Policy::MjsqPauses || policy == Policy::MjsqOriginal;
      const bool rr = policy == Policy::Rr;
      int m = 0;
      {
        double pred = 0.0;
        bool has = false;
        if (mjsq) {
          has = true;
          pred = corstat_predictions(n, config.a, config.b, 1).ranked_k;
        } else if (rr) {
          has = true;
          pred = rr_predictions(n, config.a, config.b, 1).ranked_k_mean;
        }
        push_row("shortest_queue_mean", values[m++], has, pred);
      }
      for (int k = 1; k <= kmax; ++k) {
        double pred = 0.0;
        bool has = false;
        if (mjsq) {
          has = true;
          pred = corstat_predictions(n, config.a, config.b, k).ranked_k;
        } else if (rr) {
          has = true;
          pred = rr_predictions(n, config.a, config.b, k).ranked_k_mean;
        }
        push_row("ranked_mean_k" + std::to_string(k), values[m++], has, pred);
      }
      {
        double pred = 0.0;
        bool has = false;
        if (mjsq) {
          has = true;
          pred = corstat_predictions(n, config.a, config.b, 1).imbalance;
        } else if (rr) {
          has = true;
          pred = rr_predictions(n, config.a, config.b, 1).imbalance_growth;
        }
        push_row("imbalance", values[m++], has, pred);
      }
      {
        double pred = 0.0;
        bool has = false;
        if (mjsq) {
          has = true;
          pred = corstat_predictions(n, config.a, config.b, 1).average;
        } else if (rr) {
          has = true;
          pred = rr_predictions(n, config.a, config.b, 1).mean_queue;
        }
        push_row("average_queue_length", values[m++], has, pred);
      }
    }
  }
  return report;
}

StationarityCheckResult approximate_stationarity_check(int n, double a, double b, int k, double T,
                                                       const std::vector<double>& grid,
                                                       int replications, std::uint64_t seed,
                                                       Policy policy, int threads) {
  if (k < 1 || k > n) throw std::invalid_argument("approximate_stationarity_check: bad k");
  if (replications < 2)
    throw std::invalid_argument("approximate_stationarity_check: too few replications");
  if (grid.empty()) throw std::invalid_argument("approximate_stationarity_check: empty grid");
  if (policy != Policy::MjsqOriginal && policy != Policy::MjsqPauses)
    throw std::invalid_argument("approximate_stationarity_check: MJSQ policies only");

  std::vector<double> sorted_grid(grid);
  std::sort(sorted_grid.begin(), sorted_grid.end());
  const int G = static_cast<int>(sorted_grid.size());

  // Test-function dictionary on the scaled first-k ranked queues: exponential
  // products and box indicators with edges at the limit-law quartiles.
  std::vector<std::string> f_names;
  std::vector<std::function<double(const std::vector<double>&)>> fs;
  for (int j = 0; j < k; ++j) {
    f_names.push_back("exp_x" + std::to_string(j + 1));
    fs.push_back([j](const std::vector<double>& x) { return std::exp(-x[j]); });
  }
  f_names.push_back("exp_sum");
  fs.push_back([k](const std::vector<double>& x) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += x[j];
    return std::exp(-s);
  });
  const std::vector<double> ps = {0.25, 0.5, 0.75};
  std::vector<std::vector<double>> edges(k);
  for (int j = 0; j < k; ++j)
    for (double p : ps) edges[j].push_back(ranked_limit_quantile(j + 1, a, b, p));
  std::vector<int> combo(k, 0);
  while (true) {
    std::vector<double> box(k);
    std::string name = "box";
    for (int j = 0; j < k; ++j) {
      box[j] = edges[j][combo[j]];
      name += "_q" + std::to_string(25 * (combo[j] + 1));
    }
    f_names.push_back(name);
    fs.push_back([box, k](const std::vector<double>& x) {
      for (int j = 0; j < k; ++j)
        if (x[j] > box[j]) return 0.0;
      return 1.0;
    });
    int j = k - 1;
    while (j >= 0 && combo[j] == static_cast<int>(ps.size()) - 1) combo[j--] = 0;
    if (j < 0) break;
    ++combo[j];
  }
  const int F = static_cast<int>(fs.size());

  // f values per (replication, f, grid time), from paired snapshots.
  std::vector<std::vector<std::vector<double>>> fv(
      replications, std::vector<std::vector<double>>(F, std::vector<double>(G)));
  const double sn = std::sqrt(static_cast<double>(n));
  parallel_for(replications, threads, [&](int r) {
    SystemParams params;
    params.n = n;
    params.a = a;
    params.b = b;
    params.policy = policy;
    params.horizon = T;
    const std::uint64_t stream = derive_stream(seed, static_cast<std::uint64_t>(r));
    CounterRng init_rng(derive_stream(stream, 0));
    params.seed = derive_stream(stream, 1);
    const GapVector start = stationary_gaps_pauses(n, a, b, init_rng);
    RecorderConfig rec;
    rec.sample_times = sorted_grid;
    rec.snapshot_k = k;
    const EventLog log = simulate(params, start, rec);
    for (int g = 0; g < G; ++g) {
      std::vector<double> ranked(k);
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        acc += static_cast<double>(log.snapshots[g][j]);
        ranked[j] = acc / sn;
      }
      for (int f = 0; f < F; ++f) fv[r][f][g] = fs[f](ranked);
    }
  });

  StationarityCheckResult out;
  out.grid = sorted_grid;
  out.f_names = f_names;
  out.replications = replications;
  for (int i = 0; i < G; ++i)
    for (int j = i + 1; j < G; ++j) out.pairs.emplace_back(i, j);
  out.diff.assign(F, std::vector<double>(out.pairs.size(), 0.0));
  out.se.assign(F, std::vector<double>(out.pairs.size(), 0.0));

  for (int f = 0; f < F; ++f) {
    for (std::size_t p = 0; p < out.pairs.size(); ++p) {
      const auto [i, j] = out.pairs[p];
      double mean = 0.0;
      for (int r = 0; r < replications; ++r) mean += fv[r][f][j] - fv[r][f][i];
      mean /= replications;
      double ss = 0.0;
      for (int r = 0; r < replications; ++r) {
        const double d = fv[r][f][j] - fv[r][f][i] - mean;
        ss += d * d;
      }
      const double se = std::sqrt(ss / (replications - 1)) / std::sqrt(replications);
      out.diff[f][p] = mean;
      out.se[f][p] = se;
      if (std::fabs(mean) > out.statistic) {
        out.statistic = std::fabs(mean);
        out.se_at_max = se;
      }
    }
  }
  return out;
}

}  // namespace mjsq
