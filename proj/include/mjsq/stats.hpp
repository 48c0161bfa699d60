#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mjsq/core.hpp"

namespace mjsq {

// Weighted empirical distribution; weights are replication counts or
// occupation times.
class EmpiricalLaw {
 public:
  static EmpiricalLaw from_samples(std::vector<double> values);
  static EmpiricalLaw from_weighted(std::vector<std::pair<double, double>> value_weight);

  double total_weight() const { return total_; }
  std::size_t support_size() const { return values_.size(); }
  double cdf(double x) const;
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> values_;   // strictly increasing
  std::vector<double> weights_;  // positive, aligned with values_
  double total_ = 0.0;
};

// Sup distance between the empirical CDF and a target CDF, evaluated at the
// jump points (both one-sided limits).
double ks_distance(const EmpiricalLaw& emp, const std::function<double(double)>& target_cdf);

double ks_two_sample(std::vector<double> a, std::vector<double> b);

// Asymptotic Kolmogorov survival function 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 x^2}.
double kolmogorov_sf(double x);
double ks_p_value(double d, double sample_size);
double ks_two_sample_p_value(double d, double m, double n);

struct BatchMeansCi {
  double mean = 0.0;
  double half_width = 0.0;  // 95% Student-t
  int batches = 0;
};

// Non-overlapping batch means over a (possibly autocorrelated) series.
BatchMeansCi batch_means_ci(const std::vector<double>& series, int batch_count);

// Mean and 95% t-interval of iid replicates.
BatchMeansCi t_interval(const std::vector<double>& replicates);

struct Chi2Result {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int bins = 0;
};

// Goodness of fit of integer-valued counts against a pmf on {0,1,...}; bins
// with expected count below min_expected are merged into the tail.
Chi2Result chi2_gof(const std::map<std::int64_t, std::int64_t>& counts,
                    const std::function<double(std::int64_t)>& pmf, double min_expected = 5.0);

double student_t_quantile_975(int dof);
double harmonic_number(std::int64_t n);

// Denominators of the ratio->1 statements for the MJSQ steady state.
struct CorstatPredictions {
  double ranked_k = 0.0;    // sqrt(n) (1/(a-b) + (k-1)/a)
  double imbalance = 0.0;   // n^{3/2} log(n) / a
  double average = 0.0;     // n^{3/2} / a
};
CorstatPredictions corstat_predictions(std::int64_t n, double a, double b, int k);

struct RrPredictions {
  double mean_queue = 0.0;        // exactly n^{3/2}/(a-b) - 1
  double ranked_k_mean = 0.0;     // k sqrt(n)/(a-b), the Gamma(k, a-b) mean scaled
  double gamma_shape = 0.0;       // k
  double gamma_rate = 0.0;        // a-b (law of ranked k scaled by sqrt(n))
  double imbalance_growth = 0.0;  // n^{3/2} log(n) / (a-b)
};
RrPredictions rr_predictions(std::int64_t n, double a, double b, int k);

struct MetricRow {
  std::string policy;
  int n = 0;
  std::string metric;
  double estimate = 0.0;
  double ci_half = 0.0;
  bool has_prediction = false;
  double predicted = 0.0;
  double ratio = 0.0;  // estimate / predicted when available
};

struct ComparisonReport {
  double a = 0.0, b = 0.0, horizon = 0.0;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
};

struct CompareConfig {
  std::vector<Policy> policies;
  std::vector<int> n_values;
  double a = 2.0, b = 1.0;
  double horizon = 1.0;
  int replications = 4;
  int ranked_k = 3;  // report ranked means for k = 1..ranked_k
  int jsq_d = 2;
  std::uint64_t seed = 1;
  int threads = 0;
};

// Runs every (policy, n) cell from a policy-appropriate start (exact
// stationary gaps for the pauses system and RR, the pi_n transform for the
// original dynamics, empty for JSQ variants) and attaches the paper-provided
// predictions where they exist.
ComparisonReport compare_policies(const CompareConfig& config);

// CDF of the ranked limit coordinate j (partial sum of Exp(a-b) and j-1 iid
// Exp(a) variables), and its quantile.
double ranked_limit_cdf(int j, double a, double b, double z);
double ranked_limit_quantile(int j, double a, double b, double p);

struct StationarityCheckResult {
  std::vector<double> grid;
  std::vector<std::string> f_names;
  std::vector<std::pair<int, int>> pairs;     // indices into grid
  std::vector<std::vector<double>> diff;      // [f][pair], paired mean difference
  std::vector<std::vector<double>> se;        // [f][pair]
  double statistic = 0.0;                     // max |diff|
  double se_at_max = 0.0;
  int replications = 0;
};

// Approximate-stationarity discrepancy of the scaled first-k ranked queues
// over a time grid, for a dictionary of bounded test functions (coordinatewise
// exponential products and quartile box indicators of the limit law).
StationarityCheckResult approximate_stationarity_check(int n, double a, double b, int k, double T,
                                                       const std::vector<double>& grid,
                                                       int replications, std::uint64_t seed,
                                                       Policy policy = Policy::MjsqOriginal,
                                                       int threads = 0);

}  // namespace mjsq
