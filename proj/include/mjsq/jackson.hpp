#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mjsq/rng.hpp"

namespace mjsq {

// Birth-death-like open Jackson network: external arrivals only at station k,
// station 1 routes to station 2, interior stations route down with probability
// lambda_{i-1}/(lambda_{i-1}+mu_i) and up otherwise. Effective service rates
// are mubar_1 = mu_1, mubar_i = lambda_{i-1} + mu_i.
struct JacksonSpec {
  int k = 1;
  std::vector<double> lambda;
  std::vector<double> mu;

  void validate() const;
  double mubar(int i) const;  // 1-based station index
};

using Matrix = std::vector<std::vector<double>>;

// Routing probabilities; empty for k = 1 (degenerate M/M/1).
Matrix routing_matrix(const JacksonSpec& spec);

// Dense linear solve of theta = lambda_bar + P^T theta.
std::vector<double> solve_traffic(const JacksonSpec& spec);

// Closed-form solution of the traffic equations, evaluated in log space.
std::vector<double> closed_form_theta(const JacksonSpec& spec);

// theta_i = lambda_bar_i + sum_j theta_j P_{ji}; max |residual| / max |theta|.
double traffic_residual(const JacksonSpec& spec, const std::vector<double>& theta);

// rho_i = prod_{j=i}^k lambda_j / mu_j (tail products, log space). Asserts the
// identity rho_i == theta_i / mubar_i to relative 1e-12.
std::vector<double> traffic_intensities(const JacksonSpec& spec);

// First 1-based index with rho_i >= 1, if any (non-ergodic spec).
std::optional<int> first_unstable_index(const std::vector<double>& rho);

// Product of independent Geometric(1 - rho_i) coordinates on N_0^k:
// pi(q) = prod rho_i^{q_i} (1 - rho_i).
class ProductFormLaw {
 public:
  explicit ProductFormLaw(std::vector<double> rho);

  int dimension() const { return static_cast<int>(rho_.size()); }
  const std::vector<double>& rho() const { return rho_; }

  double pmf(const std::vector<std::int64_t>& q) const;
  double log_pmf(const std::vector<std::int64_t>& q) const;
  // P(Q_i >= z_i for all i) = prod rho_i^{z_i}.
  double tail(const std::vector<std::int64_t>& z) const;
  double mean(int i) const;        // 1-based coordinate, rho/(1-rho)
  double one_minus_rho(int i) const;
  std::vector<std::int64_t> sample(CounterRng& rng) const;

 private:
  std::vector<double> rho_;
  std::vector<double> log_rho_;
  std::vector<double> one_minus_rho_;  // carried at full precision
};

ProductFormLaw stationary_law(const JacksonSpec& spec);

// MJSQ gap-chain intensities rho_i^{(n)} = prod_{j=i}^n (1 - a n^{-3/2} +
// b n^{-1/2} 1{j=1}), exact in log space. Only index 1 can be infeasible.
std::vector<double> mjsq_rho(int n, double a, double b);
double mjsq_rho_i(int n, double a, double b, int i);   // single coordinate
double mjsq_one_minus_rho_i(int n, double a, double b, int i);

// Stationary law of the unscaled gap chain of the system with pauses.
ProductFormLaw pi_n(int n, double a, double b);

// Product of independent exponentials; coordinate i has rate rates[i-1].
class LimitLaw {
 public:
  explicit LimitLaw(std::vector<double> rates);

  int dimension() const { return static_cast<int>(rates_.size()); }
  const std::vector<double>& rates() const { return rates_; }
  double rate(int i) const { return rates_.at(i - 1); }
  double mean(int i) const { return 1.0 / rate(i); }
  double cdf(int i, double z) const;
  double quantile(int i, double p) const;
  std::vector<double> sample(CounterRng& rng) const;
  // Cumulative transform: law of the ranked vector (partial sums of a sample).
  std::vector<double> sample_ranked(CounterRng& rng) const;

 private:
  std::vector<double> rates_;
};

// mu_{a,b} = Exp(a-b) (x) Exp(a) (x) ... truncated to m coordinates.
LimitLaw limit_mu(double a, double b, int m);

// Fixed-k heavy-traffic limit (x)_{i<=k} Exp(sum_{j>=i} a_j).
LimitLaw fixed_k_limit(const std::vector<double>& a);

struct ExactMoments {
  std::vector<double> ranked_mean;  // E[X_{(k)}], k = 1..max_k
  double imbalance = 0.0;           // E[X_{(n)} - X_{(1)}]
  double average = 0.0;             // E[(1/n) sum_k X_{(k)}]
};

// Exact stationary moments of the pauses system, O(n) time, overflow-safe up
// to n ~ 1e8 via the closed tail-product form.
ExactMoments exact_moments(std::int64_t n, double a, double b, int max_k);

// Analytic sup-distance between the CDF of G/s with G ~ Geometric(1-rho) on
// N_0 and Exp(rate). Used for the limit-law convergence checks.
double scaled_geometric_vs_exp_distance(double rho, double scale, double rate);

}  // namespace mjsq
