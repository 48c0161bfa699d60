#include "mjsq/jackson.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mjsq {

void JacksonSpec::validate() const {
  if (k < 1) throw std::invalid_argument("JacksonSpec: k must be >= 1");
  if (lambda.size() != static_cast<std::size_t>(k) || mu.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("JacksonSpec: lambda/mu must have length k");
  for (int i = 0; i < k; ++i)
    if (!(lambda[i] > 0.0) || !(mu[i] > 0.0))
      throw std::invalid_argument("JacksonSpec: all rates must be positive");
}

double JacksonSpec::mubar(int i) const {
  return i == 1 ? mu[0] : lambda[i - 2] + mu[i - 1];
}

Matrix routing_matrix(const JacksonSpec& spec) {
  spec.validate();
  const int k = spec.k;
  if (k == 1) return {};
  Matrix p(k, std::vector<double>(k, 0.0));
  p[0][1] = 1.0;
  for (int i = 2; i <= k - 1; ++i) {
    p[i - 1][i - 2] = spec.lambda[i - 2] / (spec.lambda[i - 2] + spec.mu[i - 1]);
    p[i - 1][i] = spec.mu[i - 1] / (spec.lambda[i - 2] + spec.mu[i - 1]);
  }
  p[k - 1][k - 2] = spec.lambda[k - 2] / (spec.lambda[k - 2] + spec.mu[k - 1]);
  return p;
}

std::vector<double> solve_traffic(const JacksonSpec& spec) {
  spec.validate();
  const int k = spec.k;
  if (k == 1) return {spec.lambda[0]};

  // (I - P^T) theta = lambda_bar by dense partial-pivot elimination over
  // exact rationals. The traffic chain can be arbitrarily ill-conditioned in
  // norm (near-conservative sub-chains), so floating-point elimination loses
  // the small components of theta; exact arithmetic keeps the solve
  // componentwise sharp and independent of the closed form.
  const int n = k;
  std::vector<std::vector<mpq_class>> aug(n, std::vector<mpq_class>(n + 1, 0));
  for (int i = 2; i <= k; ++i) {
    const mpq_class lam(spec.lambda[i - 2]);
    const mpq_class mu(spec.mu[i - 1]);
    const mpq_class denom = lam + mu;
    const mpq_class p_down = lam / denom;                      // P_{i,i-1}
    aug[i - 2][i - 1] -= p_down;                               // column i-1 gets -P^T
    if (i <= k - 1) aug[i][i - 1] -= mu / denom;               // P_{i,i+1}
  }
  aug[1][0] -= 1;  // P_{1,2} = 1 feeds station 2
  for (int i = 0; i < n; ++i) aug[i][i] += 1;
  aug[n - 1][n] = mpq_class(spec.lambda[k - 1]);

  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (abs(aug[r][col]) > abs(aug[pivot][col])) pivot = r;
    if (aug[pivot][col] == 0) throw std::runtime_error("solve_traffic: singular system");
    std::swap(aug[pivot], aug[col]);
    for (int r = col + 1; r < n; ++r) {
      if (aug[r][col] == 0) continue;
      const mpq_class f = aug[r][col] / aug[col][col];
      for (int c = col; c <= n; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  std::vector<mpq_class> theta(n);
  for (int i = n - 1; i >= 0; --i) {
    mpq_class acc = aug[i][n];
    for (int j = i + 1; j < n; ++j) acc -= aug[i][j] * theta[j];
    theta[i] = acc / aug[i][i];
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = theta[i].get_d();
  return out;
}

std::vector<double> closed_form_theta(const JacksonSpec& spec) {
  spec.validate();
  const int k = spec.k;
  if (k == 1) return {spec.lambda[0]};

  std::vector<long double> log_lambda(k), log_mu(k);
  for (int i = 0; i < k; ++i) {
    log_lambda[i] = std::log(static_cast<long double>(spec.lambda[i]));
    log_mu[i] = std::log(static_cast<long double>(spec.mu[i]));
  }
  long double log_theta1 = 0.0L;
  for (int i = 0; i < k; ++i) log_theta1 += log_lambda[i];
  for (int i = 1; i < k; ++i) log_theta1 -= log_mu[i];

  std::vector<double> theta(k);
  theta[0] = static_cast<double>(std::exp(log_theta1));
  // theta_2 = (lambda_1 + mu_2)/lambda_1 * theta_1; for i >= 3,
  // theta_i = (mu_2..mu_{i-1})/(lambda_1..lambda_{i-1}) (lambda_{i-1}+mu_i) theta_1.
  long double prefix = -log_lambda[0];  // log of mu_2..mu_{i-1} / lambda_1..lambda_{i-1}
  for (int i = 2; i <= k; ++i) {
    const long double value =
        std::log(static_cast<long double>(spec.lambda[i - 2] + spec.mu[i - 1])) + prefix + log_theta1;
    theta[i - 1] = static_cast<double>(std::exp(value));
    prefix += log_mu[i - 1] - log_lambda[i - 1];
  }
  return theta;
}

double traffic_residual(const JacksonSpec& spec, const std::vector<double>& theta) {
  const int k = spec.k;
  const Matrix p = routing_matrix(spec);
  long double max_res = 0.0L, max_theta = 0.0L;
  for (int i = 0; i < k; ++i) {
    long double rhs = (i == k - 1) ? static_cast<long double>(spec.lambda[k - 1]) : 0.0L;
    for (int j = 0; j < k; ++j)
      if (k > 1 && p[j][i] != 0.0) rhs += static_cast<long double>(theta[j]) * p[j][i];
    max_res = std::max(max_res, std::fabs(static_cast<long double>(theta[i]) - rhs));
    max_theta = std::max(max_theta, std::fabs(static_cast<long double>(theta[i])));
  }
  return static_cast<double>(max_res / max_theta);
}

std::vector<double> traffic_intensities(const JacksonSpec& spec) {
  spec.validate();
  const int k = spec.k;
  // Suffix sums of log(lambda_j/mu_j) give the tail products.
  std::vector<long double> suffix(k + 1, 0.0L);
  for (int j = k; j >= 1; --j)
    suffix[j - 1] = suffix[j] + std::log(static_cast<long double>(spec.lambda[j - 1])) -
                    std::log(static_cast<long double>(spec.mu[j - 1]));
  std::vector<double> rho(k);
  for (int i = 0; i < k; ++i) rho[i] = static_cast<double>(std::exp(suffix[i]));

  const std::vector<double> theta = closed_form_theta(spec);
  for (int i = 1; i <= k; ++i) {
    const double via_theta = theta[i - 1] / spec.mubar(i);
    if (std::fabs(via_theta - rho[i - 1]) > 1e-12 * std::fabs(rho[i - 1]))
      throw std::runtime_error("traffic_intensities: theta_i/mubar_i identity violated at station " +
                               std::to_string(i));
  }
  return rho;
}

std::optional<int> first_unstable_index(const std::vector<double>& rho) {
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (rho[i] >= 1.0) return static_cast<int>(i) + 1;
  return std::nullopt;
}

ProductFormLaw::ProductFormLaw(std::vector<double> rho) : rho_(std::move(rho)) {
  log_rho_.resize(rho_.size());
  one_minus_rho_.resize(rho_.size());
  for (std::size_t i = 0; i < rho_.size(); ++i) {
    if (!(rho_[i] > 0.0) || !(rho_[i] < 1.0))
      throw std::domain_error("ProductFormLaw: rho_" + std::to_string(i + 1) +
                              " outside (0,1); chain not positive recurrent");
    log_rho_[i] = std::log(rho_[i]);
    one_minus_rho_[i] = 1.0 - rho_[i];
  }
}

double ProductFormLaw::pmf(const std::vector<std::int64_t>& q) const {
  return std::exp(log_pmf(q));
}

double ProductFormLaw::log_pmf(const std::vector<std::int64_t>& q) const {
  if (q.size() != rho_.size()) throw std::invalid_argument("pmf: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < 0) throw std::invalid_argument("pmf: negative coordinate");
    acc += static_cast<double>(q[i]) * log_rho_[i] + std::log(one_minus_rho_[i]);
  }
  return acc;
}

double ProductFormLaw::tail(const std::vector<std::int64_t>& z) const {
  if (z.size() != rho_.size()) throw std::invalid_argument("tail: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) acc += static_cast<double>(z[i]) * log_rho_[i];
  return std::exp(acc);
}

double ProductFormLaw::mean(int i) const { return rho_.at(i - 1) / one_minus_rho_.at(i - 1); }

double ProductFormLaw::one_minus_rho(int i) const { return one_minus_rho_.at(i - 1); }

std::vector<std::int64_t> ProductFormLaw::sample(CounterRng& rng) const {
  std::vector<std::int64_t> q(rho_.size());
  for (std::size_t i = 0; i < rho_.size(); ++i)
    q[i] = static_cast<std::int64_t>(std::floor(std::log(rng.uniform01()) / log_rho_[i]));
  return q;
}

ProductFormLaw stationary_law(const JacksonSpec& spec) {
  std::vector<double> rho = traffic_intensities(spec);
  if (auto bad = first_unstable_index(rho))
    throw std::domain_error("stationary_law: rho_" + std::to_string(*bad) +
                            " >= 1, no stationary distribution");
  return ProductFormLaw(std::move(rho));
}

namespace {
// log(1 - a n^{-3/2}) and log(1 - a n^{-3/2} + b n^{-1/2}), full precision.
long double log_base_factor(std::int64_t n, double a) {
  const long double x = -static_cast<long double>(a) * std::pow(static_cast<long double>(n), -1.5L);
  return std::log1p(x);
}
long double log_first_factor(std::int64_t n, double a, double b) {
  const long double x = static_cast<long double>(b) / std::sqrt(static_cast<long double>(n)) -
                        static_cast<long double>(a) * std::pow(static_cast<long double>(n), -1.5L);
  return std::log1p(x);
}
void check_mjsq_params(std::int64_t n, double a, double b) {
  if (n < 1) throw std::invalid_argument("mjsq_rho: n must be >= 1");
  if (!(a > 0.0) || !(a < std::pow(static_cast<double>(n), 1.5)))
    throw std::invalid_argument("mjsq_rho: need 0 < a < n^{3/2}");
  if (b < 0.0) throw std::invalid_argument("mjsq_rho: b must be >= 0");
}
}  // namespace

double mjsq_rho_i(int n, double a, double b, int i) {
  check_mjsq_params(n, a, b);
  if (i < 1 || i > n) throw std::invalid_argument("mjsq_rho_i: index out of range");
  const long double lb = log_base_factor(n, a);
  long double acc = static_cast<long double>(n - i) * lb;
  acc += (i == 1) ? log_first_factor(n, a, b) : lb;
  return static_cast<double>(std::exp(acc));
}

double mjsq_one_minus_rho_i(int n, double a, double b, int i) {
  check_mjsq_params(n, a, b);
  if (i < 1 || i > n) throw std::invalid_argument("mjsq_one_minus_rho_i: index out of range");
  const long double lb = log_base_factor(n, a);
  long double acc = static_cast<long double>(n - i) * lb;
  acc += (i == 1) ? log_first_factor(n, a, b) : lb;
  return static_cast<double>(-std::expm1(acc));
}

std::vector<double> mjsq_rho(int n, double a, double b) {
  check_mjsq_params(n, a, b);
  const long double lb = log_base_factor(n, a);
  const long double lf = log_first_factor(n, a, b);
  std::vector<double> rho(n);
  for (int i = 1; i <= n; ++i) {
    const long double acc = static_cast<long double>(n - i) * lb + (i == 1 ? lf : lb);
    rho[i - 1] = static_cast<double>(std::exp(acc));
  }
  if (auto bad = first_unstable_index(rho))
    throw std::domain_error("mjsq_rho: rho_" + std::to_string(*bad) +
                            " >= 1 for (n,a,b); parameters infeasible");
  return rho;
}

ProductFormLaw pi_n(int n, double a, double b) { return ProductFormLaw(mjsq_rho(n, a, b)); }

LimitLaw::LimitLaw(std::vector<double> rates) : rates_(std::move(rates)) {
  for (std::size_t i = 0; i < rates_.size(); ++i)
    if (!(rates_[i] > 0.0))
      throw std::domain_error("LimitLaw: rate " + std::to_string(i + 1) + " must be positive");
}

double LimitLaw::cdf(int i, double z) const {
  return z <= 0.0 ? 0.0 : -std::expm1(-rate(i) * z);
}

double LimitLaw::quantile(int i, double p) const {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p in [0,1)");
  return -std::log1p(-p) / rate(i);
}

std::vector<double> LimitLaw::sample(CounterRng& rng) const {
  std::vector<double> z(rates_.size());
  for (std::size_t i = 0; i < rates_.size(); ++i) z[i] = rng.exponential(rates_[i]);
  return z;
}

std::vector<double> LimitLaw::sample_ranked(CounterRng& rng) const {
  std::vector<double> x = sample(rng);
  double acc = 0.0;
  for (auto& v : x) {
    acc += v;
    v = acc;
  }
  return x;
}

LimitLaw limit_mu(double a, double b, int m) {
  if (!(a > b && b > 0.0)) throw std::invalid_argument("limit_mu: requires a > b > 0");
  if (m < 1) throw std::invalid_argument("limit_mu: m must be >= 1");
  std::vector<double> rates(m, a);
  rates[0] = a - b;
  return LimitLaw(std::move(rates));
}

LimitLaw fixed_k_limit(const std::vector<double>& a) {
  if (a.empty()) throw std::invalid_argument("fixed_k_limit: empty coefficient vector");
  std::vector<double> rates(a.size());
  double tail = 0.0;
  for (int i = static_cast<int>(a.size()) - 1; i >= 0; --i) {
    tail += a[i];
    if (!(tail > 0.0))
      throw std::domain_error("fixed_k_limit: tail sum from index " + std::to_string(i + 1) +
                              " is nonpositive (non-ergodic)");
    rates[i] = tail;
  }
  return LimitLaw(std::move(rates));
}

ExactMoments exact_moments(std::int64_t n, double a, double b, int max_k) {
  check_mjsq_params(n, a, b);
  if (max_k < 1 || max_k > n) throw std::invalid_argument("exact_moments: max_k out of range");
  const long double lb = log_base_factor(n, a);
  const long double lf = log_first_factor(n, a, b);

  // E[Z_i] = rho_i / (1 - rho_i) with rho_i = exp((n-i+1) lb) for i >= 2 and
  // rho_1 = exp(lf + (n-1) lb). Only index 1 can be infeasible.
  auto gap_mean = [&](std::int64_t i) -> long double {
    const long double log_rho =
        static_cast<long double>(n - i) * lb + (i == 1 ? lf : lb);
    if (log_rho >= 0.0L)
      throw std::domain_error("exact_moments: rho_1 >= 1, parameters infeasible");
    return std::exp(log_rho) / (-std::expm1(log_rho));
  };

  ExactMoments out;
  out.ranked_mean.resize(max_k);
  long double acc = 0.0L;
  for (int i = 1; i <= max_k; ++i) {
    acc += gap_mean(i);
    out.ranked_mean[i - 1] = static_cast<double>(acc);
  }

  long double imbalance = 0.0L, weighted = 0.0L;
  for (std::int64_t i = 2; i <= n; ++i) {
    const long double m = gap_mean(i);
    imbalance += m;
    weighted += static_cast<long double>(n - i + 1) * m;
  }
  out.imbalance = static_cast<double>(imbalance);
  out.average = static_cast<double>((weighted + static_cast<long double>(n) * gap_mean(1)) /
                                    static_cast<long double>(n));
  return out;
}

double scaled_geometric_vs_exp_distance(double rho, double scale, double rate) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in (0,1)");
  if (!(scale > 0.0) || !(rate > 0.0)) throw std::invalid_argument("scale/rate must be positive");
  // Step CDF F(z) = 1 - rho^{m+1} on [m/scale, (m+1)/scale); compare against
  // the target at both edges of each step until both tails are negligible.
  const double log_rho = std::log(rho);
  double sup = 0.0;
  double log_tail = 0.0;  // log rho^m
  for (std::int64_t m = 0;; ++m) {
    const double step_tail = std::exp(log_tail + log_rho);      // 1 - F on the step
    const double g_left = std::exp(-rate * m / scale);          // 1 - G at left edge
    const double g_right = std::exp(-rate * (m + 1) / scale);   // 1 - G at right edge
    sup = std::max({sup, std::fabs(g_left - step_tail), std::fabs(g_right - step_tail)});
    log_tail += log_rho;
    if (step_tail < 1e-15 && g_right < 1e-15) break;
  }
  return sup;
}

}  // namespace mjsq
