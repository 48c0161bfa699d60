#include "mjsq/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "mjsq/stats.hpp"

namespace mjsq {

int AtlasConfig::steps() const { return static_cast<int>(std::llround(T / dt)); }

void AtlasConfig::validate() const {
  if (N < 1) throw std::invalid_argument("AtlasConfig: N must be >= 1");
  if (!(dt > 0.0) || !(T > 0.0) || dt > T)
    throw std::invalid_argument("AtlasConfig: need 0 < dt <= T");
  if (!std::isfinite(delta)) throw std::invalid_argument("AtlasConfig: delta must be finite");
}

std::vector<double> skorohod_1d(const std::vector<double>& path) {
  if (path.empty()) return {};
  if (path[0] < 0.0) throw std::invalid_argument("skorohod_1d: path must start >= 0");
  std::vector<double> out(path.size());
  double running = 0.0;  // min(0, running minimum)
  for (std::size_t i = 0; i < path.size(); ++i) {
    running = std::min(running, path[i]);
    out[i] = path[i] - running;
  }
  return out;
}

Matrix gap_reflection_matrix(int N) {
  if (N < 1) throw std::invalid_argument("gap_reflection_matrix: N must be >= 1");
  Matrix r(N, std::vector<double>(N, 0.0));
  for (int i = 0; i < N; ++i) {
    r[i][i] = 1.0;
    if (i + 1 < N) r[i][i + 1] = -0.5;
    if (i >= 1) r[i][i - 1] = (i == 1) ? -1.0 : -0.5;
  }
  return r;
}

ReflectedPath harrison_reiman_map(const Matrix& reflection,
                                  const std::vector<std::vector<double>>& psi, double tol,
                                  int max_iterations) {
  const int N = static_cast<int>(reflection.size());
  if (N == 0 || psi.empty()) throw std::invalid_argument("harrison_reiman_map: empty input");
  const std::size_t T = psi.size();
  for (const auto& row : psi)
    if (static_cast<int>(row.size()) != N)
      throw std::invalid_argument("harrison_reiman_map: psi dimension mismatch");
  for (int i = 0; i < N; ++i) {
    if (reflection[i][i] != 1.0)
      throw std::invalid_argument("harrison_reiman_map: diagonal of R must be 1");
    if (psi[0][i] < -1e-12)
      throw std::invalid_argument("harrison_reiman_map: psi(0) must be in the orthant");
  }

  // Sparse rows of Q = I - R (nonnegative off-diagonal weights).
  std::vector<std::vector<std::pair<int, double>>> q(N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (i != j && reflection[i][j] != 0.0) {
        if (-reflection[i][j] < 0.0)
          throw std::invalid_argument("harrison_reiman_map: off-diagonal of R must be <= 0");
        q[i].emplace_back(j, -reflection[i][j]);
      }

  std::vector<std::vector<double>> eta(T, std::vector<double>(N, 0.0));
  std::vector<std::vector<double>> next(T, std::vector<double>(N, 0.0));
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    double diff = 0.0;
    for (int i = 0; i < N; ++i) {
      double running = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double drive = -psi[t][i];
        for (const auto& [j, w] : q[i]) drive += w * eta[t][j];
        running = std::max(running, drive);
        next[t][i] = running;
        diff = std::max(diff, std::fabs(running - eta[t][i]));
      }
    }
    std::swap(eta, next);
    if (diff < tol) break;
  }
  if (iter >= max_iterations)
    throw std::runtime_error("harrison_reiman_map: Picard iteration did not converge");

  ReflectedPath out;
  out.iterations = iter + 1;
  out.eta = std::move(eta);
  out.phi.assign(T, std::vector<double>(N, 0.0));
  for (std::size_t t = 0; t < T; ++t)
    for (int i = 0; i < N; ++i) {
      double acc = psi[t][i] + out.eta[t][i];
      for (const auto& [j, w] : q[i]) acc -= w * out.eta[t][j];
      out.phi[t][i] = acc;
    }
  return out;
}

namespace {

std::vector<int> record_steps(const AtlasConfig& config, const std::vector<double>& record_times) {
  std::vector<int> steps;
  steps.reserve(record_times.size());
  for (double t : record_times) {
    int s = static_cast<int>(std::llround(t / config.dt));
    steps.push_back(std::clamp(s, 0, config.steps()));
  }
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

std::vector<double> gaps_of_sorted(const std::vector<double>& x) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = i == 0 ? x[0] : x[i] - x[i - 1];
  return g;
}

}  // namespace

PathBundle simulate_unranked(const AtlasConfig& config, const std::vector<double>& initial_ranked,
                             const std::vector<double>& record_times, CounterRng& rng) {
  config.validate();
  const int N = config.N;
  if (static_cast<int>(initial_ranked.size()) != N)
    throw std::invalid_argument("simulate_unranked: initial size mismatch");
  if (!std::is_sorted(initial_ranked.begin(), initial_ranked.end()) || initial_ranked[0] < 0.0)
    throw std::invalid_argument("simulate_unranked: initial must be nondecreasing and >= 0");

  const int steps = config.steps();
  const double sig = std::sqrt(2.0 * config.dt);
  std::vector<double> x(initial_ranked);
  std::vector<int> order(N);
  std::vector<double> local(N, 0.0);
  NormalSampler normal(rng);

  const std::vector<int> rec = record_steps(config, record_times);
  std::size_t rec_idx = 0;

  PathBundle out;
  double mean_gap_acc = 0.0;
  std::int64_t mean_gap_count = 0;

  auto record_if_due = [&](int step) {
    if (rec_idx < rec.size() && rec[rec_idx] == step) {
      std::vector<double> sorted(x);
      std::sort(sorted.begin(), sorted.end());
      out.times.push_back(step * config.dt);
      out.gap_paths.push_back(gaps_of_sorted(sorted));
      out.ranked_paths.push_back(std::move(sorted));
      ++rec_idx;
    }
  };

  record_if_due(0);
  for (int s = 1; s <= steps; ++s) {
    if (config.assign_noise_by_rank) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int i, int j) { return x[i] < x[j]; });
      for (int k = 0; k < N; ++k) {
        const int i = order[k];
        double v = x[i] + (k == 0 ? config.delta * config.dt : 0.0) + sig * normal();
        if (v < 0.0) {
          local[i] += -v;
          v = 0.0;
        }
        x[i] = v;
      }
    } else {
      int amin = 0;
      for (int i = 1; i < N; ++i)
        if (x[i] < x[amin]) amin = i;
      for (int i = 0; i < N; ++i) {
        double v = x[i] + (i == amin ? config.delta * config.dt : 0.0) + sig * normal();
        if (v < 0.0) {
          local[i] += -v;
          v = 0.0;
        }
        x[i] = v;
      }
    }
    if ((s & 1023) == 0 || s == steps) {
      std::vector<double> sorted(x);
      std::sort(sorted.begin(), sorted.end());
      const auto g = gaps_of_sorted(sorted);
      mean_gap_acc += std::accumulate(g.begin(), g.end(), 0.0) / N;
      ++mean_gap_count;
    }
    record_if_due(s);
  }

  out.local_time_totals = std::move(local);
  const double step_disp = 2.0 * std::sqrt(config.dt / 3.14159265358979323846);
  if (mean_gap_count > 0 && step_disp > mean_gap_acc / mean_gap_count) out.step_warning = true;
  return out;
}

PathBundle simulate_gaps(const AtlasConfig& config, const std::vector<double>& initial_ranked,
                         const std::vector<double>& record_times, CounterRng& rng) {
  config.validate();
  const int N = config.N;
  if (N < 2) throw std::invalid_argument("simulate_gaps: N must be >= 2");
  if (static_cast<int>(initial_ranked.size()) != N)
    throw std::invalid_argument("simulate_gaps: initial size mismatch");
  if (!std::is_sorted(initial_ranked.begin(), initial_ranked.end()) || initial_ranked[0] < 0.0)
    throw std::invalid_argument("simulate_gaps: initial must be nondecreasing and >= 0");

  const int steps = config.steps();
  const double sb = std::sqrt(config.dt);
  NormalSampler normal(rng);

  // Driving paths on the full grid; the noise stream is consumed in the same
  // (step, coordinate) order as simulate_unranked.
  std::vector<std::vector<double>> psi(steps + 1, std::vector<double>(N, 0.0));
  psi[0] = gaps_of_sorted(initial_ranked);
  std::vector<double> xi(N);
  for (int s = 1; s <= steps; ++s) {
    for (int i = 0; i < N; ++i) xi[i] = normal();
    psi[s][0] = psi[s - 1][0] + config.delta * config.dt + std::sqrt(2.0) * sb * xi[0];
    for (int i = 1; i < N; ++i)
      psi[s][i] = psi[s - 1][i] + std::sqrt(2.0) * sb * (xi[i] - xi[i - 1]);
  }

  ReflectedPath reflected = harrison_reiman_map(gap_reflection_matrix(N), psi);

  PathBundle out;
  for (int step : record_steps(config, record_times)) {
    out.times.push_back(step * config.dt);
    const auto& g = reflected.phi[step];
    out.gap_paths.push_back(g);
    std::vector<double> ranked(N);
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      acc += g[i];
      ranked[i] = acc;
    }
    out.ranked_paths.push_back(std::move(ranked));
  }
  out.local_time_totals = reflected.eta.back();
  return out;
}

StationarityReport stationarity_diagnostic(const AtlasConfig& config, const LimitLaw& target,
                                           int first_k, int replications, std::uint64_t seed,
                                           int threads) {
  config.validate();
  if (target.dimension() != config.N)
    throw std::invalid_argument("stationarity_diagnostic: target dimension must equal N");
  if (first_k < 1 || first_k > config.N)
    throw std::invalid_argument("stationarity_diagnostic: first_k out of range");
  if (replications < 2) throw std::invalid_argument("stationarity_diagnostic: too few replications");

  std::vector<std::vector<double>> mid(first_k, std::vector<double>(replications));
  std::vector<std::vector<double>> end(first_k, std::vector<double>(replications));

  auto worker = [&](int lo, int hi) {
    for (int r = lo; r < hi; ++r) {
      CounterRng rng(derive_stream(seed, static_cast<std::uint64_t>(r)));
      std::vector<double> g = target.sample(rng);
      std::vector<double> x(config.N);
      double acc = 0.0;
      for (int i = 0; i < config.N; ++i) {
        acc += g[i];
        x[i] = acc;
      }
      PathBundle p = simulate_unranked(config, x, {config.T / 2.0, config.T}, rng);
      for (int i = 0; i < first_k; ++i) {
        mid[i][r] = p.gap_paths.front()[i];
        end[i][r] = p.gap_paths.back()[i];
      }
    }
  };
  int nthreads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, replications));
  if (nthreads == 1) {
    worker(0, replications);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (replications + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const int lo = t * chunk, hi = std::min(replications, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  StationarityReport rep;
  rep.replications = replications;
  for (int i = 0; i < first_k; ++i) {
    auto cdf = [&](double z) { return target.cdf(i + 1, z); };
    EmpiricalLaw emp_mid = EmpiricalLaw::from_samples(mid[i]);
    EmpiricalLaw emp_end = EmpiricalLaw::from_samples(end[i]);
    const double d_mid = ks_distance(emp_mid, cdf);
    const double d_end = ks_distance(emp_end, cdf);
    const double d_between = ks_two_sample(mid[i], end[i]);
    rep.ks_mid_vs_target.push_back(d_mid);
    rep.ks_end_vs_target.push_back(d_end);
    rep.ks_mid_vs_end.push_back(d_between);
    rep.p_mid_vs_target.push_back(ks_p_value(d_mid, replications));
    rep.p_end_vs_target.push_back(ks_p_value(d_end, replications));
    rep.p_mid_vs_end.push_back(ks_two_sample_p_value(d_between, replications, replications));
  }
  return rep;
}

}  // namespace mjsq
