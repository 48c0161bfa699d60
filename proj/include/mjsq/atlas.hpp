#pragma once

#include <cstdint>
#include <vector>

#include "mjsq/jackson.hpp"
#include "mjsq/rng.hpp"

namespace mjsq {

// Finite-N reflected Atlas diffusion: drift delta on the current lowest
// particle, diffusion coefficient sqrt(2), every particle reflected at 0.
struct AtlasConfig {
  int N = 2;
  double delta = 0.0;  // set to b when matching the queueing limit
  double dt = 1e-3;
  double T = 1.0;
  // by_rank assigns the step's Gaussian increments to ranked coordinates
  // instead of particle labels; distributionally equivalent (increments are
  // exchangeable) and required for the pathwise dual-representation check.
  bool assign_noise_by_rank = false;

  int steps() const;
  void validate() const;
};

struct PathBundle {
  std::vector<double> times;                      // recorded grid times
  std::vector<std::vector<double>> ranked_paths;  // [time][coordinate]
  std::vector<std::vector<double>> gap_paths;     // [time][coordinate]
  std::vector<double> local_time_totals;          // accumulated regulators
  bool step_warning = false;  // per-step displacement comparable to mean gap
};

// One-dimensional Skorohod map G(f)(t) = f(t) - min(0, min_{s<=t} f(s)) on a
// discrete path; f[0] must be >= 0.
std::vector<double> skorohod_1d(const std::vector<double>& path);

// Harrison-Reiman Skorohod problem on the nonnegative orthant for reflection
// matrix R: phi = psi + R eta with eta nondecreasing from 0 and
// int phi_i d eta_i = 0. Solved by Picard iteration over the whole path;
// requires spectral radius of |I - R| < 1, which holds for the gap-process
// matrix below.
struct ReflectedPath {
  std::vector<std::vector<double>> phi;  // [time][coordinate]
  std::vector<std::vector<double>> eta;
  int iterations = 0;
};

ReflectedPath harrison_reiman_map(const Matrix& reflection,
                                  const std::vector<std::vector<double>>& psi,
                                  double tol = 1e-10, int max_iterations = 200000);

// The gap-process reflection matrix: unit diagonal, -1/2 superdiagonal,
// subdiagonal -1 in row 2 and -1/2 below.
Matrix gap_reflection_matrix(int N);

// Euler-Maruyama on particle positions with per-step reflection at 0.
// initial_ranked holds nondecreasing starting positions. record_times are
// snapped to the grid.
PathBundle simulate_unranked(const AtlasConfig& config, const std::vector<double>& initial_ranked,
                             const std::vector<double>& record_times, CounterRng& rng);

// Gap coordinates via the Skorohod representation: gaps = Gamma_R(V) with
// V_1 = x0_1 + sqrt(2) B_1 + delta t and V_i = (x0_i - x0_{i-1}) +
// sqrt(2)(B_i - B_{i-1}). Consumes noise in the same (step, coordinate) order
// as simulate_unranked, so identical rng streams drive both representations.
PathBundle simulate_gaps(const AtlasConfig& config, const std::vector<double>& initial_ranked,
                         const std::vector<double>& record_times, CounterRng& rng);

struct StationarityReport {
  std::vector<double> ks_mid_vs_target;   // per coordinate, t = T/2
  std::vector<double> ks_end_vs_target;   // per coordinate, t = T
  std::vector<double> ks_mid_vs_end;      // two-sample, between the two times
  std::vector<double> p_mid_vs_target;
  std::vector<double> p_end_vs_target;
  std::vector<double> p_mid_vs_end;
  int replications = 0;
};

// Simulates `replications` independent paths started from `target` gap law and
// compares first-k gap marginals at T/2 and T against the target and against
// each other. seed derives one stream per replication.
StationarityReport stationarity_diagnostic(const AtlasConfig& config, const LimitLaw& target,
                                           int first_k, int replications, std::uint64_t seed,
                                           int threads = 0);

}  // namespace mjsq
