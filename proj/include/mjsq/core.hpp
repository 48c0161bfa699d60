#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mjsq {

enum class Policy {
  MjsqOriginal,  // bonus stream to the shortest queue, ties credited at the top of the block
  MjsqPauses,    // within a tie block only the top rank receives and only the bottom serves
  Rr,            // all jobs routed uniformly at random
  Jsq,           // all jobs to the shortest queue
  JsqD,          // sample d queues, join the shortest of those
};

std::string policy_name(Policy p);
Policy policy_from_name(const std::string& name);

// Parameters of one n-server system in the extreme heavy-traffic scaling:
// per-queue arrival rate n - a/sqrt(n), bonus stream b*sqrt(n) to the shortest
// queue, service rate n per busy server.
struct SystemParams {
  int n = 1;
  double a = 1.0;
  double b = 0.0;
  Policy policy = Policy::MjsqPauses;
  int d = 2;  // only used by JsqD
  std::uint64_t seed = 0;
  double horizon = 1.0;

  double base_arrival_rate() const;   // n - a*n^{-1/2}
  double bonus_rate() const;          // b*sqrt(n)
  double total_arrival_rate() const;  // n^2 - (a-b)*sqrt(n)

  // Throws std::invalid_argument on infeasible parameters.
  void validate() const;
  // Additional requirement a > b > 0 for stationary-law claims.
  void validate_stationary() const;
};

struct LabeledState {
  std::vector<std::int64_t> lengths;  // indexed by original server label
};

// Nondecreasing queue lengths plus the label->rank permutation (0-based).
// rank_of[label] = rank, consistent with lexicographic tie-breaking.
struct RankedState {
  std::vector<std::int64_t> lengths;
  std::vector<std::int32_t> rank_of;
};

// gaps[0] is the shortest queue length itself; gaps[i] the i-th successive
// difference of the ranked vector.
struct GapVector {
  std::vector<std::int64_t> gaps;
};

struct ScaledVector {
  std::vector<double> values;
  double scale = 1.0;  // sqrt(n), stored so the inverse map is explicit
};

RankedState rank(const LabeledState& state);
GapVector gaps(const RankedState& ranked);
std::vector<std::int64_t> cumulative(const GapVector& g);

ScaledVector diffusion_scale(const GapVector& g, int n);
ScaledVector diffusion_scale(const RankedState& r, int n);
std::vector<std::int64_t> unscale(const ScaledVector& s);

// Initial-condition diagnostic: sum_{i=start_index}^{n} exp(-c * x[i]) over a
// nondecreasing scaled vector, 1-based start_index. Small values for large
// start_index indicate admissible initial conditions.
double tail_mass(const ScaledVector& scaled_sorted, double c, int start_index);

}  // namespace mjsq
