#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "mjsq/core.hpp"

namespace mjsq::testing {

// Dense CTMC transient oracle by uniformization on an explicitly enumerated
// state space. States are integer vectors (gap coordinates).
class UniformizationOracle {
 public:
  using State = std::vector<std::int64_t>;

  // transitions(state) -> list of (next_state, rate)
  template <typename TransitionFn>
  UniformizationOracle(const std::vector<State>& states, TransitionFn transitions) {
    for (std::size_t i = 0; i < states.size(); ++i) index_[states[i]] = i;
    const std::size_t m = states.size();
    rate_matrix_.assign(m, std::vector<double>(m, 0.0));
    double max_out = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double out = 0.0;
      for (const auto& [next, rate] : transitions(states[i])) {
        const auto it = index_.find(next);
        if (it == index_.end())
          throw std::runtime_error("uniformization: transition leaves the truncated space");
        rate_matrix_[i][it->second] += rate;
        out += rate;
      }
      max_out = std::max(max_out, out);
    }
    uniform_rate_ = max_out * 1.05 + 1.0;
    // P = I + Q / Lambda
    for (std::size_t i = 0; i < m; ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        if (j != i) out += rate_matrix_[i][j];
      for (std::size_t j = 0; j < m; ++j)
        rate_matrix_[i][j] = (i == j) ? 1.0 - out / uniform_rate_ : rate_matrix_[i][j] / uniform_rate_;
    }
  }

  // Distribution at time t from a point mass on `start`.
  std::vector<double> transient(const State& start, double t, double tail_tol = 1e-12) const {
    const std::size_t m = rate_matrix_.size();
    std::vector<double> dist(m, 0.0);
    dist[index_.at(start)] = 1.0;
    std::vector<double> acc(m, 0.0);

    const double lt = uniform_rate_ * t;
    double log_w = -lt;  // Poisson(lt) pmf at j = 0, in log space for stability
    double weight = std::exp(log_w);
    double used = weight;
    for (std::size_t i = 0; i < m; ++i) acc[i] += weight * dist[i];
    std::vector<double> next(m, 0.0);
    for (int j = 1; j < 100000; ++j) {
      // dist <- dist * P
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        if (dist[i] == 0.0) continue;
        const double di = dist[i];
        const auto& row = rate_matrix_[i];
        for (std::size_t k = 0; k < m; ++k) next[k] += di * row[k];
      }
      std::swap(dist, next);
      log_w += std::log(lt) - std::log(static_cast<double>(j));
      weight = std::exp(log_w);
      used += weight;
      for (std::size_t i = 0; i < m; ++i) acc[i] += weight * dist[i];
      if (1.0 - used < tail_tol && j > lt) break;
    }
    return acc;
  }

  std::size_t state_index(const State& s) const { return index_.at(s); }

 private:
  std::map<State, std::size_t> index_;
  std::vector<std::vector<double>> rate_matrix_;
  double uniform_rate_ = 1.0;
};

// All gap states with each coordinate <= cap (truncated orthant enumeration).
inline std::vector<std::vector<std::int64_t>> enumerate_states(int dims, std::int64_t cap) {
  std::vector<std::vector<std::int64_t>> states;
  std::vector<std::int64_t> cur(dims, 0);
  while (true) {
    states.push_back(cur);
    int i = dims - 1;
    while (i >= 0 && cur[i] == cap) cur[i--] = 0;
    if (i < 0) break;
    ++cur[i];
  }
  return states;
}

// Transition list of the pauses gap chain (the Jackson identification):
// gap i grows by arrivals to rank i (active iff gap_{i+1} > 0 or i = n) and by
// departures from rank i+1; it shrinks by arrivals to rank i-1 and departures
// from rank i (both gated by gap > 0 of the affected coordinate).
inline std::vector<std::pair<std::vector<std::int64_t>, double>> pauses_gap_transitions(
    const std::vector<std::int64_t>& u, const mjsq::SystemParams& p) {
  const int n = p.n;
  std::vector<std::pair<std::vector<std::int64_t>, double>> out;
  const double gamma = p.base_arrival_rate();
  const double bonus = p.bonus_rate();
  auto arrival_rate = [&](int rank) { return gamma + (rank == 1 ? bonus : 0.0); };

  for (int rank = 1; rank <= n; ++rank) {
    const bool arrival_active = rank == n || u[rank] > 0;  // Y_rank < Y_{rank+1}
    if (arrival_active) {
      // Y_rank += 1: gap rank +1, gap rank+1 -1 (if any)
      auto next = u;
      next[rank - 1] += 1;
      if (rank < n) {
        if (next[rank] == 0) throw std::logic_error("inconsistent arrival gating");
        next[rank] -= 1;
      }
      out.emplace_back(std::move(next), arrival_rate(rank));
    }
    const bool service_active = u[rank - 1] > 0;  // Y_rank > Y_{rank-1}
    if (service_active) {
      // Y_rank -= 1: gap rank -1, gap rank+1 +1 (if any)
      auto next = u;
      next[rank - 1] -= 1;
      if (rank < n) next[rank] += 1;
      out.emplace_back(std::move(next), static_cast<double>(n));
    }
  }
  return out;
}

}  // namespace mjsq::testing
