#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mjsq/core.hpp"
#include "mjsq/rng.hpp"

namespace mjsq {

// Per-rank rates of the system with pauses at one state: stream i feeds rank i
// and is active iff Y_i < Y_{i+1} (Y_{n+1} = inf); the rank-i server is active
// iff Y_i > Y_{i-1} (Y_0 = 0).
struct RateTable {
  std::vector<double> arrival;  // gamma_i when active, 0 when paused
  std::vector<double> service;  // n when active, 0 when paused
  double total() const;
};

RateTable rates_pauses(const std::vector<std::int64_t>& ranked, const SystemParams& params);

// Tie rules of the original dynamics in ranked coordinates: an arrival routed
// to any rank of a tie block is credited at the top of the block, a departure
// is debited at the bottom. target_rank is 1-based.
void apply_arrival_original(std::vector<std::int64_t>& ranked, int target_rank);
void apply_departure_original(std::vector<std::int64_t>& ranked, int target_rank);

// Routing decision for the sampling policies; returns a 1-based rank.
// MJSQ routing is realized through the rate table, not through this function.
int route(Policy policy, const std::vector<std::int64_t>& ranked, int d, CounterRng& rng);

struct RecorderConfig {
  // Snapshot the first snapshot_k gaps at each of these epochs.
  std::vector<double> sample_times;
  int snapshot_k = 0;
  // Occupation-time batches for batch-means intervals (0 = single batch).
  int batches = 0;
  // Collect gap-1 values at this many equally spaced epochs (0 = off);
  // spacing beyond the autocorrelation time makes the samples usable for
  // goodness-of-fit counts.
  int gap1_samples = 0;
  // Ties are counted among the first tie_scope_k ranks (0 = whole vector).
  int tie_scope_k = 0;
  // Re-derive ranking invariants from scratch every audit_interval events
  // (0 = off); throws on any violation.
  std::int64_t audit_interval = 0;
  // Stop after this many events even if the horizon is not reached (0 = off).
  std::int64_t max_events = 0;
};

struct EventLog {
  double horizon = 0.0;
  double elapsed = 0.0;  // min(horizon, time at max_events)
  std::int64_t event_count = 0;
  double time_tied = 0.0;

  std::vector<double> gap_occupation;               // integral of Z_i dt
  std::vector<std::vector<double>> batch_occupation;  // [batch][gap]
  std::vector<double> batch_length;

  std::vector<double> snapshot_times;
  std::vector<std::vector<std::int64_t>> snapshots;  // first-k gaps per epoch

  std::map<std::int64_t, std::int64_t> gap1_histogram;  // sampled values
  std::vector<std::int64_t> final_gaps;

  double gap_time_average(int i) const;  // 1-based gap index
  double average_queue_length() const;   // (1/n) sum_k time-avg X_{(k)}
  double imbalance() const;              // time-avg X_{(n)} - X_{(1)}
  double ranked_time_average(int k) const;
};

double fraction_time_tied(const EventLog& log);

// Statistically exact event-driven simulation in ranked coordinates under any
// policy. initial holds the starting gaps (cumulative sums give the ranked
// queue lengths).
EventLog simulate(const SystemParams& params, const GapVector& initial,
                  const RecorderConfig& recorder);

// Starting states.
GapVector zero_start(int n);
GapVector stationary_gaps_pauses(int n, double a, double b, CounterRng& rng);  // pi_n sample
GapVector stationary_gaps_rr(int n, double a, double b, CounterRng& rng);  // sorted iid geometric

// Plain labeled-queue simulator (one counter per server, no ranked state).
// Reference implementation for audits at small n, and the honest estimator of
// per-queue means under RR, where per-label time averages are iid.
struct LabeledLog {
  double horizon = 0.0;
  std::int64_t event_count = 0;
  std::vector<double> queue_occupation;  // integral of X_i dt per label
  std::vector<std::int64_t> final_lengths;
};

LabeledLog simulate_labeled(const SystemParams& params, const std::vector<std::int64_t>& initial);

}  // namespace mjsq
