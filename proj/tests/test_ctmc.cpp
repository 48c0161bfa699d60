#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "mjsq/ctmc.hpp"
#include "mjsq/jackson.hpp"
#include "mjsq/stats.hpp"
#include "test_support.hpp"

using namespace mjsq;

namespace {

SystemParams base_params(Policy policy, int n, double a = 2.0, double b = 1.0) {
  SystemParams p;
  p.n = n;
  p.a = a;
  p.b = b;
  p.policy = policy;
  p.horizon = 1.0;
  p.seed = 99;
  return p;
}

std::vector<std::vector<std::int64_t>> sorted_states(int n, std::int64_t cap) {
  std::vector<std::vector<std::int64_t>> out;
  for (auto& s : mjsq::testing::enumerate_states(n, cap))
    if (std::is_sorted(s.begin(), s.end())) out.push_back(s);
  return out;
}

}  // namespace

TEST_CASE("tie rules: arrivals credit the top, departures debit the bottom") {
  std::vector<std::int64_t> y = {1, 1, 1};
  apply_arrival_original(y, 1);
  CHECK(y == std::vector<std::int64_t>{1, 1, 2});

  y = {0, 2, 5};
  apply_arrival_original(y, 2);
  CHECK(y == std::vector<std::int64_t>{0, 3, 5});

  y = {2, 2, 2};
  apply_departure_original(y, 3);
  CHECK(y == std::vector<std::int64_t>{1, 2, 2});

  y = {0, 1, 4};
  apply_departure_original(y, 2);
  CHECK(y == std::vector<std::int64_t>{0, 0, 4});
}

TEST_CASE("tie rules: exhaustive small-state enumeration") {
  for (int n = 1; n <= 4; ++n) {
    for (const auto& state : sorted_states(n, 3)) {
      for (int rank = 1; rank <= n; ++rank) {
        // Arrival: same multiset with one copy of state[rank-1] incremented.
        auto got = state;
        apply_arrival_original(got, rank);
        auto want = state;
        want[rank - 1] += 1;
        std::sort(want.begin(), want.end());
        CHECK(std::is_sorted(got.begin(), got.end()));
        CHECK(got == want);

        if (state[rank - 1] > 0) {
          got = state;
          apply_departure_original(got, rank);
          want = state;
          want[rank - 1] -= 1;
          std::sort(want.begin(), want.end());
          CHECK(std::is_sorted(got.begin(), got.end()));
          CHECK(got == want);
        }
      }
    }
  }
}

TEST_CASE("rates_pauses: indicator structure") {
  const auto p = base_params(Policy::MjsqPauses, 3);
  const auto t1 = rates_pauses({1, 1, 3}, p);
  CHECK(t1.arrival[0] == 0.0);
  CHECK(t1.arrival[1] == doctest::Approx(p.base_arrival_rate()));
  CHECK(t1.arrival[2] == doctest::Approx(p.base_arrival_rate()));
  CHECK(t1.service[0] == doctest::Approx(3.0));
  CHECK(t1.service[1] == 0.0);
  CHECK(t1.service[2] == doctest::Approx(3.0));

  const auto t2 = rates_pauses({0, 1, 2}, p);
  CHECK(t2.arrival[0] == doctest::Approx(p.base_arrival_rate() + p.bonus_rate()));
  CHECK(t2.arrival[1] == doctest::Approx(p.base_arrival_rate()));
  CHECK(t2.arrival[2] == doctest::Approx(p.base_arrival_rate()));
  CHECK(t2.service[0] == 0.0);
  CHECK(t2.service[1] == doctest::Approx(3.0));
  CHECK(t2.service[2] == doctest::Approx(3.0));
}

TEST_CASE("rates_pauses totals match the Jackson gap chain on every small state") {
  const auto p = base_params(Policy::MjsqPauses, 3);
  const double gamma = p.base_arrival_rate();
  for (const auto& state : sorted_states(3, 3)) {
    std::vector<std::int64_t> u = {state[0], state[1] - state[0], state[2] - state[1]};
    double jackson_total = gamma;  // external arrivals enter at station n
    if (u[0] > 0) jackson_total += 3.0;                           // mubar_1 = n
    if (u[1] > 0) jackson_total += gamma + p.bonus_rate() + 3.0;  // mubar_2 = gamma_1 + n
    if (u[2] > 0) jackson_total += gamma + 3.0;                   // mubar_3 = gamma_2 + n
    CHECK(rates_pauses(state, p).total() == doctest::Approx(jackson_total).epsilon(1e-12));
  }
}

TEST_CASE("route: JSQ variants and RR uniformity") {
  CounterRng rng(5);
  const std::vector<std::int64_t> state = {0, 1, 1, 2, 7, 7, 7, 9, 9, 12};
  CHECK(route(Policy::Jsq, state, 0, rng) == 1);
  for (int trial = 0; trial < 50; ++trial)
    CHECK(route(Policy::JsqD, state, 10, rng) == 1);

  std::map<std::int64_t, std::int64_t> counts;
  const int draws = 1'000'000;
  for (int i = 0; i < draws; ++i) counts[route(Policy::Rr, state, 0, rng) - 1] += 1;
  const auto res = chi2_gof(counts, [](std::int64_t v) { return v < 10 ? 0.1 : 0.0; }, 5.0);
  CHECK(res.p_value > 0.01);

  // JSQ(d) min-rank law: P(min = r) = (n - r) / C(n, 2) for d = 2, n = 10.
  std::map<int, int> mins;
  for (int i = 0; i < 200'000; ++i) mins[route(Policy::JsqD, state, 2, rng)] += 1;
  for (int r = 1; r <= 9; ++r) {
    const double expect = (10.0 - r) / 45.0;
    const double freq = mins[r] / 200'000.0;
    CHECK(std::fabs(freq - expect) < 4 * std::sqrt(expect * (1 - expect) / 200'000.0));
  }
}

TEST_CASE("simulate: M/M/1 oracle for n=1 RR") {
  SystemParams p = base_params(Policy::Rr, 1, 0.3, 0.1);
  p.horizon = 200'000.0;
  p.seed = 17;
  const double rho = 1.0 - (p.a - p.b);  // arrival 0.8, service 1
  const double exact_mean = rho / (1.0 - rho);

  CounterRng init(3);
  const GapVector start = stationary_gaps_rr(1, p.a, p.b, init);
  RecorderConfig rec;
  rec.batches = 32;
  const EventLog log = simulate(p, start, rec);

  std::vector<double> batch_means;
  for (std::size_t b = 0; b < log.batch_occupation.size(); ++b)
    batch_means.push_back(log.batch_occupation[b][0] / log.batch_length[b]);
  const auto ci = t_interval(batch_means);
  CHECK(std::fabs(ci.mean - exact_mean) < 3.0 * ci.half_width);
  CHECK(log.gap_time_average(1) == doctest::Approx(ci.mean).epsilon(1e-9));
}

TEST_CASE("simulate: uniformization oracle for the n=2 pauses chain") {
  const auto p0 = base_params(Policy::MjsqPauses, 2);
  const double t = 0.1;

  // Analytic transient on the truncated gap space (mass beyond the cap is
  // negligible at this horizon).
  const std::int64_t cap = 12;
  const auto states = mjsq::testing::enumerate_states(2, cap);
  mjsq::testing::UniformizationOracle oracle(states, [&](const std::vector<std::int64_t>& u) {
    auto all = mjsq::testing::pauses_gap_transitions(u, p0);
    std::vector<std::pair<std::vector<std::int64_t>, double>> kept;
    for (auto& [next, rate] : all)
      if (*std::max_element(next.begin(), next.end()) <= cap) kept.emplace_back(next, rate);
    return kept;
  });
  const auto dist = oracle.transient({0, 0}, t);

  double exact_m1 = 0.0, exact_m2 = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    exact_m1 += static_cast<double>(states[i][0]) * dist[i];
    exact_m2 += static_cast<double>(states[i][1]) * dist[i];
  }

  const int reps = 100'000;
  double m1 = 0.0, m2 = 0.0, q1 = 0.0, q2 = 0.0;
  std::map<std::vector<std::int64_t>, int> hits;
  for (int r = 0; r < reps; ++r) {
    SystemParams p = p0;
    p.horizon = t;
    p.seed = derive_stream(1234, r);
    const EventLog log = simulate(p, zero_start(2), {});
    const double u1 = static_cast<double>(log.final_gaps[0]);
    const double u2 = static_cast<double>(log.final_gaps[1]);
    m1 += u1;
    m2 += u2;
    q1 += u1 * u1;
    q2 += u2 * u2;
    hits[log.final_gaps] += 1;
  }
  m1 /= reps;
  m2 /= reps;
  const double se1 = std::sqrt((q1 / reps - m1 * m1) / reps);
  const double se2 = std::sqrt((q2 / reps - m2 * m2) / reps);
  CHECK(std::fabs(m1 - exact_m1) < 3.5 * se1);
  CHECK(std::fabs(m2 - exact_m2) < 3.5 * se2);

  for (const auto& probe :
       {std::vector<std::int64_t>{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0}}) {
    const double exact = dist[oracle.state_index(probe)];
    const double freq = static_cast<double>(hits.count(probe) ? hits.at(probe) : 0) / reps;
    const double se = std::sqrt(std::max(exact * (1 - exact), 1e-12) / reps);
    CHECK(std::fabs(freq - exact) < 4 * se);
  }
}

TEST_CASE("simulate: first-event distribution matches the generator, n=3") {
  // Empirical first-jump law against the analytic selection probabilities for
  // both MJSQ dynamics on states with ties, zeros, and a bonus block.
  const int reps = 60'000;
  for (Policy policy : {Policy::MjsqOriginal, Policy::MjsqPauses}) {
    for (const std::vector<std::int64_t>& start : {std::vector<std::int64_t>{1, 1, 3},
                                                   {0, 0, 2},
                                                   {2, 2, 2},
                                                   {0, 1, 1},
                                                   {0, 3, 3}}) {
      auto p = base_params(policy, 3);
      const double gamma = p.base_arrival_rate();
      const double bonus = p.bonus_rate();
      GapVector init;
      init.gaps = {start[0], start[1] - start[0], start[2] - start[1]};

      auto block_top_of = [&](int i) {
        int j = i;
        while (j + 1 < 3 && start[j + 1] == start[j]) ++j;
        return j;
      };
      auto block_bottom_of = [&](int i) {
        int j = i;
        while (j > 0 && start[j - 1] == start[j]) --j;
        return j;
      };
      std::map<std::pair<int, int>, double> want;
      double total = 0.0;
      if (policy == Policy::MjsqOriginal) {
        const double arr = 3 * gamma + bonus;
        double svc = 0.0;
        for (int i = 0; i < 3; ++i)
          if (start[i] > 0) svc += 3.0;
        total = arr + svc;
        want[{block_top_of(0), +1}] += bonus / total;
        for (int i = 0; i < 3; ++i) want[{block_top_of(i), +1}] += gamma / total;
        for (int i = 0; i < 3; ++i)
          if (start[i] > 0) want[{block_bottom_of(i), -1}] += 3.0 / total;
      } else {
        const RateTable rt = rates_pauses(start, p);
        total = rt.total();
        for (int i = 0; i < 3; ++i) {
          if (rt.arrival[i] > 0) want[{i, +1}] += rt.arrival[i] / total;
          if (rt.service[i] > 0) want[{i, -1}] += rt.service[i] / total;
        }
      }

      std::map<std::pair<int, int>, int> got;
      for (int r = 0; r < reps; ++r) {
        p.seed = derive_stream(777 + static_cast<int>(policy), r);
        p.horizon = 1e9;  // stop on the event budget, not the clock
        RecorderConfig rec;
        rec.max_events = 1;
        const EventLog log = simulate(p, init, rec);
        std::vector<std::int64_t> after(3);
        std::int64_t acc = 0;
        for (int i = 0; i < 3; ++i) {
          acc += log.final_gaps[i];
          after[i] = acc;
        }
        int pos = -1, delta = 0;
        for (int i = 0; i < 3; ++i)
          if (after[i] != start[i]) {
            pos = i;
            delta = static_cast<int>(after[i] - start[i]);
          }
        REQUIRE(pos >= 0);
        got[{pos, delta}] += 1;
      }

      double freq_sum = 0.0;
      for (const auto& [key, prob] : want) {
        const double freq = static_cast<double>(got.count(key) ? got.at(key) : 0) / reps;
        freq_sum += freq;
        const double se = std::sqrt(prob * (1 - prob) / reps);
        CHECK(std::fabs(freq - prob) < 4.5 * se);
      }
      CHECK(freq_sum == doctest::Approx(1.0));  // no unexpected transitions
    }
  }
}

TEST_CASE("simulate: event count matches the exact stationary event rate") {
  const int n = 10;
  const double a = 2.0, b = 1.0;
  SystemParams p = base_params(Policy::MjsqPauses, n, a, b);
  p.horizon = 20'000.0;
  p.seed = 4242;

  const ProductFormLaw law = pi_n(n, a, b);
  double expect_blocks = n;  // n - sum_{i>=2} P(U_i = 0)
  for (int i = 2; i <= n; ++i) expect_blocks -= law.one_minus_rho(i);
  const double arr = expect_blocks * p.base_arrival_rate() + p.bonus_rate() * law.rho()[1];
  const double svc = n * (expect_blocks - law.one_minus_rho(1));
  const double rate = arr + svc;

  CounterRng init(1);
  const EventLog log = simulate(p, stationary_gaps_pauses(n, a, b, init), {});
  CHECK(static_cast<double>(log.event_count) / p.horizon ==
        doctest::Approx(rate).epsilon(0.01));
}

TEST_CASE("simulate: determinism and incremental-state audit") {
  SystemParams p = base_params(Policy::MjsqOriginal, 50);
  p.horizon = 5.0;
  p.seed = 31337;
  CounterRng init(9);
  const GapVector start = stationary_gaps_pauses(50, 2.0, 1.0, init);
  RecorderConfig rec;
  rec.batches = 4;
  rec.audit_interval = 1'000;
  const EventLog l1 = simulate(p, start, rec);
  const EventLog l2 = simulate(p, start, rec);
  CHECK(l1.event_count == l2.event_count);
  CHECK(l1.time_tied == l2.time_tied);
  CHECK(l1.gap_occupation == l2.gap_occupation);
  CHECK(l1.final_gaps == l2.final_gaps);

  SystemParams pp = p;
  pp.policy = Policy::MjsqPauses;
  CHECK_NOTHROW(simulate(pp, start, rec));
  pp.policy = Policy::JsqD;
  pp.d = 3;
  CHECK_NOTHROW(simulate(pp, start, rec));
  pp.policy = Policy::Jsq;
  CHECK_NOTHROW(simulate(pp, start, rec));
  pp.policy = Policy::Rr;
  CHECK_NOTHROW(simulate(pp, start, rec));
}

TEST_CASE("fraction_time_tied: n=1 zero; tied holding interval counted exactly") {
  SystemParams p1 = base_params(Policy::Rr, 1, 0.3, 0.1);
  p1.horizon = 100.0;
  const EventLog l1 = simulate(p1, zero_start(1), {});
  CHECK(fraction_time_tied(l1) == 0.0);

  // All queues equal: tied from t=0 until the first event; with a one-event
  // budget, time_tied equals the elapsed time exactly.
  SystemParams p3 = base_params(Policy::MjsqPauses, 3);
  p3.horizon = 1e9;
  p3.seed = 5;
  GapVector tied;
  tied.gaps = {5, 0, 0};
  RecorderConfig rec;
  rec.max_events = 1;
  const EventLog lt = simulate(p3, tied, rec);
  CHECK(lt.time_tied == doctest::Approx(lt.elapsed));

  GapVector spread;
  spread.gaps = {1, 2, 4};
  const EventLog ls = simulate(p3, spread, rec);
  CHECK(ls.time_tied == 0.0);
}

TEST_CASE("tie scope: any-tie saturates at stationarity, first-two-ranks scope does not") {
  const int n = 100;
  SystemParams p = base_params(Policy::MjsqPauses, n);
  p.horizon = 50.0;
  p.seed = 1;
  CounterRng init(2);
  const GapVector start = stationary_gaps_pauses(n, 2.0, 1.0, init);

  RecorderConfig all;
  all.tie_scope_k = 0;
  RecorderConfig two;
  two.tie_scope_k = 2;
  const double f_all = fraction_time_tied(simulate(p, start, all));
  const double f_two = fraction_time_tied(simulate(p, start, two));

  // Stationary no-tie probability is prod_{i>=2} rho_i, vanishing in n.
  const ProductFormLaw law = pi_n(n, 2.0, 1.0);
  double log_no_tie = 0.0;
  for (int i = 2; i <= n; ++i) log_no_tie += std::log(law.rho()[i - 1]);
  CHECK(1.0 - std::exp(log_no_tie) > 0.99);
  CHECK(f_all > 0.9);
  CHECK(f_two < 0.5);
  CHECK(f_two > 0.005);
}

TEST_CASE("labeled reference simulator agrees with the ranked one, n=6 original") {
  const int n = 6;
  const int reps = 24;
  std::vector<double> ranked_avg, labeled_avg;
  for (int r = 0; r < reps; ++r) {
    SystemParams p = base_params(Policy::MjsqOriginal, n);
    p.horizon = 200.0;
    p.seed = derive_stream(2025, r);
    const EventLog log = simulate(p, zero_start(n), {});
    ranked_avg.push_back(log.average_queue_length());

    SystemParams q = p;
    q.seed = derive_stream(6052, r);
    const LabeledLog ll = simulate_labeled(q, std::vector<std::int64_t>(n, 0));
    double acc = 0.0;
    for (double occ : ll.queue_occupation) acc += occ;
    labeled_avg.push_back(acc / (n * ll.horizon));
  }
  const auto ci_r = t_interval(ranked_avg);
  const auto ci_l = t_interval(labeled_avg);
  CHECK(std::fabs(ci_r.mean - ci_l.mean) < 1.2 * (ci_r.half_width + ci_l.half_width));
}

TEST_CASE("stationary start helpers produce valid gap vectors") {
  CounterRng rng(8);
  const GapVector g = stationary_gaps_pauses(50, 2.0, 1.0, rng);
  CHECK(g.gaps.size() == 50);
  for (auto v : g.gaps) CHECK(v >= 0);

  const GapVector r = stationary_gaps_rr(50, 2.0, 1.0, rng);
  const auto lengths = cumulative(r);
  CHECK(std::is_sorted(lengths.begin(), lengths.end()));

  CHECK(zero_start(4).gaps == std::vector<std::int64_t>{0, 0, 0, 0});
}

TEST_CASE("invalid configurations are rejected before simulating") {
  SystemParams p = base_params(Policy::JsqD, 4);
  p.d = 9;
  CHECK_THROWS_AS(simulate(p, zero_start(4), {}), std::invalid_argument);
  p.d = 2;
  GapVector wrong;
  wrong.gaps = {0, 0};
  CHECK_THROWS_AS(simulate(p, wrong, {}), std::invalid_argument);
  CHECK_THROWS_AS(simulate_labeled(base_params(Policy::MjsqPauses, 3), {0, 0, 0}),
                  std::invalid_argument);
}
