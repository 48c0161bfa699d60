#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "mjsq/atlas.hpp"
#include "mjsq/stats.hpp"

using namespace mjsq;

TEST_CASE("skorohod_1d: hand values and regulator complementarity") {
  CHECK(skorohod_1d({1.0, 0.5, 2.0}) == std::vector<double>{1.0, 0.5, 2.0});
  CHECK(skorohod_1d({0.0, -1.0, -0.5}) == std::vector<double>{0.0, 0.0, 0.5});
  CHECK_THROWS_AS(skorohod_1d({-0.1, 0.0}), std::invalid_argument);

  CounterRng rng(1);
  NormalSampler normal(rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f(500);
    f[0] = 0.2;
    for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] + 0.1 * normal();
    const auto g = skorohod_1d(f);
    double prev_reg = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(g[i] >= -1e-15);
      const double reg = g[i] - f[i];
      CHECK(reg >= prev_reg - 1e-15);            // regulator nondecreasing
      if (reg > prev_reg + 1e-15) CHECK(g[i] <= 1e-12);  // grows only at the boundary
      prev_reg = reg;
    }
  }
}

TEST_CASE("gap reflection matrix shape") {
  const Matrix r = gap_reflection_matrix(4);
  CHECK(r[0] == std::vector<double>{1.0, -0.5, 0.0, 0.0});
  CHECK(r[1] == std::vector<double>{-1.0, 1.0, -0.5, 0.0});
  CHECK(r[2] == std::vector<double>{0.0, -0.5, 1.0, -0.5});
  CHECK(r[3] == std::vector<double>{0.0, 0.0, -0.5, 1.0});
}

TEST_CASE("harrison_reiman_map: no reflection needed leaves the path unchanged") {
  const int T = 50;
  std::vector<std::vector<double>> psi(T, std::vector<double>(3));
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < 3; ++i) psi[t][i] = 0.5 + 0.01 * t * (i + 1);
  const auto out = harrison_reiman_map(gap_reflection_matrix(3), psi);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < 3; ++i) {
      CHECK(out.eta[t][i] == 0.0);
      CHECK(out.phi[t][i] == doctest::Approx(psi[t][i]));
    }
}

TEST_CASE("harrison_reiman_map: dimension 1 reduces to skorohod_1d") {
  CounterRng rng(2);
  NormalSampler normal(rng);
  std::vector<double> f(300);
  f[0] = 0.1;
  for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] + 0.2 * normal();
  std::vector<std::vector<double>> psi(f.size(), std::vector<double>(1));
  for (std::size_t i = 0; i < f.size(); ++i) psi[i][0] = f[i];
  const auto out = harrison_reiman_map({{1.0}}, psi);
  const auto ref = skorohod_1d(f);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(out.phi[i][0] == doctest::Approx(ref[i]).epsilon(1e-9));
}

TEST_CASE("harrison_reiman_map: N=2 linear drive, exact piecewise solution") {
  // psi_1 = 0.4 - 2t, psi_2 = 0.3. Coordinate 1 hits zero at t = 0.2; its
  // regulator (rate 2) drags coordinate 2 down at rate 2 until it hits zero at
  // t = 0.35; then both regulators run at rate 4.
  const double dt = 1e-3, T = 0.5;
  const int steps = static_cast<int>(T / dt);
  std::vector<std::vector<double>> psi(steps + 1, std::vector<double>(2));
  for (int s = 0; s <= steps; ++s) {
    psi[s][0] = 0.4 - 2.0 * s * dt;
    psi[s][1] = 0.3;
  }
  const auto out = harrison_reiman_map(gap_reflection_matrix(2), psi);

  auto at = [&](double t) { return static_cast<int>(std::llround(t / dt)); };
  CHECK(out.phi[at(0.1)][0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(out.eta[at(0.1)][0] == doctest::Approx(0.0));
  CHECK(out.phi[at(0.3)][0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(out.phi[at(0.3)][1] == doctest::Approx(0.1).epsilon(1e-5));
  CHECK(out.eta[at(0.3)][0] == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(out.phi[at(0.5)][0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(out.phi[at(0.5)][1] == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(out.eta[at(0.5)][0] == doctest::Approx(0.9).epsilon(1e-3));
  CHECK(out.eta[at(0.5)][1] == doctest::Approx(0.6).epsilon(1e-3));
}

TEST_CASE("harrison_reiman_map: stiff-spring penalization oracle, N=2") {
  // Same drive as above plus a wobble; the penalized ODE
  // phi' = psi' + R kappa max(0, -phi) converges to the Skorohod solution.
  const double dt = 1e-3, T = 0.5;
  const int steps = static_cast<int>(T / dt);
  std::vector<std::vector<double>> psi(steps + 1, std::vector<double>(2));
  for (int s = 0; s <= steps; ++s) {
    const double t = s * dt;
    psi[s][0] = 0.4 - 2.0 * t + 0.15 * std::sin(20.0 * t);
    psi[s][1] = 0.3 - 0.5 * t;
  }
  const auto out = harrison_reiman_map(gap_reflection_matrix(2), psi);

  const double kappa = 2e4;
  const double h = 5e-7;
  const int sub = static_cast<int>(dt / h);
  std::vector<double> phi = {psi[0][0], psi[0][1]};
  const Matrix r = gap_reflection_matrix(2);
  int probe = 0;
  for (int s = 0; s < steps; ++s) {
    const double d0 = (psi[s + 1][0] - psi[s][0]) / dt;
    const double d1 = (psi[s + 1][1] - psi[s][1]) / dt;
    for (int q = 0; q < sub; ++q) {
      const double push0 = kappa * std::max(0.0, -phi[0]);
      const double push1 = kappa * std::max(0.0, -phi[1]);
      const double f0 = d0 + r[0][0] * push0 + r[0][1] * push1;
      const double f1 = d1 + r[1][0] * push0 + r[1][1] * push1;
      phi[0] += f0 * h;
      phi[1] += f1 * h;
    }
    ++probe;
    if (probe % 100 == 0) {
      CHECK(std::fabs(std::max(phi[0], 0.0) - out.phi[s + 1][0]) < 1e-3);
      CHECK(std::fabs(std::max(phi[1], 0.0) - out.phi[s + 1][1]) < 1e-3);
    }
  }
}

TEST_CASE("simulate_unranked: reflected Brownian motion mean at T") {
  AtlasConfig config;
  config.N = 1;
  config.delta = 0.0;
  config.dt = 1e-4;
  config.T = 1.0;
  const int reps = 10'000;
  double mean = 0.0, sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    CounterRng rng(derive_stream(11, r));
    const PathBundle p = simulate_unranked(config, {0.0}, {1.0}, rng);
    const double v = p.ranked_paths.back()[0];
    mean += v;
    sq += v * v;
  }
  mean /= reps;
  const double se = std::sqrt((sq / reps - mean * mean) / reps);
  const double exact = 2.0 * std::sqrt(1.0 / 3.14159265358979323846);  // E|N(0,2)|
  CHECK(std::fabs(mean - exact) < 3.0 * se + 0.59 * std::sqrt(2.0 * config.dt));
}

TEST_CASE("simulate_unranked: free increments have variance 2 dt") {
  AtlasConfig config;
  config.N = 1;
  config.delta = 0.0;
  config.dt = 1e-3;
  config.T = 1.0;
  CounterRng rng(12);
  std::vector<double> record;
  for (int i = 0; i <= 1000; ++i) record.push_back(i * config.dt);
  const PathBundle p = simulate_unranked(config, {1000.0}, record, rng);
  std::vector<double> incs;
  for (std::size_t i = 1; i < p.ranked_paths.size(); ++i)
    incs.push_back(p.ranked_paths[i][0] - p.ranked_paths[i - 1][0]);
  double m = 0.0, v = 0.0;
  for (double x : incs) m += x;
  m /= incs.size();
  for (double x : incs) v += (x - m) * (x - m);
  v /= (incs.size() - 1);
  const double se = 2.0 * config.dt * std::sqrt(2.0 / incs.size());
  CHECK(std::fabs(v - 2.0 * config.dt) < 4.0 * se);
}

TEST_CASE("simulate_unranked: only the lowest particle receives drift") {
  AtlasConfig config;
  config.N = 2;
  config.delta = 50.0;
  config.dt = 1e-3;
  config.T = 0.1;
  const int reps = 64;
  double low = 0.0, high = 0.0;
  for (int r = 0; r < reps; ++r) {
    CounterRng rng(derive_stream(13, r));
    const PathBundle p = simulate_unranked(config, {0.0, 1000.0}, {0.1}, rng);
    low += p.ranked_paths.back()[0];
    high += p.ranked_paths.back()[1];
  }
  low /= reps;
  high /= reps;
  CHECK(low == doctest::Approx(5.0).epsilon(0.1));       // delta * T plus noise
  CHECK(high == doctest::Approx(1000.0).epsilon(0.001));  // no drift up there
}

TEST_CASE("simulate_gaps: no boundary interaction means zero regulators") {
  AtlasConfig config;
  config.N = 3;
  config.delta = 0.0;
  config.dt = 1e-3;
  config.T = 0.05;
  CounterRng rng(14);
  const PathBundle p = simulate_gaps(config, {10.0, 20.0, 30.0}, {0.05}, rng);
  for (double l : p.local_time_totals) CHECK(l == 0.0);
  for (const auto& g : p.gap_paths)
    for (double v : g) CHECK(v > 0.0);
}

TEST_CASE("dual representation: shared noise, discrepancy shrinks with dt") {
  const std::vector<double> x0 = {0.5, 0.8, 1.2};
  double prev = 1e9;
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    AtlasConfig config;
    config.N = 3;
    config.delta = 1.0;
    config.dt = dt;
    config.T = 0.2;
    config.assign_noise_by_rank = true;
    std::vector<double> record;
    const int steps = config.steps();
    for (int s = 0; s <= steps; s += std::max(1, steps / 50)) record.push_back(s * dt);

    double acc = 0.0;
    const int paths = 12;
    for (int r = 0; r < paths; ++r) {
      CounterRng rng_a(derive_stream(15, r));
      CounterRng rng_b(derive_stream(15, r));
      const PathBundle pa = simulate_unranked(config, x0, record, rng_a);
      const PathBundle pb = simulate_gaps(config, x0, record, rng_b);
      REQUIRE(pa.gap_paths.size() == pb.gap_paths.size());
      double sup = 0.0;
      for (std::size_t s = 0; s < pa.gap_paths.size(); ++s)
        for (int i = 0; i < 3; ++i)
          sup = std::max(sup, std::fabs(pa.gap_paths[s][i] - pb.gap_paths[s][i]));
      acc += sup;
    }
    acc /= paths;
    CHECK(acc < prev);
    prev = acc;
  }
  CHECK(prev < 0.06);
}

TEST_CASE("stationarity diagnostic: target law accepted, wrong law rejected") {
  AtlasConfig config;
  config.N = 10;
  config.delta = 1.0;  // b
  config.dt = 1e-3;
  config.T = 0.3;
  const int reps = 600;

  const LimitLaw target = limit_mu(2.0, 1.0, 10);
  const auto rep = stationarity_diagnostic(config, target, 2, reps, 21);
  CHECK(rep.ks_end_vs_target[0] < 0.08);
  CHECK(rep.ks_end_vs_target[1] < 0.08);
  CHECK(rep.ks_mid_vs_end[0] < 0.08);

  // Negative control: Exp(a) in coordinate 1 instead of Exp(a-b).
  const LimitLaw wrong(std::vector<double>(10, 2.0));
  const auto bad = stationarity_diagnostic(config, wrong, 1, reps, 22);
  CHECK(bad.ks_end_vs_target[0] > 0.15);
  CHECK(bad.p_end_vs_target[0] < 0.01);
}

TEST_CASE("step-size diagnostic flags displacements beyond the mean gap") {
  AtlasConfig config;
  config.N = 3;
  config.delta = 0.0;
  config.dt = 0.05;
  config.T = 1.0;
  CounterRng rng(16);
  const PathBundle coarse = simulate_unranked(config, {0.001, 0.002, 0.003}, {1.0}, rng);
  CHECK(coarse.step_warning);

  config.dt = 1e-4;
  CounterRng rng2(16);
  const PathBundle fine = simulate_unranked(config, {10.0, 20.0, 30.0}, {1.0}, rng2);
  CHECK(!fine.step_warning);
}

TEST_CASE("atlas config validation") {
  AtlasConfig config;
  config.N = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.N = 2;
  config.dt = 2.0;
  config.T = 1.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.dt = 0.1;
  CHECK_NOTHROW(config.validate());
}
