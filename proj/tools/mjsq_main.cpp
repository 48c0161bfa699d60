// Command-line experiment runner: exact analysis tables, CTMC simulation
// summaries, reflected-Atlas diagnostics, policy comparisons, and manifest
// verification. Exit codes: 0 success, 2 configuration error, 3 infeasible
// parameters, 4 failed check flags.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mjsq/atlas.hpp"
#include "mjsq/core.hpp"
#include "mjsq/ctmc.hpp"
#include "mjsq/experiment.hpp"
#include "mjsq/jackson.hpp"
#include "mjsq/stats.hpp"

namespace {

using mjsq::TableWriter;

std::string default_out_dir() {
  const char* env = std::getenv("MJSQ_OUT_DIR");
  return env && *env ? env : "out";
}

std::string fmt(double v) { return TableWriter::fmt(v); }

struct CommonOut {
  std::string out_dir = default_out_dir();
  std::string id;
};

mjsq::Manifest start_manifest(const CommonOut& common,
                              const std::map<std::string, std::string>& config,
                              std::uint64_t seed) {
  mjsq::Manifest m;
  m.experiment_id = common.id;
  m.config = config;
  m.config_hash = mjsq::config_hash(config);
  m.seed = seed;
  m.created_utc = mjsq::utc_now_iso8601();
  return m;
}

int run_exact(const CommonOut& common, int n, double a, double b, bool moments, int kmax,
              bool jackson, std::vector<double> lambda, std::vector<double> mu, bool limit,
              int m_len) {
  std::map<std::string, std::string> cfg = {
      {"cmd", "exact"},         {"n", std::to_string(n)},     {"a", fmt(a)},
      {"b", fmt(b)},            {"moments", moments ? "1" : "0"}, {"k", std::to_string(kmax)},
      {"limit", limit ? "1" : "0"}, {"m", std::to_string(m_len)}};
  mjsq::Manifest manifest = start_manifest(common, cfg, 0);

  if (moments) {
    const mjsq::ExactMoments em = mjsq::exact_moments(n, a, b, kmax);
    TableWriter t({"metric", "k", "value", "predicted", "ratio"});
    for (int k = 1; k <= kmax; ++k) {
      const double pred = mjsq::corstat_predictions(n, a, b, k).ranked_k;
      t.add_row({"ranked_mean", std::to_string(k), fmt(em.ranked_mean[k - 1]), fmt(pred),
                 fmt(em.ranked_mean[k - 1] / pred)});
    }
    const auto cp = mjsq::corstat_predictions(n, a, b, 1);
    t.add_row({"imbalance", "", fmt(em.imbalance), fmt(cp.imbalance),
               fmt(em.imbalance / cp.imbalance)});
    t.add_row({"average_queue_length", "", fmt(em.average), fmt(cp.average),
               fmt(em.average / cp.average)});
    t.write_csv(common.out_dir, common.id + ".moments.csv", manifest);
    std::cout << t.csv();
  }
  if (jackson) {
    mjsq::JacksonSpec spec;
    spec.k = static_cast<int>(lambda.size());
    spec.lambda = lambda;
    spec.mu = mu;
    const auto theta_cf = mjsq::closed_form_theta(spec);
    const auto theta_ls = mjsq::solve_traffic(spec);
    const auto rho = mjsq::traffic_intensities(spec);
    TableWriter t({"station", "lambda", "mu", "theta_closed_form", "theta_linear_solve", "rho"});
    for (int i = 0; i < spec.k; ++i)
      t.add_row({std::to_string(i + 1), fmt(spec.lambda[i]), fmt(spec.mu[i]), fmt(theta_cf[i]),
                 fmt(theta_ls[i]), fmt(rho[i])});
    t.write_csv(common.out_dir, common.id + ".jackson.csv", manifest);
    std::cout << t.csv();
  }
  if (limit) {
    const mjsq::LimitLaw law = mjsq::limit_mu(a, b, m_len);
    TableWriter t({"coordinate", "rate", "mean"});
    for (int i = 1; i <= m_len; ++i)
      t.add_row({std::to_string(i), fmt(law.rate(i)), fmt(law.mean(i))});
    t.write_csv(common.out_dir, common.id + ".limit.csv", manifest);
    std::cout << t.csv();
  }
  mjsq::write_manifest(common.out_dir, manifest);
  return 0;
}

int run_simulate(const CommonOut& common, const std::string& policy, int n, double a, double b,
                 std::uint64_t seed, double horizon, int reps, const std::string& start,
                 int ranked_k, int batches, int gap1_samples, int tie_scope, bool ndjson) {
  std::map<std::string, std::string> cfg = {
      {"cmd", "simulate"},  {"policy", policy},
      {"n", std::to_string(n)}, {"a", fmt(a)},
      {"b", fmt(b)},        {"seed", std::to_string(seed)},
      {"horizon", fmt(horizon)}, {"reps", std::to_string(reps)},
      {"start", start},     {"ranked_k", std::to_string(ranked_k)},
      {"batches", std::to_string(batches)}, {"gap1_samples", std::to_string(gap1_samples)},
      {"tie_scope", std::to_string(tie_scope)}};
  mjsq::Manifest manifest = start_manifest(common, cfg, seed);

  mjsq::SystemParams params;
  params.n = n;
  params.a = a;
  params.b = b;
  params.policy = mjsq::policy_from_name(policy);
  params.horizon = horizon;
  params.validate();

  const int kk = std::min(ranked_k, n);
  TableWriter t({"rep", "events", "elapsed", "fraction_time_tied", "shortest_mean",
                 "average_queue_length", "imbalance", "gap", "gap_time_average",
                 "exact_gap_mean"});
  const bool pauses_exact = params.policy == mjsq::Policy::MjsqPauses && a > b && b > 0.0;
  std::string nd;
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t stream = mjsq::derive_stream(seed, r);
    mjsq::CounterRng init_rng(mjsq::derive_stream(stream, 0));
    params.seed = mjsq::derive_stream(stream, 1);
    mjsq::GapVector init;
    if (start == "zero") {
      init = mjsq::zero_start(n);
    } else if (start == "stationary") {
      init = params.policy == mjsq::Policy::Rr
                 ? mjsq::stationary_gaps_rr(n, a, b, init_rng)
                 : mjsq::stationary_gaps_pauses(n, a, b, init_rng);
    } else {
      throw CLI::ValidationError("--start must be zero or stationary");
    }
    mjsq::RecorderConfig rec;
    rec.batches = batches;
    rec.gap1_samples = gap1_samples;
    rec.tie_scope_k = tie_scope;
    const mjsq::EventLog log = mjsq::simulate(params, init, rec);
    for (int g = 1; g <= kk; ++g) {
      const double exact =
          pauses_exact ? mjsq::pi_n(n, a, b).mean(g) : 0.0;
      t.add_row({std::to_string(r), std::to_string(log.event_count), fmt(log.elapsed),
                 fmt(mjsq::fraction_time_tied(log)), fmt(log.gap_time_average(1)),
                 fmt(log.average_queue_length()), fmt(log.imbalance()), std::to_string(g),
                 fmt(log.gap_time_average(g)), fmt(exact)});
    }
    if (ndjson) {
      nlohmann::json rec_json;
      rec_json["schema_version"] = mjsq::kSchemaVersion;
      rec_json["rep"] = r;
      rec_json["events"] = log.event_count;
      rec_json["elapsed"] = log.elapsed;
      rec_json["fraction_time_tied"] = mjsq::fraction_time_tied(log);
      rec_json["average_queue_length"] = log.average_queue_length();
      nd += rec_json.dump() + "\n";
    }
  }
  t.write_csv(common.out_dir, common.id + ".simulate.csv", manifest);
  if (ndjson) mjsq::write_text_artifact(common.out_dir, common.id + ".records.ndjson", nd, manifest);
  std::cout << t.csv();
  mjsq::write_manifest(common.out_dir, manifest);
  return 0;
}

int run_atlas(const CommonOut& common, int N, double a, double b, double dt, double T, int reps,
              int first_k, std::uint64_t seed, bool negative_control, bool dual_check,
              std::vector<double> dual_dts, int dual_paths, int threads) {
  std::map<std::string, std::string> cfg = {
      {"cmd", "atlas"},   {"N", std::to_string(N)},     {"a", fmt(a)},
      {"b", fmt(b)},      {"dt", fmt(dt)},              {"T", fmt(T)},
      {"reps", std::to_string(reps)}, {"k", std::to_string(first_k)},
      {"seed", std::to_string(seed)}, {"negative_control", negative_control ? "1" : "0"},
      {"dual_check", dual_check ? "1" : "0"}};
  mjsq::Manifest manifest = start_manifest(common, cfg, seed);
  bool any_fail = false;

  if (!dual_check) {
    mjsq::AtlasConfig config;
    config.N = N;
    config.delta = b;
    config.dt = dt;
    config.T = T;
    mjsq::LimitLaw target = mjsq::limit_mu(a, b, N);
    if (negative_control) {
      // Deliberately wrong first coordinate: Exp(a) instead of Exp(a-b).
      std::vector<double> rates(N, a);
      target = mjsq::LimitLaw(rates);
    }
    const mjsq::StationarityReport rep =
        mjsq::stationarity_diagnostic(config, target, first_k, reps, seed, threads);
    TableWriter t({"coordinate", "ks_end_vs_target", "p_end", "ks_mid_vs_target", "p_mid",
                   "ks_mid_vs_end", "p_between", "pass_at_0.05"});
    for (int i = 0; i < first_k; ++i) {
      const bool pass = rep.ks_end_vs_target[i] <= 0.05 && rep.ks_mid_vs_end[i] <= 0.05;
      any_fail = any_fail || !pass;
      t.add_row({std::to_string(i + 1), fmt(rep.ks_end_vs_target[i]), fmt(rep.p_end_vs_target[i]),
                 fmt(rep.ks_mid_vs_target[i]), fmt(rep.p_mid_vs_target[i]),
                 fmt(rep.ks_mid_vs_end[i]), fmt(rep.p_mid_vs_end[i]), pass ? "1" : "0"});
    }
    t.write_csv(common.out_dir, common.id + ".atlas_ks.csv", manifest);
    std::cout << t.csv();
  } else {
    TableWriter t({"dt", "paths", "mean_sup_gap_discrepancy"});
    for (double d : dual_dts) {
      double acc = 0.0;
      for (int p = 0; p < dual_paths; ++p) {
        mjsq::AtlasConfig config;
        config.N = N;
        config.delta = b;
        config.dt = d;
        config.T = T;
        config.assign_noise_by_rank = true;
        mjsq::CounterRng init_rng(mjsq::derive_stream(seed, 1000 + p));
        mjsq::LimitLaw start_law = mjsq::limit_mu(a, b, N);
        std::vector<double> x0 = start_law.sample_ranked(init_rng);
        std::vector<double> record;
        const int steps = config.steps();
        for (int s = 0; s <= steps; s += std::max(1, steps / 100)) record.push_back(s * d);
        mjsq::CounterRng rng_a(mjsq::derive_stream(seed, p));
        mjsq::CounterRng rng_b(mjsq::derive_stream(seed, p));
        const mjsq::PathBundle pa = mjsq::simulate_unranked(config, x0, record, rng_a);
        const mjsq::PathBundle pb = mjsq::simulate_gaps(config, x0, record, rng_b);
        double sup = 0.0;
        for (std::size_t s = 0; s < pa.gap_paths.size(); ++s)
          for (int i = 0; i < N; ++i)
            sup = std::max(sup, std::fabs(pa.gap_paths[s][i] - pb.gap_paths[s][i]));
        acc += sup;
      }
      t.add_row({fmt(d), std::to_string(dual_paths), fmt(acc / dual_paths)});
    }
    t.write_csv(common.out_dir, common.id + ".atlas_dual.csv", manifest);
    std::cout << t.csv();
  }
  mjsq::write_manifest(common.out_dir, manifest);
  return any_fail ? 4 : 0;
}

int run_compare(const CommonOut& common, std::vector<std::string> policies, std::vector<int> ns,
                double a, double b, double horizon, int reps, int ranked_k, int d,
                std::uint64_t seed, int threads) {
  std::map<std::string, std::string> cfg = {{"cmd", "compare"},
                                            {"a", fmt(a)},
                                            {"b", fmt(b)},
                                            {"horizon", fmt(horizon)},
                                            {"reps", std::to_string(reps)},
                                            {"ranked_k", std::to_string(ranked_k)},
                                            {"d", std::to_string(d)},
                                            {"seed", std::to_string(seed)}};
  {
    std::string ps, nss;
    for (const auto& p : policies) ps += (ps.empty() ? "" : ",") + p;
    for (int n : ns) nss += (nss.empty() ? "" : ",") + std::to_string(n);
    cfg["policies"] = ps;
    cfg["n"] = nss;
  }
  mjsq::Manifest manifest = start_manifest(common, cfg, seed);

  mjsq::CompareConfig config;
  for (const auto& p : policies) config.policies.push_back(mjsq::policy_from_name(p));
  config.n_values = ns;
  config.a = a;
  config.b = b;
  config.horizon = horizon;
  config.replications = reps;
  config.ranked_k = ranked_k;
  config.jsq_d = d;
  config.seed = seed;
  config.threads = threads;
  const mjsq::ComparisonReport report = mjsq::compare_policies(config);

  TableWriter t({"policy", "n", "metric", "estimate", "ci_half_width", "prediction_available",
                 "predicted", "ratio"});
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    t.add_row({row.policy, std::to_string(row.n), row.metric, fmt(row.estimate), fmt(row.ci_half),
               row.has_prediction ? "1" : "not_available", fmt(row.predicted), fmt(row.ratio)});
    jrows.push_back({{"policy", row.policy},
                     {"n", row.n},
                     {"metric", row.metric},
                     {"estimate", row.estimate},
                     {"ci_half_width", row.ci_half},
                     {"prediction_available", row.has_prediction},
                     {"predicted", row.predicted},
                     {"ratio", row.ratio}});
  }
  nlohmann::json j;
  j["schema_version"] = mjsq::kSchemaVersion;
  j["a"] = a;
  j["b"] = b;
  j["horizon"] = horizon;
  j["replications"] = reps;
  j["rows"] = jrows;
  t.write_csv(common.out_dir, common.id + ".compare.csv", manifest);
  mjsq::write_text_artifact(common.out_dir, common.id + ".compare.json", j.dump(2) + "\n",
                            manifest);
  std::cout << t.csv();
  mjsq::write_manifest(common.out_dir, manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MJSQ heavy-traffic load-balancing toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; CLI flags override file values");
  app.allow_config_extras(false);

  CommonOut common;

  // exact
  auto* exact = app.add_subcommand("exact", "Exact stationary analysis tables");
  int ex_n = 100, ex_k = 5, ex_m = 5;
  double ex_a = 2.0, ex_b = 1.0;
  bool ex_moments = false, ex_limit = false;
  std::vector<double> ex_lambda, ex_mu;
  exact->add_option("--n", ex_n, "system size");
  exact->add_option("--a", ex_a, "slack parameter a");
  exact->add_option("--b", ex_b, "bonus stream intensity b");
  exact->add_flag("--moments", ex_moments, "emit exact stationary moments and corstat ratios");
  exact->add_option("--k", ex_k, "ranked moments up to k");
  exact->add_option("--lambda", ex_lambda, "Jackson per-station arrival rates")->delimiter(',');
  exact->add_option("--mu", ex_mu, "Jackson per-station service rates")->delimiter(',');
  exact->add_flag("--limit", ex_limit, "emit the limit law mu_{a,b}");
  exact->add_option("--m", ex_m, "limit law length");
  exact->add_option("--out", common.out_dir, "output directory (env MJSQ_OUT_DIR)");
  std::string ex_id = "exact";
  exact->add_option("--id", ex_id, "experiment id");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Event-driven CTMC simulation summaries");
  std::string s_policy = "mjsq_pauses", s_start = "stationary", s_id = "simulate";
  int s_n = 10, s_reps = 1, s_ranked_k = 3, s_batches = 32, s_gap1 = 0, s_tie_scope = 0;
  double s_a = 2.0, s_b = 1.0, s_horizon = 100.0;
  std::uint64_t s_seed = 1;
  bool s_ndjson = false;
  sim->add_option("--policy", s_policy, "mjsq_original|mjsq_pauses|rr|jsq|jsq_d");
  sim->add_option("--n", s_n, "system size");
  sim->add_option("--a", s_a, "slack parameter a");
  sim->add_option("--b", s_b, "bonus stream intensity b");
  sim->add_option("--seed", s_seed, "rng seed");
  sim->add_option("--horizon", s_horizon, "simulated time horizon");
  sim->add_option("--reps", s_reps, "replications");
  sim->add_option("--start", s_start, "zero|stationary");
  sim->add_option("--ranked-k", s_ranked_k, "report gap means up to k");
  sim->add_option("--batches", s_batches, "occupation batches");
  sim->add_option("--gap1-samples", s_gap1, "sampled gap-1 epochs");
  sim->add_option("--tie-scope", s_tie_scope, "count ties among first k ranks (0 = all)");
  sim->add_flag("--ndjson", s_ndjson, "also write per-replication NDJSON records");
  sim->add_option("--out", common.out_dir, "output directory");
  sim->add_option("--id", s_id, "experiment id");

  // atlas
  auto* atl = app.add_subcommand("atlas", "Reflected Atlas stationarity diagnostics");
  int at_N = 30, at_reps = 2000, at_k = 3, at_paths = 50, at_threads = 0;
  double at_a = 2.0, at_b = 1.0, at_dt = 1e-4, at_T = 1.0;
  std::uint64_t at_seed = 1;
  bool at_neg = false, at_dual = false;
  std::vector<double> at_dual_dts = {1e-3, 1e-4, 1e-5};
  std::string at_id = "atlas";
  atl->add_option("--N", at_N, "truncation size");
  atl->add_option("--a", at_a, "limit-law parameter a");
  atl->add_option("--b", at_b, "drift b");
  atl->add_option("--dt", at_dt, "Euler step");
  atl->add_option("--T", at_T, "horizon");
  atl->add_option("--reps", at_reps, "replications");
  atl->add_option("--k", at_k, "first k gap coordinates");
  atl->add_option("--seed", at_seed, "rng seed");
  atl->add_flag("--negative-control", at_neg, "use a wrong target in coordinate 1");
  atl->add_flag("--dual-check", at_dual, "dual-representation discrepancy across dt");
  atl->add_option("--dual-dt", at_dual_dts, "dt values for --dual-check")->delimiter(',');
  atl->add_option("--paths", at_paths, "paths per dt for --dual-check");
  atl->add_option("--threads", at_threads, "worker threads (0 = hardware)");
  atl->add_option("--out", common.out_dir, "output directory");
  atl->add_option("--id", at_id, "experiment id");

  // compare
  auto* cmp = app.add_subcommand("compare", "Multi-policy steady-state comparison");
  std::vector<std::string> c_policies = {"mjsq_pauses", "mjsq_original", "rr", "jsq"};
  std::vector<int> c_ns = {100};
  double c_a = 2.0, c_b = 1.0, c_horizon = 10.0;
  int c_reps = 4, c_k = 3, c_d = 2, c_threads = 0;
  std::uint64_t c_seed = 1;
  std::string c_id = "compare";
  cmp->add_option("--policies", c_policies, "policy names")->delimiter(',');
  cmp->add_option("--n", c_ns, "system sizes")->delimiter(',');
  cmp->add_option("--a", c_a, "slack parameter a");
  cmp->add_option("--b", c_b, "bonus stream intensity b");
  cmp->add_option("--horizon", c_horizon, "simulated time horizon");
  cmp->add_option("--reps", c_reps, "replications per cell");
  cmp->add_option("--k", c_k, "ranked means up to k");
  cmp->add_option("--d", c_d, "d for jsq_d");
  cmp->add_option("--seed", c_seed, "rng seed");
  cmp->add_option("--threads", c_threads, "worker threads (0 = hardware)");
  cmp->add_option("--out", common.out_dir, "output directory");
  cmp->add_option("--id", c_id, "experiment id");

  // verify-manifest
  auto* ver = app.add_subcommand("verify-manifest", "Re-check artifact digests");
  std::string v_path;
  ver->add_option("--manifest", v_path, "manifest path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (exact->parsed()) {
      common.id = ex_id;
      const bool jackson = !ex_lambda.empty() || !ex_mu.empty();
      if (jackson && ex_lambda.size() != ex_mu.size())
        throw CLI::ValidationError("--lambda and --mu must have equal length");
      if (!ex_moments && !jackson && !ex_limit)
        throw CLI::ValidationError("exact: pass --moments, --lambda/--mu, or --limit");
      return run_exact(common, ex_n, ex_a, ex_b, ex_moments, ex_k, jackson, ex_lambda, ex_mu,
                       ex_limit, ex_m);
    }
    if (sim->parsed()) {
      common.id = s_id;
      return run_simulate(common, s_policy, s_n, s_a, s_b, s_seed, s_horizon, s_reps, s_start,
                          s_ranked_k, s_batches, s_gap1, s_tie_scope, s_ndjson);
    }
    if (atl->parsed()) {
      common.id = at_id;
      return run_atlas(common, at_N, at_a, at_b, at_dt, at_T, at_reps, at_k, at_seed, at_neg,
                       at_dual, at_dual_dts, at_paths, at_threads);
    }
    if (cmp->parsed()) {
      common.id = c_id;
      return run_compare(common, c_policies, c_ns, c_a, c_b, c_horizon, c_reps, c_k, c_d, c_seed,
                         c_threads);
    }
    if (ver->parsed()) {
      const auto problems = mjsq::verify_manifest(v_path);
      for (const auto& p : problems) std::cerr << "mismatch: " << p << "\n";
      if (problems.empty()) {
        std::cout << "manifest ok\n";
        return 0;
      }
      return 4;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "infeasible parameters: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "infeasible parameters: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
