#include "mjsq/ctmc.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mjsq/jackson.hpp"

namespace mjsq {

namespace {

// Fenwick tree over 0/1 activity indicators: point update, total count, and
// selection of the k-th active position.
class Fenwick {
 public:
  void init(int n) {
    n_ = n;
    tree_.assign(n + 1, 0);
    total_ = 0;
  }
  void add(int i, int delta) {
    total_ += delta;
    for (++i; i <= n_; i += i & -i) tree_[i] += delta;
  }
  int total() const { return total_; }
  // k in [0, total()): position of the (k+1)-th set indicator.
  int select(int k) const {
    int pos = 0, rem = k + 1;
    int mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      const int next = pos + mask;
      if (next <= n_ && tree_[next] < rem) {
        pos = next;
        rem -= tree_[next];
      }
    }
    return pos;  // 0-based
  }

 private:
  int n_ = 0;
  int total_ = 0;
  std::vector<int> tree_;
};

int block_top(const std::vector<std::int64_t>& y, int i) {
  return static_cast<int>(std::upper_bound(y.begin() + i, y.end(), y[i]) - y.begin()) - 1;
}

int block_bottom(const std::vector<std::int64_t>& y, int i) {
  return static_cast<int>(std::lower_bound(y.begin(), y.begin() + i + 1, y[i]) - y.begin());
}

}  // namespace

double RateTable::total() const {
  double acc = 0.0;
  for (double r : arrival) acc += r;
  for (double r : service) acc += r;
  return acc;
}

RateTable rates_pauses(const std::vector<std::int64_t>& ranked, const SystemParams& params) {
  const int n = params.n;
  if (static_cast<int>(ranked.size()) != n)
    throw std::invalid_argument("rates_pauses: state size mismatch");
  RateTable t;
  t.arrival.assign(n, 0.0);
  t.service.assign(n, 0.0);
  const double gamma = params.base_arrival_rate();
  for (int i = 0; i < n; ++i) {
    const bool arrival_active = (i == n - 1) || ranked[i] < ranked[i + 1];
    const bool service_active = (i == 0) ? ranked[0] > 0 : ranked[i] > ranked[i - 1];
    if (arrival_active) t.arrival[i] = gamma + (i == 0 ? params.bonus_rate() : 0.0);
    if (service_active) t.service[i] = static_cast<double>(n);
  }
  return t;
}

void apply_arrival_original(std::vector<std::int64_t>& ranked, int target_rank) {
  if (target_rank < 1 || target_rank > static_cast<int>(ranked.size()))
    throw std::invalid_argument("apply_arrival_original: rank out of range");
  ranked[block_top(ranked, target_rank - 1)] += 1;
}

void apply_departure_original(std::vector<std::int64_t>& ranked, int target_rank) {
  if (target_rank < 1 || target_rank > static_cast<int>(ranked.size()))
    throw std::invalid_argument("apply_departure_original: rank out of range");
  const int p = block_bottom(ranked, target_rank - 1);
  assert(ranked[p] > 0 && "departure from an empty queue must be gated by rates");
  ranked[p] -= 1;
}

int route(Policy policy, const std::vector<std::int64_t>& ranked, int d, CounterRng& rng) {
  const int n = static_cast<int>(ranked.size());
  switch (policy) {
    case Policy::Rr:
      return static_cast<int>(rng.uniform_int(n)) + 1;
    case Policy::Jsq:
      return 1;
    case Policy::JsqD: {
      if (d < 1 || d > n) throw std::invalid_argument("route: JSQ(d) requires 1 <= d <= n");
      // Floyd's d-subset sampling; the minimum sampled rank is the shortest of
      // the d queues with lexicographic tie-breaking.
      std::vector<int> chosen;
      chosen.reserve(d);
      int best = n;
      for (int i = n - d; i < n; ++i) {
        int j = static_cast<int>(rng.uniform_int(i + 1));
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) j = i;
        chosen.push_back(j);
        best = std::min(best, j);
      }
      return best + 1;
    }
    default:
      throw std::invalid_argument("route: MJSQ policies route through the rate table");
  }
}

double EventLog::gap_time_average(int i) const {
  return gap_occupation.at(i - 1) / elapsed;
}

double EventLog::ranked_time_average(int k) const {
  double acc = 0.0;
  for (int i = 1; i <= k; ++i) acc += gap_occupation.at(i - 1);
  return acc / elapsed;
}

double EventLog::average_queue_length() const {
  const int n = static_cast<int>(gap_occupation.size());
  double acc = 0.0;
  for (int i = 1; i <= n; ++i) acc += static_cast<double>(n - i + 1) * gap_occupation[i - 1];
  return acc / (static_cast<double>(n) * elapsed);
}

double EventLog::imbalance() const {
  double acc = 0.0;
  for (std::size_t i = 1; i < gap_occupation.size(); ++i) acc += gap_occupation[i];
  return acc / elapsed;
}

double fraction_time_tied(const EventLog& log) {
  return log.elapsed > 0.0 ? log.time_tied / log.elapsed : 0.0;
}

namespace {

class RankedSimulator {
 public:
  RankedSimulator(const SystemParams& params, const GapVector& initial,
                  const RecorderConfig& rec)
      : p_(params), rec_(rec), rng_(params.seed) {
    p_.validate();
    n_ = p_.n;
    if (static_cast<int>(initial.gaps.size()) != n_)
      throw std::invalid_argument("simulate: initial gap vector size mismatch");
    y_.resize(n_);
    std::int64_t acc = 0;
    for (int i = 0; i < n_; ++i) {
      if (initial.gaps[i] < 0) throw std::invalid_argument("simulate: negative gap");
      acc += initial.gaps[i];
      y_[i] = acc;
    }
    gamma_ = p_.base_arrival_rate();
    bonus_ = p_.bonus_rate();
    sampling_arrival_total_ = p_.total_arrival_rate();
    pauses_ = p_.policy == Policy::MjsqPauses;
    original_ = p_.policy == Policy::MjsqOriginal;

    zero_count_ = static_cast<int>(std::count(y_.begin(), y_.end(), 0));
    scope_pairs_ = rec_.tie_scope_k > 0 ? std::min(rec_.tie_scope_k, n_) - 1 : n_ - 1;
    tie_all_ = 0;
    tie_scoped_ = 0;
    for (int i = 0; i + 1 < n_; ++i)
      if (y_[i] == y_[i + 1]) {
        ++tie_all_;
        if (i < scope_pairs_) ++tie_scoped_;
      }
    if (pauses_) {
      tops_.init(n_);
      bottoms_.init(n_);
      for (int i = 0; i < n_; ++i) {
        if (is_top(i)) tops_.add(i, 1);
        if (is_bottom(i)) bottoms_.add(i, 1);
      }
    }
    occ_.assign(n_, 0.0);
    last_.assign(n_, 0.0);
  }

  EventLog run() {
    EventLog log;
    log.horizon = p_.horizon;

    // Epoch streams, all deterministic functions of the recorder config.
    std::vector<double> samples(rec_.sample_times);
    std::sort(samples.begin(), samples.end());
    std::size_t sample_idx = 0;
    std::int64_t gap1_idx = 0;
    const double gap1_spacing =
        rec_.gap1_samples > 0 ? p_.horizon / rec_.gap1_samples : 0.0;
    int batch_idx = 0;
    const int batches = rec_.batches;
    const double batch_len = batches > 0 ? p_.horizon / batches : 0.0;
    std::vector<double> prev_batch_gaps(batches > 0 ? n_ : 0, 0.0);

    const double inf = std::numeric_limits<double>::infinity();
    auto next_sample = [&]() { return sample_idx < samples.size() ? samples[sample_idx] : inf; };
    auto next_gap1 = [&]() {
      return gap1_idx < rec_.gap1_samples ? (gap1_idx + 0.5) * gap1_spacing : inf;
    };
    auto next_batch = [&]() {
      if (batches == 0 || batch_idx >= batches) return inf;
      return batch_idx + 1 == batches ? p_.horizon : (batch_idx + 1) * batch_len;
    };

    double now = 0.0;
    while (true) {
      const double arr = arrival_total();
      const double svc = service_total();
      const double total = arr + svc;
      const double dt = -std::log(rng_.uniform01()) / total;
      const double te = now + dt;

      // Process recording epochs inside the holding interval; the state is
      // constant there.
      const double upper = std::min(te, p_.horizon);
      while (true) {
        const double ts = next_sample(), tg = next_gap1(), tb = next_batch();
        const double epoch = std::min({ts, tg, tb});
        if (epoch > upper) break;
        accrue_tied(epoch, log);
        if (ts == epoch) {
          log.snapshot_times.push_back(epoch);
          log.snapshots.push_back(first_k_gaps(rec_.snapshot_k));
          ++sample_idx;
        } else if (tb == epoch) {
          flush_all(epoch);
          std::vector<double> cur = gap_integrals();
          std::vector<double> delta(n_);
          for (int i = 0; i < n_; ++i) delta[i] = cur[i] - prev_batch_gaps[i];
          prev_batch_gaps = std::move(cur);
          log.batch_occupation.push_back(std::move(delta));
          log.batch_length.push_back(batch_len);
          ++batch_idx;
        } else {
          log.gap1_histogram[y_[0]] += 1;
          ++gap1_idx;
        }
      }

      if (te >= p_.horizon) {
        accrue_tied(p_.horizon, log);
        now = p_.horizon;
        break;
      }
      accrue_tied(te, log);
      now = te;
      apply_event(rng_.uniform01() * total, arr, now);
      ++log.event_count;
      if (rec_.audit_interval > 0 && log.event_count % rec_.audit_interval == 0) audit();
      if (rec_.max_events > 0 && log.event_count >= rec_.max_events) break;
    }

    log.elapsed = now;
    flush_all(now);
    log.gap_occupation = gap_integrals();
    log.final_gaps = first_k_gaps(n_);
    return log;
  }

 private:
  bool is_top(int i) const { return i == n_ - 1 || y_[i] < y_[i + 1]; }
  bool is_bottom(int i) const { return i == 0 ? y_[0] > 0 : y_[i] > y_[i - 1]; }

  double arrival_total() const {
    if (original_) return n_ * gamma_ + bonus_;
    if (pauses_) {
      const int nblocks = n_ - static_cast<int>(tie_all_);
      const bool act1 = n_ == 1 || y_[0] < y_[1];
      return nblocks * gamma_ + (act1 ? bonus_ : 0.0);
    }
    return sampling_arrival_total_;
  }

  double service_total() const {
    if (pauses_) {
      const int active = n_ - static_cast<int>(tie_all_) - (y_[0] == 0 ? 1 : 0);
      return static_cast<double>(n_) * active;
    }
    return static_cast<double>(n_) * (n_ - zero_count_);
  }

  std::vector<std::int64_t> first_k_gaps(int k) const {
    const int kk = std::min(std::max(k, 0), n_);
    std::vector<std::int64_t> g(kk);
    for (int i = 0; i < kk; ++i) g[i] = i == 0 ? y_[0] : y_[i] - y_[i - 1];
    return g;
  }

  std::vector<double> gap_integrals() const {
    std::vector<double> g(n_);
    for (int i = 0; i < n_; ++i) g[i] = i == 0 ? occ_[0] : occ_[i] - occ_[i - 1];
    return g;
  }

  void accrue_tied(double t, EventLog& log) {
    if (tie_scoped_ > 0) log.time_tied += t - tie_cursor_;
    tie_cursor_ = t;
  }

  void flush_all(double t) {
    for (int i = 0; i < n_; ++i) {
      occ_[i] += static_cast<double>(y_[i]) * (t - last_[i]);
      last_[i] = t;
    }
  }

  void apply_event(double v, double arr, double now) {
    int pos;
    int delta;
    if (v < arr) {
      delta = 1;
      pos = pick_arrival_position(v);
    } else {
      delta = -1;
      pos = pick_service_position(v - arr);
    }
    mutate(pos, delta, now);
  }

  int pick_arrival_position(double v) {
    if (original_) {
      if (v < bonus_) return block_top(y_, 0);
      const int label = std::min(static_cast<int>((v - bonus_) / gamma_), n_ - 1);
      return block_top(y_, label);
    }
    if (pauses_) {
      const bool act1 = n_ == 1 || y_[0] < y_[1];
      if (act1 && v < bonus_) return 0;
      const double w = v - (act1 ? bonus_ : 0.0);
      const int nblocks = tops_.total();
      const int k = std::min(static_cast<int>(w / gamma_), nblocks - 1);
      return tops_.select(k);
    }
    int target;
    switch (p_.policy) {
      case Policy::Rr:
        target = std::min(static_cast<int>(v / (sampling_arrival_total_ / n_)), n_ - 1);
        break;
      case Policy::Jsq:
        target = 0;
        break;
      default:  // JsqD
        target = route(Policy::JsqD, y_, p_.d, rng_) - 1;
        break;
    }
    return block_top(y_, target);
  }

  int pick_service_position(double w) {
    if (pauses_) {
      const int active = bottoms_.total();
      const int k = std::min(static_cast<int>(w / n_), active - 1);
      return bottoms_.select(k);
    }
    const int busy = n_ - zero_count_;
    const int idx = zero_count_ + std::min(static_cast<int>(w / n_), busy - 1);
    return block_bottom(y_, idx);
  }

  void mutate(int p, int delta, double now) {
    occ_[p] += static_cast<double>(y_[p]) * (now - last_[p]);
    last_[p] = now;

    const bool had_top_pm1 = pauses_ && p > 0 && is_top(p - 1);
    const bool had_top_p = pauses_ && is_top(p);
    const bool had_bot_p = pauses_ && is_bottom(p);
    const bool had_bot_pp1 = pauses_ && p + 1 < n_ && is_bottom(p + 1);
    const bool had_tie_left = p > 0 && y_[p - 1] == y_[p];
    const bool had_tie_right = p + 1 < n_ && y_[p] == y_[p + 1];

    if (delta < 0) assert(y_[p] > 0 && "service from an empty queue");
    y_[p] += delta;
    assert(y_[p] >= 0);
    if (delta > 0 && y_[p] == 1) --zero_count_;
    if (delta < 0 && y_[p] == 0) ++zero_count_;

    const bool has_tie_left = p > 0 && y_[p - 1] == y_[p];
    const bool has_tie_right = p + 1 < n_ && y_[p] == y_[p + 1];
    tie_all_ += (has_tie_left ? 1 : 0) - (had_tie_left ? 1 : 0) + (has_tie_right ? 1 : 0) -
                (had_tie_right ? 1 : 0);
    if (p - 1 < scope_pairs_ && p > 0)
      tie_scoped_ += (has_tie_left ? 1 : 0) - (had_tie_left ? 1 : 0);
    if (p < scope_pairs_ && p + 1 < n_)
      tie_scoped_ += (has_tie_right ? 1 : 0) - (had_tie_right ? 1 : 0);

    if (pauses_) {
      if (p > 0 && is_top(p - 1) != had_top_pm1) tops_.add(p - 1, is_top(p - 1) ? 1 : -1);
      if (is_top(p) != had_top_p) tops_.add(p, is_top(p) ? 1 : -1);
      if (is_bottom(p) != had_bot_p) bottoms_.add(p, is_bottom(p) ? 1 : -1);
      if (p + 1 < n_ && is_bottom(p + 1) != had_bot_pp1)
        bottoms_.add(p + 1, is_bottom(p + 1) ? 1 : -1);
    }
  }

  void audit() const {
    if (!std::is_sorted(y_.begin(), y_.end()))
      throw std::logic_error("audit: ranked vector not sorted");
    std::int64_t ties = 0, scoped = 0;
    for (int i = 0; i + 1 < n_; ++i)
      if (y_[i] == y_[i + 1]) {
        ++ties;
        if (i < scope_pairs_) ++scoped;
      }
    const int zeros = static_cast<int>(std::count(y_.begin(), y_.end(), 0));
    if (ties != tie_all_ || scoped != tie_scoped_ || zeros != zero_count_)
      throw std::logic_error("audit: incremental counters diverged from state");
    if (pauses_) {
      int t = 0, b = 0;
      for (int i = 0; i < n_; ++i) {
        t += is_top(i) ? 1 : 0;
        b += is_bottom(i) ? 1 : 0;
      }
      if (t != tops_.total() || b != bottoms_.total())
        throw std::logic_error("audit: activity trees diverged from state");
    }
  }

  SystemParams p_;
  RecorderConfig rec_;
  CounterRng rng_;
  int n_ = 0;
  std::vector<std::int64_t> y_;
  double gamma_ = 0.0, bonus_ = 0.0, sampling_arrival_total_ = 0.0;
  bool pauses_ = false, original_ = false;
  int zero_count_ = 0;
  std::int64_t tie_all_ = 0, tie_scoped_ = 0;
  int scope_pairs_ = 0;
  Fenwick tops_, bottoms_;
  std::vector<double> occ_, last_;
  double tie_cursor_ = 0.0;
};

}  // namespace

EventLog simulate(const SystemParams& params, const GapVector& initial,
                  const RecorderConfig& recorder) {
  RankedSimulator sim(params, initial, recorder);
  return sim.run();
}

GapVector zero_start(int n) {
  GapVector g;
  g.gaps.assign(n, 0);
  return g;
}

GapVector stationary_gaps_pauses(int n, double a, double b, CounterRng& rng) {
  GapVector g;
  g.gaps = pi_n(n, a, b).sample(rng);
  return g;
}

GapVector stationary_gaps_rr(int n, double a, double b, CounterRng& rng) {
  if (!(a > b)) throw std::invalid_argument("stationary_gaps_rr: requires a > b");
  const double rho = 1.0 - (a - b) * std::pow(static_cast<double>(n), -1.5);
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("stationary_gaps_rr: infeasible rho");
  std::vector<std::int64_t> x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.geometric(rho);
  std::sort(x.begin(), x.end());
  GapVector g;
  g.gaps.resize(n);
  for (int i = 0; i < n; ++i) g.gaps[i] = i == 0 ? x[0] : x[i] - x[i - 1];
  return g;
}

LabeledLog simulate_labeled(const SystemParams& params, const std::vector<std::int64_t>& initial) {
  params.validate();
  if (params.policy == Policy::MjsqPauses)
    throw std::invalid_argument("simulate_labeled: pauses dynamics are defined on ranked states");
  const int n = params.n;
  if (static_cast<int>(initial.size()) != n)
    throw std::invalid_argument("simulate_labeled: initial size mismatch");

  std::vector<std::int64_t> x(initial);
  for (auto v : x)
    if (v < 0) throw std::invalid_argument("simulate_labeled: negative length");

  CounterRng rng(params.seed);
  const double gamma = params.base_arrival_rate();
  const double bonus = params.bonus_rate();
  const bool original = params.policy == Policy::MjsqOriginal;
  const double sampling_arr = params.total_arrival_rate();

  // Nonempty-label index for O(1) uniform service selection.
  std::vector<int> busy;
  std::vector<int> pos_of(n, -1);
  for (int i = 0; i < n; ++i)
    if (x[i] > 0) {
      pos_of[i] = static_cast<int>(busy.size());
      busy.push_back(i);
    }
  auto mark_busy = [&](int i) {
    pos_of[i] = static_cast<int>(busy.size());
    busy.push_back(i);
  };
  auto mark_idle = [&](int i) {
    const int p = pos_of[i];
    const int back = busy.back();
    busy[p] = back;
    pos_of[back] = p;
    busy.pop_back();
    pos_of[i] = -1;
  };
  auto argmin_label = [&]() {
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (x[i] < x[best]) best = i;
    return best;
  };

  LabeledLog log;
  log.horizon = params.horizon;
  std::vector<double> last(n, 0.0);
  log.queue_occupation.assign(n, 0.0);
  double now = 0.0;

  std::vector<int> scratch;
  while (true) {
    const double arr = original ? n * gamma + bonus : sampling_arr;
    const double svc = static_cast<double>(n) * busy.size();
    const double total = arr + svc;
    const double dt = -std::log(rng.uniform01()) / total;
    if (now + dt >= params.horizon) {
      now = params.horizon;
      break;
    }
    now += dt;
    const double v = rng.uniform01() * total;
    int label;
    int delta;
    if (v < arr) {
      delta = 1;
      if (original) {
        label = v < bonus ? argmin_label()
                          : std::min(static_cast<int>((v - bonus) / gamma), n - 1);
      } else if (params.policy == Policy::Rr) {
        label = std::min(static_cast<int>(v / (sampling_arr / n)), n - 1);
      } else if (params.policy == Policy::Jsq) {
        label = argmin_label();
      } else {  // JsqD
        scratch.clear();
        int best = -1;
        for (int i = n - params.d; i < n; ++i) {
          int j = static_cast<int>(rng.uniform_int(i + 1));
          if (std::find(scratch.begin(), scratch.end(), j) != scratch.end()) j = i;
          scratch.push_back(j);
          if (best < 0 || x[j] < x[best] || (x[j] == x[best] && j < best)) best = j;
        }
        label = best;
      }
    } else {
      delta = -1;
      const int idx = std::min(static_cast<int>((v - arr) / n), static_cast<int>(busy.size()) - 1);
      label = busy[idx];
    }
    log.queue_occupation[label] += static_cast<double>(x[label]) * (now - last[label]);
    last[label] = now;
    x[label] += delta;
    if (delta > 0 && x[label] == 1) mark_busy(label);
    if (delta < 0 && x[label] == 0) mark_idle(label);
    ++log.event_count;
  }
  for (int i = 0; i < n; ++i)
    log.queue_occupation[i] += static_cast<double>(x[i]) * (now - last[i]);
  log.final_lengths = std::move(x);
  return log;
}

}  // namespace mjsq
