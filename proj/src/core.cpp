#include "mjsq/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mjsq {

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::MjsqOriginal: return "mjsq_original";
    case Policy::MjsqPauses: return "mjsq_pauses";
    case Policy::Rr: return "rr";
    case Policy::Jsq: return "jsq";
    case Policy::JsqD: return "jsq_d";
  }
  return "unknown";
}

Policy policy_from_name(const std::string& name) {
  if (name == "mjsq_original") return Policy::MjsqOriginal;
  if (name == "mjsq_pauses") return Policy::MjsqPauses;
  if (name == "rr") return Policy::Rr;
  if (name == "jsq") return Policy::Jsq;
  if (name == "jsq_d") return Policy::JsqD;
  throw std::invalid_argument("unknown policy: " + name);
}

double SystemParams::base_arrival_rate() const {
  return n - a / std::sqrt(static_cast<double>(n));
}

double SystemParams::bonus_rate() const { return b * std::sqrt(static_cast<double>(n)); }

double SystemParams::total_arrival_rate() const {
  const double sn = std::sqrt(static_cast<double>(n));
  return static_cast<double>(n) * n - (a - b) * sn;
}

void SystemParams::validate() const {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(a > 0.0)) throw std::invalid_argument("a must be > 0");
  if (b < 0.0) throw std::invalid_argument("b must be >= 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
  if (policy == Policy::MjsqOriginal || policy == Policy::MjsqPauses) {
    if (!(base_arrival_rate() > 0.0))
      throw std::invalid_argument("base arrival rate n - a/sqrt(n) must be positive (a < n^{3/2})");
  } else {
    if (!(total_arrival_rate() > 0.0))
      throw std::invalid_argument("total arrival rate n^2 - (a-b)sqrt(n) must be positive");
  }
  if (policy == Policy::JsqD && (d < 1 || d > n))
    throw std::invalid_argument("JSQ(d) requires 1 <= d <= n");
}

void SystemParams::validate_stationary() const {
  validate();
  if (!(a > b && b > 0.0))
    throw std::invalid_argument("stationary-law claims require a > b > 0");
}

RankedState rank(const LabeledState& state) {
  const auto n = state.lengths.size();
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int32_t i, std::int32_t j) {
    if (state.lengths[i] != state.lengths[j]) return state.lengths[i] < state.lengths[j];
    return i < j;
  });
  RankedState out;
  out.lengths.resize(n);
  out.rank_of.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    out.lengths[r] = state.lengths[order[r]];
    out.rank_of[order[r]] = static_cast<std::int32_t>(r);
  }
  return out;
}

GapVector gaps(const RankedState& ranked) {
  GapVector g;
  g.gaps.resize(ranked.lengths.size());
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < ranked.lengths.size(); ++i) {
    g.gaps[i] = ranked.lengths[i] - prev;
    prev = ranked.lengths[i];
  }
  return g;
}

std::vector<std::int64_t> cumulative(const GapVector& g) {
  std::vector<std::int64_t> out(g.gaps.size());
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < g.gaps.size(); ++i) {
    acc += g.gaps[i];
    out[i] = acc;
  }
  return out;
}

namespace {
ScaledVector scale_impl(const std::vector<std::int64_t>& v, int n) {
  if (n < 1) throw std::invalid_argument("diffusion_scale: n must be >= 1");
  ScaledVector s;
  s.scale = std::sqrt(static_cast<double>(n));
  s.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    s.values[i] = static_cast<double>(v[i]) / s.scale;
  return s;
}
}  // namespace

ScaledVector diffusion_scale(const GapVector& g, int n) { return scale_impl(g.gaps, n); }
ScaledVector diffusion_scale(const RankedState& r, int n) { return scale_impl(r.lengths, n); }

std::vector<std::int64_t> unscale(const ScaledVector& s) {
  std::vector<std::int64_t> out(s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i)
    out[i] = static_cast<std::int64_t>(std::llround(s.values[i] * s.scale));
  return out;
}

double tail_mass(const ScaledVector& scaled_sorted, double c, int start_index) {
  const auto& x = scaled_sorted.values;
  if (!(c > 0.0)) throw std::invalid_argument("tail_mass: c must be > 0");
  if (start_index < 1 || static_cast<std::size_t>(start_index) > x.size())
    throw std::invalid_argument("tail_mass: start index out of range");
  if (!std::is_sorted(x.begin(), x.end()))
    throw std::invalid_argument("tail_mass: input must be nondecreasing");
  double acc = 0.0;
  for (std::size_t i = static_cast<std::size_t>(start_index) - 1; i < x.size(); ++i)
    acc += std::exp(-c * x[i]);
  return acc;
}

}  // namespace mjsq
