#include "orthant/nested.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "orthant/error.hpp"
#include "orthant/log.hpp"

namespace orthant {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr Eigen::Index kChunk = 1024;

/// Running mean and sum of squared deviations, accumulated in anchor order.
struct Welford {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) noexcept {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  /// Population variance of the anchor means divided by n.
  [[nodiscard]] double estimator_variance() const noexcept {
    if (n == 0) return 0.0;
    const double dn = static_cast<double>(n);
    return std::max(m2 / dn, 0.0) / dn;
  }
};

std::vector<Rng> anchor_rngs(const Stream& inner, long long first, Eigen::Index count) {
  std::vector<Rng> rngs;
  rngs.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index k = 0; k < count; ++k)
    rngs.push_back(inner.sub(static_cast<std::uint64_t>(first + k)).rng());
  return rngs;
}

/// Draws `count` fresh anchors with m inner draws each and feeds their
/// per-anchor means to `acc`.
void process_chunk(NestedSampler& sampler, const Stream& inner, long long first,
                   Eigen::Index count, int m, Welford& acc) {
  sampler.clear();
  sampler.draw_outer(count);
  sampler.prepare_inner(0, count);
  std::vector<Rng> rngs = anchor_rngs(inner, first, count);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(count);
  Eigen::VectorXd g(count);
  for (int j = 0; j < m; ++j) {
    sampler.draw_inner(0, count, rngs, std::span<double>(g.data(), static_cast<std::size_t>(count)));
    sums += g;
  }
  for (Eigen::Index k = 0; k < count; ++k) acc.add(sums(k) / m);
}

/// Least-squares slope through the origin.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

AnmcPlan degenerate_plan(const CostModel& cost, double a_hat, double b_hat, double c_fix) {
  AnmcPlan plan;
  plan.a_hat = a_hat;
  plan.b_hat = b_hat;
  plan.n_star = std::max<long long>(1, static_cast<long long>(std::floor(cost.outer_count(c_fix, 1.0))));
  return plan;
}

}  // namespace

PilotStats run_pilot(NestedSampler& sampler, int n0, int m0, const Stream& inner) {
  if (n0 < 2 || m0 < 2) throw Error(ErrorCode::InvalidArgument, "pilot needs n0 >= 2 and m0 >= 2");
  PilotStats out;
  const auto start = Clock::now();

  sampler.clear();
  sampler.setup();
  out.cost.c0 = seconds_since(start);

  const int batches = std::min(n0, 5);
  std::vector<double> counts, times;
  const auto outer_start = Clock::now();
  for (int b = 0; b < batches; ++b) {
    const Eigen::Index lo = static_cast<Eigen::Index>(n0) * b / batches;
    const Eigen::Index hi = static_cast<Eigen::Index>(n0) * (b + 1) / batches;
    sampler.draw_outer(hi - lo);
    counts.push_back(static_cast<double>(hi));
    times.push_back(seconds_since(outer_start));
  }
  out.cost.c = slope(counts, times);

  const auto prep_start = Clock::now();
  sampler.prepare_inner(0, n0);
  out.cost.alpha = seconds_since(prep_start) / n0;

  out.g.resize(n0, m0);
  out.inner_rngs = anchor_rngs(inner, 0, n0);
  std::vector<double> rounds, inner_times;
  const auto inner_start = Clock::now();
  for (int j = 0; j < m0; ++j) {
    sampler.draw_inner(0, n0, out.inner_rngs,
                       std::span<double>(out.g.col(j).data(), static_cast<std::size_t>(n0)));
    rounds.push_back(j + 1.0);
    inner_times.push_back(seconds_since(inner_start));
  }
  out.cost.beta = slope(rounds, inner_times) / n0;

  if (out.cost.c < kCostFloor || out.cost.beta < kCostFloor) {
    out.timer_floored = true;
    log::warn("per-sample cost below timer resolution; flooring at 1 ns");
    out.cost.c = std::max(out.cost.c, kCostFloor);
    out.cost.beta = std::max(out.cost.beta, kCostFloor);
  }

  // Shifted by each anchor's first draw so a constant row has V exactly 0.
  const Eigen::MatrixXd shifted = out.g.colwise() - out.g.col(0);
  const Eigen::VectorXd shifted_mean = shifted.rowwise().mean();
  out.E = out.g.col(0) + shifted_mean;
  out.V = ((shifted.colwise() - shifted_mean).array().square().rowwise().sum() / (m0 - 1)).matrix();
  out.b_hat = out.V.mean();
  const double between = (out.E.array() - out.E.mean()).square().sum() / (n0 - 1);
  out.a_hat = between + out.b_hat;
  out.seconds = seconds_since(start);
  return out;
}

AnmcPlan plan_anmc(const CostModel& cost, double a_hat, double b_hat, double c_fix, int m_max) {
  if (!(a_hat > 0.0)) throw Error(ErrorCode::DegenerateVariance, "A_hat must be positive");
  if (m_max < 1) throw Error(ErrorCode::InvalidArgument, "m_max must be at least 1");
  if (!(cost.beta > 0.0) || cost.c + cost.alpha < 0.0)
    throw Error(ErrorCode::InvalidArgument, "cost model needs beta > 0 and c + alpha >= 0");

  AnmcPlan plan;
  plan.a_hat = a_hat;
  plan.b_hat = std::max(b_hat, 0.0);
  const double ca = cost.c + cost.alpha;
  const double amb = a_hat - plan.b_hat;
  const double B = plan.b_hat;

  if (B <= 0.0) {
    plan.m_tilde = 0.0;
    plan.m_star = 1;
  } else if (amb <= 1e-12 * a_hat) {
    plan.m_tilde = std::numeric_limits<double>::infinity();
    plan.m_star = m_max;
    plan.m_clamped = true;
    log::warn("A_hat and B_hat coincide; inner sample count clamped to m_max");
  } else {
    plan.m_tilde = std::sqrt(ca * B / (cost.beta * amb));
    const double fl = std::floor(plan.m_tilde);
    plan.epsilon = plan.m_tilde - fl;
    const double mt = plan.m_tilde;
    const double threshold = ((2.0 * mt + 1.0) - std::sqrt(4.0 * mt * mt + 1.0)) / 2.0;
    const double pick = plan.epsilon < threshold ? fl : std::ceil(mt);
    if (pick > m_max) {
      plan.m_star = m_max;
      plan.m_clamped = true;
    } else {
      plan.m_star = std::max(1, static_cast<int>(pick));
    }
  }

  const double m = plan.m_star;
  plan.n_star = std::max<long long>(1, static_cast<long long>(std::floor(cost.outer_count(c_fix, m))));
  plan.predicted_ratio =
      (ca + cost.beta * m) * (a_hat * m - (m - 1.0) * B) / ((ca + cost.beta) * a_hat * m);
  plan.eta = 1.0 - plan.predicted_ratio;
  const double denom = ca * B + cost.beta * amb;
  plan.efficiency_condition = denom > 0.0 && m > 2.0 * ca * B / denom;
  return plan;
}

NestedResult run_mc(NestedSampler& sampler, long long n, const Stream& inner) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "outer sample count must be positive");
  const auto start = Clock::now();
  sampler.clear();
  sampler.setup();
  Welford acc;
  for (long long first = 0; first < n; first += kChunk)
    process_chunk(sampler, inner, first, std::min<long long>(kChunk, n - first), 1, acc);
  NestedResult out;
  out.value = acc.mean;
  out.variance = acc.estimator_variance();
  out.n_outer = acc.n;
  out.acceptance_rate = sampler.acceptance_rate();
  out.seconds = seconds_since(start);
  return out;
}

NestedResult run_mc_for(NestedSampler& sampler, double seconds, const Stream& inner) {
  if (!(seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "time budget must be positive");
  constexpr Eigen::Index step = 256;
  const auto start = Clock::now();
  sampler.clear();
  sampler.setup();
  Welford acc;
  do {
    process_chunk(sampler, inner, acc.n, step, 1, acc);
  } while (seconds_since(start) < seconds);
  NestedResult out;
  out.value = acc.mean;
  out.variance = acc.estimator_variance();
  out.n_outer = acc.n;
  out.acceptance_rate = sampler.acceptance_rate();
  out.seconds = seconds_since(start);
  return out;
}

NestedResult run_anmc(NestedSampler& sampler, const NestedConfig& config, const Stream& inner) {
  if (config.m_max < 1) throw Error(ErrorCode::InvalidArgument, "m_max must be at least 1");
  if (config.m_fixed && *config.m_fixed < 1)
    throw Error(ErrorCode::InvalidArgument, "fixed m must be at least 1");
  if (config.n_fixed && *config.n_fixed < 1)
    throw Error(ErrorCode::InvalidArgument, "fixed n must be at least 1");
  if (!(config.budget.value > 0.0)) throw Error(ErrorCode::InvalidArgument, "budget must be positive");
  if (config.budget.kind == SimBudget::Kind::Seconds && config.cost_source == CostSource::Analytic)
    throw Error(ErrorCode::InvalidArgument, "a budget in seconds requires timed costs");

  const auto start = Clock::now();
  PilotStats pilot = run_pilot(sampler, config.n0, config.m0, inner);
  const int n0 = config.n0;
  const int m0 = config.m0;

  CostModel cost = pilot.cost;
  if (config.cost_source == CostSource::Analytic) {
    if (auto analytic = sampler.analytic_costs())
      cost = *analytic;
    else
      log::warn("sampler has no analytic cost model; using timed costs");
  }
  const double c_fix = config.budget.c_fix(cost);

  AnmcPlan plan = pilot.a_hat > 0.0 ? plan_anmc(cost, pilot.a_hat, pilot.b_hat, c_fix, config.m_max)
                                    : degenerate_plan(cost, pilot.a_hat, pilot.b_hat, c_fix);
  if (config.m_fixed) {
    plan.m_star = *config.m_fixed;
    plan.n_star = std::max<long long>(1, static_cast<long long>(std::floor(cost.outer_count(c_fix, plan.m_star))));
  }
  if (config.n_fixed) plan.n_star = *config.n_fixed;
  const int m = plan.m_star;

  NestedResult out;
  out.budget_exhausted = plan.n_star < n0;
  const long long n_total = std::max<long long>(plan.n_star, n0);

  // Pilot anchors: keep the first m draws, or extend each anchor's own
  // stream up to m draws.
  Welford acc;
  {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(n0);
    for (int j = 0; j < std::min(m, m0); ++j) sums += pilot.g.col(j);
    Eigen::VectorXd g(n0);
    for (int j = m0; j < m; ++j) {
      sampler.draw_inner(0, n0, pilot.inner_rngs, std::span<double>(g.data(), static_cast<std::size_t>(n0)));
      sums += g;
    }
    for (int i = 0; i < n0; ++i) acc.add(sums(i) / m);
  }
  for (long long first = n0; first < n_total; first += kChunk)
    process_chunk(sampler, inner, first, std::min<long long>(kChunk, n_total - first), m, acc);

  out.value = acc.mean;
  out.variance = acc.estimator_variance();
  out.n_outer = acc.n;
  out.m_inner = m;
  out.acceptance_rate = sampler.acceptance_rate();
  out.plan = plan;
  out.cost = cost;
  out.seconds = seconds_since(start);
  return out;
}

}  // namespace orthant
