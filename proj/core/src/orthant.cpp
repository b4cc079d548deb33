#include "orthant/orthant.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "orthant/error.hpp"
#include "orthant/log.hpp"

namespace orthant {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

ActiveSet select_core(const GaussianSpec& spec, double t, const EstimatorConfig& config,
                      const Stream& stream) {
  const Eigen::MatrixXd* spatial = config.spatial ? &*config.spatial : nullptr;
  if (config.active) return explicit_active_set(spec, t, *config.active, config.qmc, stream);
  if (config.q_fixed)
    return fixed_q_active_set(spec, t, *config.q_fixed, config.active_params.method, config.qmc,
                              stream, spatial);
  return choose_q(spec, t, config.active_params, config.qmc, stream, spatial);
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::GMC: return "GMC";
    case Method::GanMC: return "GanMC";
    case Method::MC: return "MC";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "GMC") return Method::GMC;
  if (name == "GanMC") return Method::GanMC;
  if (name == "MC") return Method::MC;
  throw Error(ErrorCode::InvalidArgument,
              "unknown method '" + std::string(name) + "' (expected GMC, GanMC or MC)");
}

double Estimate::std_error() const noexcept { return std::sqrt(std::max(variance, 0.0)); }

double Estimate::acceptance_rate() const noexcept {
  return remainder ? remainder->acceptance_rate : 1.0;
}

double compose_variance(double var_pq, double var_rq, double pq, double rq) noexcept {
  return (1.0 - rq) * (1.0 - rq) * var_pq + (1.0 - pq) * (1.0 - pq) * var_rq + var_pq * var_rq;
}

Efficiency efficiency(double variance, double wall_time) noexcept {
  if (!(variance > 0.0) || !(wall_time > 0.0))
    return {std::numeric_limits<double>::infinity(), true};
  return {1.0 / (variance * wall_time), false};
}

Estimate estimate_mc(const GaussianSpec& spec, double t, const SimBudget& budget,
                     std::uint64_t seed) {
  if (!(budget.value > 0.0)) throw Error(ErrorCode::InvalidArgument, "budget must be positive");
  const auto start = Clock::now();
  Estimate out;
  out.method = Method::MC;
  out.seed = seed;

  Rng rng = Stream(seed).named("mc").rng();
  const CholeskyFactor factor = cholesky(spec.cov());
  const bool timed = budget.kind == SimBudget::Kind::Seconds;
  const long long target = timed ? std::numeric_limits<long long>::max()
                                 : static_cast<long long>(std::llround(budget.value));
  constexpr long long kBlock = 1024;
  long long n = 0, hits = 0;
  while (n < target) {
    const int block = static_cast<int>(std::min(kBlock, target - n));
    const Eigen::MatrixXd x = sample_mvn(factor, spec.mean(), block, rng);
    hits += (x.array() > t).rowwise().any().count();
    n += block;
    if (timed && seconds_since(start) >= budget.value) break;
  }
  out.mc_samples = n;
  out.p = static_cast<double>(hits) / static_cast<double>(n);
  out.variance = out.p * (1.0 - out.p) / static_cast<double>(n);
  out.wall_time = seconds_since(start);
  return out;
}

Estimate estimate_orthant(const GaussianSpec& spec, double t, const EstimatorConfig& config,
                          std::uint64_t seed) {
  if (config.method == Method::MC) return estimate_mc(spec, t, config.nested.budget, seed);

  const auto start = Clock::now();
  const Stream root(seed);
  Estimate out;
  out.method = config.method;
  out.seed = seed;
  out.core = select_core(spec, t, config, root.named("core"));

  const ActiveSet& core = *out.core;
  log::debug("d=" + std::to_string(spec.dim()) + " core q=" + std::to_string(core.q()) + " rounds=" +
             std::to_string(core.history.size()) + " in " + std::to_string(seconds_since(start)) + " s");
  const double pq = core.pq();
  const double var_pq = core.pq_variance();

  RemainderEstimate rq;
  if (core.cdf.value <= 0.0) {
    // The core event is certain to be exceeded; nothing is left to condition on.
    rq.method = config.method == Method::GMC ? "MC" : "anMC";
    rq.empty_remainder = true;
  } else if (config.method == Method::GMC) {
    const Stream s = root.named("rq");
    rq = config.nested.budget.kind == SimBudget::Kind::Seconds
             ? remainder_mc_for(spec, core.indices, t, config.nested.budget.value, s, config.max_tries)
             : remainder_mc(spec, core.indices, t,
                            static_cast<long long>(std::llround(config.nested.budget.value)), s,
                            config.max_tries);
  } else {
    AnmcOutcome res = remainder_anmc(spec, core.indices, t, config.nested, root.named("rq"),
                                     config.max_tries);
    rq = res.estimate;
    if (!rq.empty_remainder) {
      out.plan = res.plan;
      out.cost = res.cost;
    }
  }

  log::debug("remainder " + rq.method + " n=" + std::to_string(rq.n_outer) + " m=" +
             std::to_string(rq.m_inner) + " acceptance=" + std::to_string(rq.acceptance_rate) +
             " in " + std::to_string(rq.wall_time) + " s");
  out.p = compose(pq, rq.value);
  out.variance = compose_variance(var_pq, rq.variance, pq, rq.value);
  out.remainder = std::move(rq);
  out.wall_time = seconds_since(start);
  return out;
}

}  // namespace orthant
