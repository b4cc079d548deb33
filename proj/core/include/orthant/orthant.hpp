#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "orthant/active_dims.hpp"
#include "orthant/gauss.hpp"
#include "orthant/nested.hpp"
#include "orthant/qmc.hpp"
#include "orthant/remainder.hpp"

namespace orthant {

enum class Method {
  GMC,    ///< QMC core + plain MC remainder
  GanMC,  ///< QMC core + asymmetric nested MC remainder
  MC,     ///< plain indicator MC on the full vector
};

[[nodiscard]] std::string_view to_string(Method m) noexcept;
[[nodiscard]] Method method_from_string(std::string_view name);

struct EstimatorConfig {
  Method method = Method::GanMC;

  /// Active dimensions: an explicit set wins over a fixed q, which wins over
  /// the adaptive choice of q.
  std::optional<std::vector<int>> active;
  std::optional<int> q_fixed;
  ActiveDimsParams active_params;
  /// Optional spatial locations (one row per coordinate) for distance-weighted selection.
  std::optional<Eigen::MatrixXd> spatial;
  QmcBudget qmc;

  /// Remainder settings. The budget governs the remainder for GMC/GanMC and
  /// the whole sample for MC: EquivalentSamples = number of plain draws,
  /// Seconds = wall time.
  NestedConfig nested;
  long long max_tries = kDefaultMaxTries;
};

/// p = P(max X > t) and its pieces. pi() = 1 - p = P(X <= t).
struct Estimate {
  Method method = Method::GanMC;
  double p = 0.0;
  double variance = 0.0;
  double wall_time = 0.0;
  std::uint64_t seed = 0;

  std::optional<ActiveSet> core;
  std::optional<RemainderEstimate> remainder;
  std::optional<AnmcPlan> plan;
  std::optional<CostModel> cost;
  long long mc_samples = 0;  ///< MC method only

  [[nodiscard]] double pi() const noexcept { return 1.0 - p; }
  [[nodiscard]] double std_error() const noexcept;
  /// Acceptance rate of the rejection sampler (1 for MC).
  [[nodiscard]] double acceptance_rate() const noexcept;
  [[nodiscard]] int q() const noexcept { return core ? core->q() : 0; }
  [[nodiscard]] int m_star() const noexcept { return remainder ? remainder->m_inner : 1; }
};

/// var(p_q + (1 - p_q) R_q) for independent estimates of p_q and R_q:
/// (1 - rq)^2 var_pq + (1 - pq)^2 var_rq + var_pq var_rq.
[[nodiscard]] double compose_variance(double var_pq, double var_rq, double pq, double rq) noexcept;

/// p_q + (1 - p_q) r_q
[[nodiscard]] constexpr double compose(double pq, double rq) noexcept { return pq + (1.0 - pq) * rq; }

struct Efficiency {
  double value = 0.0;
  bool infinite = false;  ///< zero variance or zero time
};

/// 1 / (variance * wall_time)
[[nodiscard]] Efficiency efficiency(double variance, double wall_time) noexcept;
[[nodiscard]] inline Efficiency efficiency(const Estimate& est) noexcept {
  return efficiency(est.variance, est.wall_time);
}

/// Active set and core estimate as configured: explicit set, fixed q or
/// the adaptive choice of q.
[[nodiscard]] ActiveSet select_core(const GaussianSpec& spec, double t,
                                    const EstimatorConfig& config, const Stream& stream);

/// Runs active-dimension selection, the QMC core and the remainder
/// (GMC/GanMC) or plain MC. Wall time covers the whole pipeline.
[[nodiscard]] Estimate estimate_orthant(const GaussianSpec& spec, double t,
                                        const EstimatorConfig& config, std::uint64_t seed);

/// Plain MC estimate of P(max X > t) from n draws; variance p(1-p)/n.
[[nodiscard]] Estimate estimate_mc(const GaussianSpec& spec, double t, const SimBudget& budget,
                                   std::uint64_t seed);

}  // namespace orthant
