#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthant/rng.hpp"

namespace orthant {

/// Affine simulation costs: drawing n outer samples costs c0 + c n, and
/// m inner samples for one outer sample cost alpha + beta m.
struct CostModel {
  double c0 = 0.0;
  double c = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  /// c0 + n (c + alpha + beta m)
  [[nodiscard]] double total(double n, double m) const noexcept {
    return c0 + n * (c + alpha + beta * m);
  }
  /// Outer sample count affordable with budget c_fix at m inner samples.
  [[nodiscard]] double outer_count(double c_fix, double m) const noexcept {
    return (c_fix - c0) / (c + alpha + beta * m);
  }
};

enum class CostSource {
  Timed,     ///< monotonic-clock measurements during the pilot
  Analytic,  ///< operation counts reported by the sampler (deterministic)
};

/// Two-stage sampler for E[g(W, Z)] with W expensive and Z | W cheap.
///
/// Anchors (outer draws) are held in a working window; indices passed to
/// prepare_inner/draw_inner are positions in that window.
class NestedSampler {
 public:
  virtual ~NestedSampler() = default;

  /// One-off precomputation (part of c0).
  virtual void setup() = 0;
  /// Appends `count` outer draws to the window.
  virtual void draw_outer(Eigen::Index count) = 0;
  /// Empties the window; later draws continue the same outer stream.
  virtual void clear() = 0;
  [[nodiscard]] virtual Eigen::Index anchor_count() const = 0;
  /// Per-anchor preparation of the conditional sampler (the alpha cost).
  virtual void prepare_inner(Eigen::Index begin, Eigen::Index end) = 0;
  /// One inner draw per anchor in [begin, end): anchor begin + k uses
  /// rngs[k] and writes g(w, z) to g[k].
  virtual void draw_inner(Eigen::Index begin, Eigen::Index end, std::span<Rng> rngs,
                          std::span<double> g) = 0;
  /// Costs in abstract work units; only meaningful after the pilot.
  [[nodiscard]] virtual std::optional<CostModel> analytic_costs() const { return std::nullopt; }
  [[nodiscard]] virtual double acceptance_rate() const { return 1.0; }
};

/// Pilot run: n0 anchors with m0 inner draws each.
struct PilotStats {
  CostModel cost;  ///< timed, seconds
  Eigen::MatrixXd g;  ///< n0 x m0 payoffs
  Eigen::VectorXd E;  ///< per-anchor mean over the m0 draws
  Eigen::VectorXd V;  ///< per-anchor sample variance (divisor m0 - 1)
  std::vector<Rng> inner_rngs;  ///< per-anchor inner streams, positioned after the m0 draws
  double a_hat = 0.0;  ///< B_hat + between-anchor variance of E
  double b_hat = 0.0;  ///< mean of V
  bool timer_floored = false;
  double seconds = 0.0;
};

/// Floor applied to timed per-sample costs, seconds.
inline constexpr double kCostFloor = 1e-9;

/// Calls setup(), draws n0 anchors in five sub-batches and m0 inner rounds,
/// timing each step. c0 and alpha are measured directly; c and beta are
/// least-squares slopes of cumulative time against batch size.
/// Leaves the n0 pilot anchors in the window.
[[nodiscard]] PilotStats run_pilot(NestedSampler& sampler, int n0, int m0,
                                   const Stream& inner);

struct AnmcPlan {
  int m_star = 1;
  double m_tilde = 0.0;  ///< +inf when A_hat and B_hat coincide
  double epsilon = 0.0;  ///< m_tilde - floor(m_tilde)
  double a_hat = 0.0;
  double b_hat = 0.0;
  long long n_star = 1;
  /// var(anMC) / var(MC) at equal cost predicted by the cost model; eta = 1 - ratio.
  double predicted_ratio = 1.0;
  double eta = 0.0;
  /// m_star exceeds 2 (alpha + c) B / ((c + alpha) B + beta (A - B)).
  bool efficiency_condition = false;
  bool m_clamped = false;
};

/// Optimal inner sample count for budget c_fix (same units as `cost`).
/// Throws DegenerateVariance if a_hat <= 0.
[[nodiscard]] AnmcPlan plan_anmc(const CostModel& cost, double a_hat, double b_hat, double c_fix,
                                 int m_max);

struct SimBudget {
  enum class Kind {
    Seconds,
    /// Cost of this many plain (m = 1) outer/inner pairs under the cost model.
    EquivalentSamples,
  };
  Kind kind = Kind::EquivalentSamples;
  double value = 10'000;

  [[nodiscard]] double c_fix(const CostModel& cost) const noexcept {
    return kind == Kind::Seconds ? value : cost.total(value, 1.0);
  }
};

struct NestedConfig {
  int n0 = 50;
  int m0 = 10;
  int m_max = 200;
  SimBudget budget;
  CostSource cost_source = CostSource::Timed;
  std::optional<int> m_fixed;        ///< bypass the planner's m*
  std::optional<long long> n_fixed;  ///< bypass N_Cfix(m*)
};

struct NestedResult {
  double value = 0.0;
  /// Between-anchor variance of the per-anchor means, divided by n_outer.
  double variance = 0.0;
  long long n_outer = 0;
  int m_inner = 1;
  double acceptance_rate = 1.0;
  double seconds = 0.0;
  /// The budget did not cover the pilot; the estimate uses the pilot anchors only.
  bool budget_exhausted = false;
  std::optional<AnmcPlan> plan;
  std::optional<CostModel> cost;
};

/// Plain MC: n anchors, one inner draw each.
[[nodiscard]] NestedResult run_mc(NestedSampler& sampler, long long n, const Stream& inner);

/// Plain MC that keeps drawing anchors until `seconds` of wall time elapse.
[[nodiscard]] NestedResult run_mc_for(NestedSampler& sampler, double seconds,
                                      const Stream& inner);

/// Asymmetric nested MC: pilot, plan, then n* anchors with m* inner draws
/// each. Pilot anchors are reused and contribute exactly m* draws.
[[nodiscard]] NestedResult run_anmc(NestedSampler& sampler, const NestedConfig& config,
                                    const Stream& inner);

}  // namespace orthant
