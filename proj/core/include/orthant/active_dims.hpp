#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "orthant/gauss.hpp"
#include "orthant/qmc.hpp"
#include "orthant/rng.hpp"

namespace orthant {

/// Method A draws active dimensions with probability proportional to
/// p_t(i) = P(X_i > t); Method B proportional to p_t(i) (1 - p_t(i)).
enum class SelectionMethod { A, B };

[[nodiscard]] std::string_view to_string(SelectionMethod m) noexcept;
[[nodiscard]] SelectionMethod selection_method_from_string(std::string_view name);

struct ExcursionWeights {
  Eigen::VectorXd p_t;      ///< marginal exceedance probabilities
  Eigen::VectorXd weights;  ///< normalised sampling weights for `method`
  SelectionMethod method = SelectionMethod::A;
  bool uniform_fallback = false;  ///< every raw weight was zero

  [[nodiscard]] int eligible() const noexcept;
};

/// p_t(i) = Phi((mu_i - t) / sqrt(Sigma_ii)). Throws ZeroVariance if some
/// Sigma_ii <= 0.
[[nodiscard]] ExcursionWeights excursion_probs(const GaussianSpec& spec, double t,
                                               SelectionMethod method = SelectionMethod::A);

/// Sequential weighted sampling of q distinct indices.
///
/// With `spatial` (one point per row, d rows) the weight of the j-th draw is
/// multiplied componentwise by delta_j / |delta_j|, delta_j being the running
/// product of Euclidean distances to the already selected points. Indices in
/// `preselected` count as already drawn and are returned first.
/// Throws InsufficientMass when fewer than q indices carry positive weight.
[[nodiscard]] std::vector<int> select_dims(const ExcursionWeights& weights, int q, Rng& rng,
                                           const Eigen::MatrixXd* spatial = nullptr,
                                           std::span<const int> preselected = {});

/// Exact probabilities of the next draw of select_dims given `chosen`.
[[nodiscard]] Eigen::VectorXd next_draw_probabilities(const ExcursionWeights& weights,
                                                      std::span<const int> chosen,
                                                      const Eigen::MatrixXd* spatial = nullptr);

struct ActiveDimsParams {
  int q0 = 0;  ///< 0 selects ceil(d^(1/3))
  int q_step = 10;
  double gamma = 1.0;
  int q_limit = 300;
  SelectionMethod method = SelectionMethod::B;
  /// Append q_step new indices per round instead of redrawing the whole set.
  bool grow = false;
};

struct ActiveStep {
  int q = 0;
  double p_hat = 0.0;  ///< 1 - P(X^q <= t)
  double err = 0.0;    ///< 3 * std_error
  double delta = 0.0;  ///< |p_k - p_{k-1}| / (1 + p_k); NaN on the first step
};

struct ActiveSet {
  std::vector<int> indices;
  CdfEstimate cdf;  ///< estimate of P(X^q <= t) for `indices`
  std::string method;
  std::vector<ActiveStep> history;
  /// Stopped by the q > q_limit guard rather than by convergence.
  bool q_exhausted = false;

  [[nodiscard]] int q() const noexcept { return static_cast<int>(indices.size()); }
  [[nodiscard]] double pq() const noexcept { return 1.0 - cdf.value; }
  [[nodiscard]] double pq_variance() const noexcept { return cdf.std_error * cdf.std_error; }
};

/// Grows q from q0 in steps of q_step, re-selecting dimensions and
/// re-estimating p_q each round, until the relative change drops below
/// gamma * 3 * std_error, q exceeds q_limit, or every eligible dimension is
/// active.
[[nodiscard]] ActiveSet choose_q(const GaussianSpec& spec, double t,
                                 const ActiveDimsParams& params, const QmcBudget& budget,
                                 const Stream& stream, const Eigen::MatrixXd* spatial = nullptr);

/// Core estimate for a caller-supplied index set.
[[nodiscard]] ActiveSet explicit_active_set(const GaussianSpec& spec, double t,
                                            std::vector<int> indices, const QmcBudget& budget,
                                            const Stream& stream);

/// Core estimate for a fixed q with indices drawn by `method`.
[[nodiscard]] ActiveSet fixed_q_active_set(const GaussianSpec& spec, double t, int q,
                                           SelectionMethod method, const QmcBudget& budget,
                                           const Stream& stream,
                                           const Eigen::MatrixXd* spatial = nullptr);

}  // namespace orthant
