#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "orthant/gauss.hpp"
#include "orthant/rng.hpp"

namespace orthant {

enum class SequenceKind {
  Sobol,    ///< Joe-Kuo digital sequence, natural (non-Gray) order
  Lattice,  ///< Richtmyer rank-1 lattice, alpha_j = frac(sqrt(prime_j))
};

[[nodiscard]] std::string_view to_string(SequenceKind kind) noexcept;
[[nodiscard]] SequenceKind sequence_kind_from_string(std::string_view name);

/// Highest Sobol dimension with tabulated direction numbers.
inline constexpr int kSobolMaxDimension = 1111;

struct QmcSequence {
  int dimension = 1;
  SequenceKind kind = SequenceKind::Sobol;
  /// Number of leading points to skip. Point 0 (the origin) is never emitted,
  /// so skip = 0 starts at index 1: 0.5, 0.25, 0.75, 0.125, ... in dimension 1.
  std::uint64_t skip = 0;
};

/// n x dimension matrix of points in [0,1)^dimension. Throws
/// DimensionUnsupported for Sobol beyond kSobolMaxDimension.
[[nodiscard]] Eigen::MatrixXd lowdiscrepancy_points(const QmcSequence& seq, Eigen::Index n);

struct QmcBudget {
  int n_points = 1 << 12;
  int n_randomizations = 12;
  SequenceKind kind = SequenceKind::Lattice;
};

/// Randomized QMC estimate of P(X <= upper).
///
/// `std_error` is the standard deviation of the per-randomization means
/// divided by sqrt(n_randomizations). Callers that want the conventional
/// "3 sigma" error multiply by 3 themselves.
struct CdfEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_randomizations = 0;
  int n_points = 0;
  SequenceKind kind = SequenceKind::Lattice;
  /// Some marginal P(X_i <= upper_i) underflowed to zero; value is 0.
  bool degenerate_bounds = false;
  /// Integration order: position k integrates input coordinate permutation[k].
  std::vector<int> permutation;
};

/// Greedy variable reordering with a simultaneous Cholesky factorisation.
struct Reordering {
  std::vector<int> permutation;
  Eigen::MatrixXd lower;  ///< factor of the permuted covariance
  Eigen::VectorXd upper;  ///< permuted, mean-centred bounds
};

inline constexpr int kCdfWarnDimension = 300;
inline constexpr int kCdfMaxDimension = 500;

/// At step i picks, among the remaining variables, the one with the smallest
/// conditional probability P(X_j <= upper_j | previous chosen at their
/// truncated expectations); ties go to the lowest index.
[[nodiscard]] Reordering reorder_variables(const GaussianSpec& spec, const Eigen::VectorXd& upper);

[[nodiscard]] CdfEstimate mvn_cdf(const GaussianSpec& spec, const Eigen::VectorXd& upper,
                                  const QmcBudget& budget, Rng& rng);

}  // namespace orthant
