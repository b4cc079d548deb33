#include "orthant/qmc.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "orthant/error.hpp"
#include "orthant/log.hpp"
#include "orthant/normal.hpp"

namespace orthant {

namespace {

struct SobolDirections {
  std::uint32_t poly;
  std::uint32_t m[18];
};

constexpr SobolDirections kSobolTable[] = {
#include "sobol_directions.inc"
};
static_assert(std::size(kSobolTable) == kSobolMaxDimension - 1);

constexpr int kBits = 32;

std::array<std::uint32_t, kBits> sobol_directions(int dim) {
  std::array<std::uint32_t, kBits> v{};
  if (dim == 0) {
    for (int b = 0; b < kBits; ++b) v[b] = 1u << (kBits - 1 - b);
    return v;
  }
  const auto& entry = kSobolTable[dim - 1];
  const int s = std::bit_width(entry.poly) - 1;
  const std::uint32_t a = (entry.poly >> 1) & ((1u << (s - 1)) - 1u);
  for (int b = 0; b < std::min(s, kBits); ++b) v[b] = entry.m[b] << (kBits - 1 - b);
  for (int b = s; b < kBits; ++b) {
    v[b] = v[b - s] ^ (v[b - s] >> s);
    for (int k = 1; k < s; ++k)
      if ((a >> (s - 1 - k)) & 1u) v[b] ^= v[b - k];
  }
  return v;
}

std::vector<double> richtmyer_alphas(int dim) {
  std::vector<double> alphas;
  alphas.reserve(static_cast<std::size_t>(dim));
  for (int p = 2; static_cast<int>(alphas.size()) < dim; ++p) {
    bool prime = true;
    for (int k = 2; k * k <= p; ++k)
      if (p % k == 0) {
        prime = false;
        break;
      }
    if (prime) {
      const double r = std::sqrt(static_cast<double>(p));
      alphas.push_back(r - std::floor(r));
    }
  }
  return alphas;
}

/// P(Z <= (b - shift) / scale); scale == 0 is a point mass at shift.
inline double step_prob(double b, double shift, double scale) {
  if (scale > 0.0) return norm_cdf((b - shift) / scale);
  return b - shift >= 0.0 ? 1.0 : 0.0;
}

}  // namespace

std::string_view to_string(SequenceKind kind) noexcept {
  switch (kind) {
    case SequenceKind::Sobol: return "sobol";
    case SequenceKind::Lattice: return "richtmyer-lattice";
  }
  return "unknown";
}

SequenceKind sequence_kind_from_string(std::string_view name) {
  if (name == "sobol") return SequenceKind::Sobol;
  if (name == "lattice" || name == "richtmyer-lattice") return SequenceKind::Lattice;
  throw Error(ErrorCode::InvalidArgument, "unknown sequence kind '" + std::string(name) + "'");
}

Eigen::MatrixXd lowdiscrepancy_points(const QmcSequence& seq, Eigen::Index n) {
  if (seq.dimension < 1 || n < 1)
    throw Error(ErrorCode::InvalidArgument, "sequence dimension and point count must be positive");
  Eigen::MatrixXd pts(n, seq.dimension);

  if (seq.kind == SequenceKind::Lattice) {
    const auto alphas = richtmyer_alphas(seq.dimension);
    for (int j = 0; j < seq.dimension; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = static_cast<double>(seq.skip + 1 + static_cast<std::uint64_t>(i)) * alphas[j];
        pts(i, j) = x - std::floor(x);
      }
    return pts;
  }

  if (seq.dimension > kSobolMaxDimension)
    throw Error(ErrorCode::DimensionUnsupported,
                "Sobol sequence supports at most " + std::to_string(kSobolMaxDimension) +
                    " dimensions, requested " + std::to_string(seq.dimension));
  if (seq.skip + static_cast<std::uint64_t>(n) >= (std::uint64_t{1} << kBits))
    throw Error(ErrorCode::InvalidArgument, "Sobol index range exceeds 2^32");

  for (int j = 0; j < seq.dimension; ++j) {
    const auto v = sobol_directions(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::uint32_t k = static_cast<std::uint32_t>(seq.skip + 1 + static_cast<std::uint64_t>(i));
      std::uint32_t x = 0;
      for (int b = 0; k != 0; ++b, k >>= 1)
        if (k & 1u) x ^= v[b];
      pts(i, j) = static_cast<double>(x) * 0x1.0p-32;
    }
  }
  return pts;
}

Reordering reorder_variables(const GaussianSpec& spec, const Eigen::VectorXd& upper) {
  const int q = spec.dim();
  if (upper.size() != q) throw Error(ErrorCode::InvalidArgument, "upper bound has wrong length");

  Reordering out;
  out.permutation.resize(static_cast<std::size_t>(q));
  std::iota(out.permutation.begin(), out.permutation.end(), 0);
  Eigen::MatrixXd cov = spec.cov();
  Eigen::VectorXd b = upper - spec.mean();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(q);
  const double scale = std::max(cov.diagonal().maxCoeff(), 0.0);
  const double tiny = 1e-13 * (scale > 0.0 ? scale : 1.0);

  for (int i = 0; i < q; ++i) {
    int best = i;
    double best_prob = 2.0;
    for (int j = i; j < q; ++j) {
      const double s = L.row(j).head(i).dot(y.head(i));
      const double v = cov(j, j) - L.row(j).head(i).squaredNorm();
      const double prob = step_prob(b(j), s, v > tiny ? std::sqrt(v) : 0.0);
      if (prob < best_prob) {
        best_prob = prob;
        best = j;
      }
    }
    if (best != i) {
      std::swap(out.permutation[i], out.permutation[best]);
      std::swap(b(i), b(best));
      cov.row(i).swap(cov.row(best));
      cov.col(i).swap(cov.col(best));
      L.row(i).head(i).swap(L.row(best).head(i));
    }

    const double v = cov(i, i) - L.row(i).head(i).squaredNorm();
    if (v > tiny) {
      const double lii = std::sqrt(v);
      L(i, i) = lii;
      for (int l = i + 1; l < q; ++l)
        L(l, i) = (cov(l, i) - L.row(l).head(i).dot(L.row(i).head(i))) / lii;
      const double bt = (b(i) - L.row(i).head(i).dot(y.head(i))) / lii;
      const double phi_bt = norm_cdf(bt);
      y(i) = phi_bt > 1e-300 ? -norm_pdf(bt) / phi_bt : bt;
    } else {
      // Deterministic given the earlier variables; contributes an indicator.
      L(i, i) = 0.0;
      y(i) = 0.0;
    }
  }
  out.lower = std::move(L);
  out.upper = std::move(b);
  return out;
}

CdfEstimate mvn_cdf(const GaussianSpec& spec, const Eigen::VectorXd& upper,
                    const QmcBudget& budget, Rng& rng) {
  const int q = spec.dim();
  if (upper.size() != q) throw Error(ErrorCode::InvalidArgument, "upper bound has wrong length");
  if (budget.n_points < 1 || budget.n_randomizations < 2)
    throw Error(ErrorCode::InvalidArgument,
                "QMC budget needs n_points >= 1 and n_randomizations >= 2");
  if (q > kCdfMaxDimension)
    throw Error(ErrorCode::DimensionUnsupported,
                "mvn_cdf dimension " + std::to_string(q) + " exceeds " +
                    std::to_string(kCdfMaxDimension));
  if (q > kCdfWarnDimension)
    log::warn("mvn_cdf called in dimension " + std::to_string(q) + " (> 300); expect slow, noisy estimates");

  CdfEstimate est;
  est.n_points = budget.n_points;
  est.n_randomizations = budget.n_randomizations;
  est.kind = budget.kind;

  for (int i = 0; i < q; ++i) {
    const double sd = std::sqrt(spec.cov()(i, i));
    if (step_prob(upper(i) - spec.mean()(i), 0.0, sd) == 0.0) {
      est.degenerate_bounds = true;
      est.permutation.resize(static_cast<std::size_t>(q));
      std::iota(est.permutation.begin(), est.permutation.end(), 0);
      return est;
    }
  }

  const Reordering ro = reorder_variables(spec, upper);
  est.permutation = ro.permutation;
  const Eigen::MatrixXd& L = ro.lower;
  const Eigen::VectorXd& b = ro.upper;

  if (q == 1) {
    est.value = step_prob(b(0), 0.0, L(0, 0));
    return est;
  }

  const int dim = q - 1;
  const Eigen::Index n = budget.n_points;
  Eigen::MatrixXd base;
  std::vector<double> alphas;
  if (budget.kind == SequenceKind::Sobol)
    base = lowdiscrepancy_points({dim, SequenceKind::Sobol, 0}, n);
  else
    alphas = richtmyer_alphas(dim);

  Eigen::MatrixXd w(n, dim);
  Eigen::MatrixXd y(n, dim);
  Eigen::ArrayXd f(n), e(n), s(n);
  Eigen::VectorXd means(budget.n_randomizations);
  const double first = step_prob(b(0), 0.0, L(0, 0));

  for (int r = 0; r < budget.n_randomizations; ++r) {
    for (int j = 0; j < dim; ++j) {
      const double shift = rng.uniform();
      for (Eigen::Index k = 0; k < n; ++k) {
        double x = budget.kind == SequenceKind::Sobol
                       ? base(k, j) + shift
                       : static_cast<double>(k + 1) * alphas[static_cast<std::size_t>(j)] + shift;
        x -= std::floor(x);
        // Baker's (tent) transform periodises the integrand for the lattice rule.
        w(k, j) = budget.kind == SequenceKind::Lattice ? 1.0 - std::fabs(2.0 * x - 1.0) : x;
      }
    }

    f.setConstant(first);
    e.setConstant(first);
    for (int i = 0; i < q; ++i) {
      if (i > 0) {
        s = (y.leftCols(i) * L.row(i).head(i).transpose()).array();
        const double lii = L(i, i);
        for (Eigen::Index k = 0; k < n; ++k) e(k) = step_prob(b(i), s(k), lii);
        f *= e;
      }
      if (i < dim) {
        const double lii = L(i, i);
        for (Eigen::Index k = 0; k < n; ++k) {
          if (lii > 0.0 && f(k) > 0.0) {
            const double u = std::clamp(w(k, i) * e(k), 1e-300, 1.0 - 1e-16);
            y(k, i) = norm_quantile(u);
          } else {
            y(k, i) = 0.0;
          }
        }
      }
    }
    means(r) = f.mean();
  }

  est.value = std::clamp(means.mean(), 0.0, 1.0);
  const double var = (means.array() - means.mean()).square().sum() / (means.size() - 1);
  est.std_error = std::sqrt(var / static_cast<double>(means.size()));
  return est;
}

}  // namespace orthant
