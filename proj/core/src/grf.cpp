#include "orthant/grf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "orthant/error.hpp"
#include "orthant/log.hpp"
#include "orthant/normal.hpp"

namespace orthant {

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, std::span<const int> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

void check_indices(std::span<const int> idx, int size) {
  for (int i : idx)
    if (i < 0 || i >= size)
      throw Error(ErrorCode::InvalidArgument, "grid index " + std::to_string(i) + " out of range");
}

}  // namespace

std::string_view to_string(KernelKind k) noexcept {
  return k == KernelKind::Matern52Tensor ? "matern52" : "gaussian";
}

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "matern52" || name == "matern52-tensor") return KernelKind::Matern52Tensor;
  if (name == "gaussian") return KernelKind::Gaussian;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
}

Eigen::MatrixXd kernel_eval(const Kernel& kernel, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  const int l = kernel.input_dim();
  if (l < 1 || X.cols() != l || Y.cols() != l)
    throw Error(ErrorCode::InvalidArgument, "point dimension does not match the kernel ranges");
  if (!(kernel.variance > 0.0) || (kernel.ranges.array() <= 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "kernel variance and ranges must be positive");

  Eigen::ArrayXXd acc = Eigen::ArrayXXd::Constant(X.rows(), Y.rows(),
                                                  kernel.kind == KernelKind::Gaussian ? 0.0 : 1.0);
  for (int i = 0; i < l; ++i) {
    Eigen::ArrayXXd h = (X.col(i).replicate(1, Y.rows()) - Y.col(i).transpose().replicate(X.rows(), 1)).array().abs();
    if (kernel.kind == KernelKind::Matern52Tensor) {
      const Eigen::ArrayXXd r = std::sqrt(5.0) * h / kernel.ranges(i);
      acc *= (1.0 + r + r.square() / 3.0) * (-r).exp();
    } else {
      acc += h.square() / (2.0 * kernel.ranges(i) * kernel.ranges(i));
    }
  }
  if (kernel.kind == KernelKind::Gaussian) acc = (-acc).exp();
  return (kernel.variance * acc).matrix();
}

GrfPosterior GrfPosterior::condition(const Kernel& kernel, const PriorMean& prior,
                                     const Eigen::MatrixXd& design, const Eigen::VectorXd& observations,
                                     const Eigen::MatrixXd& grid) {
  const Eigen::Index k = design.rows();
  const Eigen::Index m = grid.rows();
  if (observations.size() != k)
    throw Error(ErrorCode::InvalidArgument, "one observation per design point is required");
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "grid is empty");
  if (k > 0 && design.cols() != kernel.input_dim())
    throw Error(ErrorCode::InvalidArgument, "design dimension does not match the kernel");
  if (prior.at_design && prior.at_design->size() != k)
    throw Error(ErrorCode::InvalidArgument, "prior mean at design has wrong length");
  if (prior.at_grid && prior.at_grid->size() != m)
    throw Error(ErrorCode::InvalidArgument, "prior mean at grid has wrong length");
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (design.row(i) == design.row(j))
        throw Error(ErrorCode::DuplicateDesignPoints,
                    "design points " + std::to_string(j) + " and " + std::to_string(i) + " coincide");

  GrfPosterior post;
  post.grid_ = grid;
  post.kernel_ = kernel;
  post.mean_ = prior.at_grid ? *prior.at_grid : Eigen::VectorXd::Constant(m, prior.constant);
  post.var_ = Eigen::VectorXd::Constant(m, kernel.variance);
  post.whitened_.resize(k, m);
  if (k == 0) return post;

  const CholeskyFactor chol = cholesky(kernel_eval(kernel, design, design));
  const auto L = chol.lower.triangularView<Eigen::Lower>();
  post.whitened_ = L.solve(kernel_eval(kernel, design, grid));
  const Eigen::VectorXd prior_design =
      prior.at_design ? *prior.at_design : Eigen::VectorXd::Constant(k, prior.constant);
  const Eigen::VectorXd white_resid = L.solve(observations - prior_design);
  post.mean_ += post.whitened_.transpose() * white_resid;
  post.var_ = (post.var_ - post.whitened_.colwise().squaredNorm().transpose()).cwiseMax(0.0);
  return post;
}

GrfPosterior GrfPosterior::from_moments(Eigen::MatrixXd grid, Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size() || grid.rows() != mean.size())
    throw Error(ErrorCode::InvalidArgument, "grid, mean and covariance sizes disagree");
  GrfPosterior post;
  post.grid_ = std::move(grid);
  post.mean_ = std::move(mean);
  post.var_ = cov.diagonal().cwiseMax(0.0);
  post.cov_ = std::move(cov);
  return post;
}

Eigen::MatrixXd GrfPosterior::covariance_block(std::span<const int> idx) const {
  check_indices(idx, size());
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(n, n);
  if (cov_) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out(i, j) = (*cov_)(idx[i], idx[j]);
    return out;
  }
  const Eigen::MatrixXd pts = rows_of(grid_, idx);
  out = kernel_eval(*kernel_, pts, pts);
  if (whitened_.rows() > 0) {
    Eigen::MatrixXd w(whitened_.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) w.col(j) = whitened_.col(idx[j]);
    out.noalias() -= w.transpose() * w;
  }
  out = 0.5 * (out + out.transpose());
  for (Eigen::Index i = 0; i < n; ++i) out(i, i) = var_(idx[i]);
  return out;
}

Eigen::MatrixXd GrfPosterior::full_covariance() const {
  std::vector<int> all(static_cast<std::size_t>(size()));
  std::iota(all.begin(), all.end(), 0);
  return covariance_block(all);
}

GaussianSpec GrfPosterior::restrict(std::span<const int> idx) const {
  check_indices(idx, size());
  Eigen::VectorXd mu(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) mu(static_cast<Eigen::Index>(i)) = mean_(idx[i]);
  return GaussianSpec(std::move(mu), covariance_block(idx));
}

Eigen::MatrixXd uniform_grid(int dim, int n_per_axis) {
  if (dim < 1 || n_per_axis < 1) throw Error(ErrorCode::InvalidArgument, "grid needs dim >= 1 and n >= 1");
  Eigen::Index total = 1;
  for (int i = 0; i < dim; ++i) total *= n_per_axis;
  Eigen::MatrixXd g(total, dim);
  for (Eigen::Index r = 0; r < total; ++r) {
    Eigen::Index rest = r;
    for (int c = 0; c < dim; ++c) {
      const auto i = rest % n_per_axis;
      rest /= n_per_axis;
      g(r, c) = n_per_axis == 1 ? 0.5 : static_cast<double>(i) / (n_per_axis - 1);
    }
  }
  return g;
}

Eigen::MatrixXd latin_hypercube(int k, int dim, Rng& rng) {
  if (k < 1 || dim < 1) throw Error(ErrorCode::InvalidArgument, "latin hypercube needs k >= 1 and dim >= 1");
  Eigen::MatrixXd pts(k, dim);
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int c = 0; c < dim; ++c) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = k - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < k; ++i) pts(i, c) = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / k;
  }
  return pts;
}

Eigen::VectorXd coverage_function(const GrfPosterior& post, double t) {
  const Eigen::VectorXd& mu = post.mean();
  const Eigen::VectorXd& var = post.variance();
  Eigen::VectorXd out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    out(i) = var(i) > 0.0 ? norm_cdf((t - mu(i)) / std::sqrt(var(i))) : (mu(i) <= t ? 1.0 : 0.0);
  return out;
}

int VorobevFamily::quantile_size(double rho) const {
  return static_cast<int>((coverage.array() >= rho).count());
}

std::vector<int> VorobevFamily::quantile(double rho) const {
  const auto n = static_cast<std::size_t>(quantile_size(rho));
  return {sorted_order.begin(), sorted_order.begin() + static_cast<std::ptrdiff_t>(n)};
}

VorobevFamily vorobev(const Eigen::VectorXd& coverage, double cell_volume) {
  if (coverage.size() < 1) throw Error(ErrorCode::InvalidArgument, "coverage vector is empty");
  if (!(cell_volume > 0.0)) throw Error(ErrorCode::InvalidArgument, "cell volume must be positive");
  VorobevFamily out;
  out.coverage = coverage;
  out.cell_volume = cell_volume;
  out.sorted_order.resize(static_cast<std::size_t>(coverage.size()));
  std::iota(out.sorted_order.begin(), out.sorted_order.end(), 0);
  std::stable_sort(out.sorted_order.begin(), out.sorted_order.end(),
                   [&](int a, int b) { return coverage(a) > coverage(b); });

  const double sum = coverage.sum();
  out.expected_volume = cell_volume * sum;
  // Smallest prefix whose volume reaches E|Gamma|; the slack absorbs
  // round-off in the sum.
  const auto needed = static_cast<Eigen::Index>(
      std::clamp(std::ceil(sum - 1e-9), 0.0, static_cast<double>(coverage.size())));
  out.rho_v = needed == 0 ? 1.0 : coverage(out.sorted_order[static_cast<std::size_t>(needed - 1)]);
  out.expectation = out.quantile(out.rho_v);
  return out;
}

EstimatorConfig ConservativeConfig::default_estimator() {
  EstimatorConfig cfg;
  cfg.method = Method::GanMC;
  cfg.nested.budget = {SimBudget::Kind::Seconds, 5.0};
  cfg.nested.cost_source = CostSource::Timed;
  return cfg;
}

InclusionProbability inclusion_probability(const GrfPosterior& post, double t,
                                           std::span<const int> points,
                                           const ConservativeConfig& config, std::uint64_t seed) {
  check_indices(points, post.size());
  const double max_var = post.variance().maxCoeff();
  std::vector<int> random;
  for (int i : points) {
    if (post.variance()(i) > config.zero_variance_tol * max_var) {
      random.push_back(i);
    } else if (post.mean()(i) > t) {
      return {0.0, 0.0};
    }
  }
  if (random.empty()) return {1.0, 0.0};
  if (config.estimator.spatial) {
    EstimatorConfig cfg = config.estimator;
    cfg.spatial = post.grid()(random, Eigen::all);
    const Estimate est = estimate_orthant(post.restrict(random), t, cfg, seed);
    return {est.pi(), est.std_error()};
  }
  const Estimate est = estimate_orthant(post.restrict(random), t, config.estimator, seed);
  return {est.pi(), est.std_error()};
}

ConservativeResult conservative_estimate(const GrfPosterior& post, double t,
                                         const ConservativeConfig& config, std::uint64_t seed) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const auto start = std::chrono::steady_clock::now();

  const Eigen::VectorXd cov = coverage_function(post, t);
  const VorobevFamily fam = vorobev(cov, 1.0 / post.size());
  const std::vector<int>& order = fam.sorted_order;

  ConservativeResult out;
  out.alpha = config.alpha;
  {
    double prod = 1.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const double c = cov(order[i]);
      if (c < config.alpha) break;
      prod *= c;
      if (prod >= config.alpha) out.i_top = static_cast<int>(i + 1);
      out.i_bottom = static_cast<int>(i + 1);
    }
  }

  const Stream streams = Stream(seed).named("inclusion");
  std::map<int, InclusionProbability> cache;
  auto prob_of = [&](int size) {
    if (size == 0) return InclusionProbability{};
    if (auto it = cache.find(size); it != cache.end()) return it->second;
    const std::span<const int> prefix(order.data(), static_cast<std::size_t>(size));
    const InclusionProbability p =
        inclusion_probability(post, t, prefix, config, streams.sub(static_cast<std::uint64_t>(size)).key());
    cache.emplace(size, p);
    return p;
  };
  auto accepted = [&](const InclusionProbability& p) {
    return p.prob - config.se_multiplier * p.std_error >= config.alpha;
  };
  auto record = [&](int left, int right, int size) {
    const InclusionProbability p = prob_of(size);
    const bool ok = accepted(p);
    out.trace.push_back({left, right, size, p.prob, p.std_error, ok});
    return ok;
  };

  int left = out.i_top;
  int right = out.i_bottom;
  if (right > 0) {
    if (record(left, right, right)) {
      left = right;
    } else {
      if (left > 0 && !record(left, right, left)) {
        // The product bracket overshoots; restart the bisection below it.
        right = left;
        left = 0;
      }
      while (right - left >= 2) {
        const int next = (left + right) / 2;
        if (record(left, right, next))
          left = next;
        else
          right = next;
      }
    }
  }

  out.set.assign(order.begin(), order.begin() + left);
  out.empty = left == 0;
  if (out.empty) log::info("no non-empty Vorob'ev quantile reaches the requested confidence");
  const InclusionProbability final_p = prob_of(left);
  out.inclusion_prob = final_p.prob;
  out.inclusion_se = final_p.std_error;
  out.rho = left > 0 ? cov(order[static_cast<std::size_t>(left - 1)]) : 1.0;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace orthant
