#include "orthant/gauss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "orthant/error.hpp"

namespace orthant {

namespace {

void check_indices(std::span<const int> idx, int d, bool allow_empty) {
  if (!allow_empty && idx.empty())
    throw Error(ErrorCode::InvalidArgument, "index set must be nonempty");
  std::vector<char> seen(static_cast<std::size_t>(d), 0);
  for (int i : idx) {
    if (i < 0 || i >= d)
      throw Error(ErrorCode::InvalidArgument,
                  "index " + std::to_string(i) + " out of range for dimension " + std::to_string(d));
    if (seen[static_cast<std::size_t>(i)]++)
      throw Error(ErrorCode::InvalidArgument, "repeated index " + std::to_string(i));
  }
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, std::span<const int> rows,
                          std::span<const int> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows.size(); ++i) out(i, j) = m(rows[i], cols[j]);
  return out;
}

}  // namespace

GaussianSpec::GaussianSpec(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  const auto d = mean_.size();
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  if (cov_.rows() != d || cov_.cols() != d) {
    std::ostringstream os;
    os << "covariance is " << cov_.rows() << "x" << cov_.cols() << " but mean has length " << d;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  if (!mean_.allFinite() || !cov_.allFinite())
    throw Error(ErrorCode::InvalidArgument, "non-finite entries in mean or covariance");
  const double scale = cov_.cwiseAbs().maxCoeff();
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale)
    throw Error(ErrorCode::InvalidArgument, "covariance is not symmetric");
  for (Eigen::Index i = 0; i < d; ++i)
    if (cov_(i, i) < 0.0) throw Error(ErrorCode::InvalidArgument, "negative variance on diagonal");
}

GaussianSpec GaussianSpec::restrict(std::span<const int> indices) const {
  check_indices(indices, dim(), false);
  Eigen::VectorXd m(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) m(i) = mean_(indices[i]);
  return GaussianSpec(std::move(m), submatrix(cov_, indices, indices));
}

CholeskyFactor cholesky(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    throw Error(ErrorCode::InvalidArgument, "cholesky needs a nonempty square matrix");

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite())
    return {llt.matrixL(), 0.0};

  const double mean_diag = cov.diagonal().mean();
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  for (double eps : std::array{1e-12, 1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += eps * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), eps * scale};
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "Cholesky factorization failed at maximum jitter 1e-6 * mean(diag)");
}

Eigen::VectorXd ConditionalGaussian::conditional_mean(const Eigen::VectorXd& anchor) const {
  return base_mean + regression * (anchor - anchor_mean);
}

Eigen::MatrixXd ConditionalGaussian::conditional_means(const Eigen::MatrixXd& anchors) const {
  Eigen::MatrixXd out = regression * (anchors.colwise() - anchor_mean);
  out.colwise() += base_mean;
  return out;
}

ConditionalGaussian condition_on(const GaussianSpec& spec, std::span<const int> active) {
  const int d = spec.dim();
  check_indices(active, d, false);

  ConditionalGaussian out;
  out.active.assign(active.begin(), active.end());
  std::vector<char> is_active(static_cast<std::size_t>(d), 0);
  for (int i : active) is_active[static_cast<std::size_t>(i)] = 1;
  for (int i = 0; i < d; ++i)
    if (!is_active[static_cast<std::size_t>(i)]) out.inactive.push_back(i);

  const auto& mu = spec.mean();
  const auto& cov = spec.cov();
  out.anchor_mean.resize(out.active.size());
  for (std::size_t i = 0; i < out.active.size(); ++i) out.anchor_mean(i) = mu(out.active[i]);
  out.base_mean.resize(out.inactive.size());
  for (std::size_t i = 0; i < out.inactive.size(); ++i) out.base_mean(i) = mu(out.inactive[i]);

  CholeskyFactor anchor_factor;
  try {
    anchor_factor = cholesky(submatrix(cov, out.active, out.active));
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularAnchor, std::string("active covariance: ") + e.what());
  }

  const Eigen::MatrixXd cross = submatrix(cov, out.inactive, out.active);
  // regression^T = cov(q)^{-1} cross^T
  Eigen::MatrixXd rt = cross.transpose();
  anchor_factor.lower.triangularView<Eigen::Lower>().solveInPlace(rt);
  anchor_factor.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(rt);
  out.regression = rt.transpose();

  out.cond_cov = submatrix(cov, out.inactive, out.inactive);
  if (!out.inactive.empty()) {
    out.cond_cov.noalias() -= out.regression * cross.transpose();
    out.cond_cov = 0.5 * (out.cond_cov + out.cond_cov.transpose()).eval();
  }
  return out;
}

Eigen::MatrixXd sample_mvn(const CholeskyFactor& factor, const Eigen::VectorXd& mean, int n,
                           Rng& rng) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be positive");
  const auto d = factor.lower.rows();
  if (mean.size() != d) throw Error(ErrorCode::InvalidArgument, "mean/factor size mismatch");
  Eigen::MatrixXd z(d, n);
  rng.fill_normal(z);
  Eigen::MatrixXd x = factor.lower.triangularView<Eigen::Lower>() * z;
  x.colwise() += mean;
  return x.transpose();
}

TruncatedSampler::TruncatedSampler(const GaussianSpec& spec, double t, Rng rng,
                                   long long max_tries)
    : factor_(cholesky(spec.cov())),
      mean_(spec.mean()),
      t_(t),
      rng_(rng),
      max_tries_(max_tries),
      buffer_(spec.dim(), 0) {
  if (max_tries < 1) throw Error(ErrorCode::InvalidArgument, "max_tries must be positive");
}

void TruncatedSampler::refill(Eigen::Index block) {
  const auto q = mean_.size();
  Eigen::MatrixXd z(q, block);
  rng_.fill_normal(z);
  Eigen::MatrixXd x = factor_.lower.triangularView<Eigen::Lower>() * z;
  x.colwise() += mean_;

  // Compact the unread tail of the buffer, then append accepted columns.
  const Eigen::Index keep = buffer_.cols() - head_;
  Eigen::MatrixXd next(q, keep + block);
  next.leftCols(keep) = buffer_.rightCols(keep);
  std::vector<long long> next_ord(ordinal_.begin() + head_, ordinal_.end());
  Eigen::Index filled = keep;
  for (Eigen::Index j = 0; j < block; ++j) {
    if (x.col(j).maxCoeff() <= t_) {
      next.col(filled++) = x.col(j);
      next_ord.push_back(generated_ + j + 1);
    }
  }
  generated_ += block;
  accepted_ += filled - keep;
  buffer_ = next.leftCols(filled);
  ordinal_ = std::move(next_ord);
  head_ = 0;
}

Eigen::MatrixXd TruncatedSampler::draw(Eigen::Index n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be positive");
  const long long start = generated_;
  while (buffer_.cols() - head_ < n) {
    if (generated_ - start >= max_tries_) {
      const long long tried = generated_ - consumed_;
      const long long got = static_cast<long long>(buffer_.cols() - head_);
      std::ostringstream os;
      os << "rejection sampler collected " << got << " of " << n << " draws in " << tried
         << " candidates (running acceptance " << (tried > 0 ? double(got) / double(tried) : 0.0)
         << "); max_tries = " << max_tries_;
      throw Error(ErrorCode::AcceptanceTooLow, os.str());
    }
    // Laplace-smoothed: blocks double while nothing is accepted.
    const double rate = (double(accepted_) + 1.0) / (double(generated_) + 2.0);
    const double missing = double(n - (buffer_.cols() - head_));
    const double want = std::ceil(1.1 * missing / rate);
    const Eigen::Index cap = std::max<Eigen::Index>(n, kRejectionBlockMax);
    refill(static_cast<Eigen::Index>(std::clamp(want, double(kRejectionBlockMin), double(cap))));
  }
  Eigen::MatrixXd out = buffer_.middleCols(head_, n);
  consumed_ = ordinal_[static_cast<std::size_t>(head_ + n - 1)];
  head_ += n;
  returned_ += n;
  return out;
}

double TruncatedSampler::acceptance_rate() const noexcept {
  return consumed_ > 0 ? double(returned_) / double(consumed_) : 0.0;
}

TruncatedDraws sample_truncated_below_t(const GaussianSpec& spec, double t, int n, Rng& rng,
                                        long long max_tries) {
  TruncatedSampler sampler(spec, t, Rng(rng()), max_tries);
  TruncatedDraws out;
  out.samples = sampler.draw(n).transpose();
  out.draws_used = sampler.candidates_consumed();
  out.acceptance_rate = sampler.acceptance_rate();
  return out;
}

}  // namespace orthant
