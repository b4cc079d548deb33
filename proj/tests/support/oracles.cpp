#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double product_exceedance(const std::vector<double>& mean, const std::vector<double>& sd, double t) {
  double prod = 1.0;
  for (std::size_t i = 0; i < mean.size(); ++i) prod *= phi((t - mean[i]) / sd[i]);
  return 1.0 - prod;
}

double equicorrelated_cdf(int d, double rho, double t) {
  if (rho <= 0.0) return std::pow(phi(t), d);
  const double a = std::sqrt(rho);
  const double b = std::sqrt(1.0 - rho);
  auto f = [&](double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) * std::pow(phi((t - a * z) / b), d);
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15,
      1e-14, &err);
}

namespace {

std::vector<int> complement(int d, const std::vector<int>& active) {
  std::vector<int> out;
  for (int i = 0; i < d; ++i)
    if (std::find(active.begin(), active.end(), i) == active.end()) out.push_back(i);
  return out;
}

Eigen::MatrixXd block(const Eigen::MatrixXd& m, const std::vector<int>& r, const std::vector<int>& c) {
  Eigen::MatrixXd out(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = m(r[i], c[j]);
  return out;
}

Eigen::MatrixXd lower_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("oracle: covariance not positive definite");
  return llt.matrixL();
}

}  // namespace

Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& cov, const std::vector<int>& active) {
  const auto rest = complement(static_cast<int>(cov.rows()), active);
  const Eigen::MatrixXd inv = block(cov, active, active).fullPivLu().inverse();
  return block(cov, rest, rest) - block(cov, rest, active) * inv * block(cov, active, rest);
}

NestedMoments brute_force_moments(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                  const std::vector<int>& active, double t, long long anchors,
                                  std::uint64_t seed) {
  const int d = static_cast<int>(cov.rows());
  const auto rest = complement(d, active);
  const Eigen::MatrixXd inv = block(cov, active, active).fullPivLu().inverse();
  const Eigen::MatrixXd regression = block(cov, rest, active) * inv;
  const Eigen::MatrixXd cond_lower = lower_factor(schur_complement(cov, active));

  MvnSampler joint(mean, cov, seed);
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;

  long long n = 0;
  double sum_g1 = 0.0, sum_g12 = 0.0;
  Eigen::VectorXd xa(active.size()), xr(rest.size()), ma(active.size()), mr(rest.size()), z(rest.size());
  for (std::size_t i = 0; i < active.size(); ++i) ma(i) = mean(active[i]);
  for (std::size_t i = 0; i < rest.size(); ++i) mr(i) = mean(rest[i]);
  while (n < anchors) {
    const Eigen::VectorXd x = joint.draw();
    for (std::size_t i = 0; i < active.size(); ++i) xa(i) = x(active[i]);
    if (xa.maxCoeff() > t) continue;
    for (std::size_t i = 0; i < rest.size(); ++i) xr(i) = x(rest[i]);
    // The joint draw supplies the first conditional draw; the second is
    // sampled from the closed-form conditional law.
    const double g1 = xr.maxCoeff() > t ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(gen);
    const Eigen::VectorXd y2 = mr + regression * (xa - ma) + cond_lower * z;
    const double g2 = y2.maxCoeff() > t ? 1.0 : 0.0;
    sum_g1 += g1;
    sum_g12 += g1 * g2;
    ++n;
  }
  NestedMoments out;
  out.anchors = n;
  out.R = sum_g1 / static_cast<double>(n);
  out.A = out.R * (1.0 - out.R);
  out.B = out.R - sum_g12 / static_cast<double>(n);
  return out;
}

int brute_force_prefix(std::vector<double> coverage, double alpha) {
  std::stable_sort(coverage.begin(), coverage.end(), std::greater<>());
  int best = 0;
  double prod = 1.0;
  for (std::size_t k = 0; k < coverage.size(); ++k) {
    prod *= coverage[k];
    if (prod >= alpha) best = static_cast<int>(k + 1);
  }
  return best;
}

MvnSampler::MvnSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov, std::uint64_t seed)
    : mean_(std::move(mean)), lower_(lower_factor(cov)), gen_(seed) {}

Eigen::VectorXd MvnSampler::draw() {
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(gen_);
  return mean_ + lower_ * z;
}

}  // namespace oracle
