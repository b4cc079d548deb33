#include "orthant/remainder.hpp"

#include <algorithm>
#include <string>

#include "orthant/error.hpp"

namespace orthant {

namespace {

std::vector<int> validated_active(const GaussianSpec& spec, std::span<const int> active) {
  std::vector<int> idx(active.begin(), active.end());
  if (idx.empty()) throw Error(ErrorCode::InvalidArgument, "active set is empty");
  for (int i : idx)
    if (i < 0 || i >= spec.dim())
      throw Error(ErrorCode::InvalidArgument, "active index " + std::to_string(i) + " out of range");
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw Error(ErrorCode::InvalidArgument, "active indices repeat");
  return idx;
}

bool remainder_is_empty(const GaussianSpec& spec, std::span<const int> active) {
  return static_cast<int>(validated_active(spec, active).size()) == spec.dim();
}

RemainderEstimate empty_estimate(const char* method) {
  RemainderEstimate out;
  out.method = method;
  out.empty_remainder = true;
  out.n_outer = 0;
  return out;
}

RemainderEstimate to_estimate(const NestedResult& r, const char* method) {
  RemainderEstimate out;
  out.value = std::clamp(r.value, 0.0, 1.0);
  out.variance = r.variance;
  out.n_outer = r.n_outer;
  out.m_inner = r.m_inner;
  out.acceptance_rate = r.acceptance_rate;
  out.wall_time = r.seconds;
  out.method = method;
  out.budget_exhausted = r.budget_exhausted;
  return out;
}

}  // namespace

GaussianNestedSampler::GaussianNestedSampler(const GaussianSpec& spec, std::span<const int> active,
                                             double t, Rng outer, long long max_tries)
    : spec_(spec), active_(active.begin(), active.end()), t_(t), outer_seed_(outer),
      max_tries_(max_tries) {
  validated_active(spec, active);
}

void GaussianNestedSampler::setup() {
  outer_.emplace(spec_.restrict(active_), t_, outer_seed_, max_tries_);
  cond_ = condition_on(spec_, active_);
  cond_lower_ = cholesky(cond_.cond_cov).lower;
  clear();
}

void GaussianNestedSampler::clear() {
  anchors_.resize(static_cast<Eigen::Index>(active_.size()), 0);
  means_.resize(cond_lower_.rows(), 0);
}

void GaussianNestedSampler::draw_outer(Eigen::Index count) {
  if (!outer_) throw Error(ErrorCode::InvalidArgument, "sampler used before setup()");
  Eigen::MatrixXd fresh = outer_->draw(count);
  Eigen::MatrixXd joined(fresh.rows(), anchors_.cols() + count);
  joined << anchors_, fresh;
  anchors_.swap(joined);
}

void GaussianNestedSampler::prepare_inner(Eigen::Index begin, Eigen::Index end) {
  if (means_.cols() != anchors_.cols()) means_.conservativeResize(cond_lower_.rows(), anchors_.cols());
  means_.middleCols(begin, end - begin) = cond_.conditional_means(anchors_.middleCols(begin, end - begin));
}

void GaussianNestedSampler::draw_inner(Eigen::Index begin, Eigen::Index end, std::span<Rng> rngs,
                                       std::span<double> g) {
  const Eigen::Index k = end - begin;
  const Eigen::Index r = cond_lower_.rows();
  z_.resize(r, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Rng& rng = rngs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < r; ++j) z_(j, i) = rng.normal();
  }
  Eigen::MatrixXd y = cond_lower_.triangularView<Eigen::Lower>() * z_;
  y += means_.middleCols(begin, k);
  for (Eigen::Index i = 0; i < k; ++i)
    g[static_cast<std::size_t>(i)] = (y.col(i).array() > t_).any() ? 1.0 : 0.0;
}

std::optional<CostModel> GaussianNestedSampler::analytic_costs() const {
  const double q = static_cast<double>(active_.size());
  const double r = static_cast<double>(spec_.dim()) - q;
  const double acc = std::max(acceptance_rate(), 1e-12);
  CostModel cost;
  cost.c0 = q * q * q / 3.0 + r * q * q + r * r * r / 3.0;
  cost.c = (q * (q + 1.0) / 2.0 + (kNormalFlops + 1.0) * q) / acc;
  cost.alpha = r * q + r;
  cost.beta = r * (r + 1.0) / 2.0 + (kNormalFlops + 1.0) * r;
  return cost;
}

double GaussianNestedSampler::acceptance_rate() const {
  return outer_ ? outer_->acceptance_rate() : 0.0;
}

RemainderEstimate remainder_mc(const GaussianSpec& spec, std::span<const int> active, double t,
                               long long n, const Stream& stream, long long max_tries) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "remainder sample count must be positive");
  if (remainder_is_empty(spec, active)) return empty_estimate("MC");
  GaussianNestedSampler sampler(spec, active, t, stream.named("remainder/outer").rng(), max_tries);
  return to_estimate(run_mc(sampler, n, stream.named("remainder/inner")), "MC");
}

RemainderEstimate remainder_mc_for(const GaussianSpec& spec, std::span<const int> active, double t,
                                   double seconds, const Stream& stream, long long max_tries) {
  if (remainder_is_empty(spec, active)) return empty_estimate("MC");
  GaussianNestedSampler sampler(spec, active, t, stream.named("remainder/outer").rng(), max_tries);
  return to_estimate(run_mc_for(sampler, seconds, stream.named("remainder/inner")), "MC");
}

AnmcOutcome remainder_anmc(const GaussianSpec& spec, std::span<const int> active, double t,
                           const NestedConfig& config, const Stream& stream, long long max_tries) {
  AnmcOutcome out;
  if (remainder_is_empty(spec, active)) {
    out.estimate = empty_estimate("anMC");
    return out;
  }
  GaussianNestedSampler sampler(spec, active, t, stream.named("remainder/outer").rng(), max_tries);
  const NestedResult r = run_anmc(sampler, config, stream.named("remainder/inner"));
  out.estimate = to_estimate(r, "anMC");
  out.plan = r.plan.value_or(AnmcPlan{});
  out.cost = r.cost.value_or(CostModel{});
  return out;
}

PilotStats calibrate_costs(const GaussianSpec& spec, std::span<const int> active, double t, int n0,
                           int m0, const Stream& stream, long long max_tries) {
  if (remainder_is_empty(spec, active))
    throw Error(ErrorCode::InvalidArgument, "no inactive coordinates to calibrate");
  GaussianNestedSampler sampler(spec, active, t, stream.named("remainder/outer").rng(), max_tries);
  return run_pilot(sampler, n0, m0, stream.named("remainder/inner"));
}

}  // namespace orthant
