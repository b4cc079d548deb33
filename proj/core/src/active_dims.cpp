#include "orthant/active_dims.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "orthant/error.hpp"
#include "orthant/log.hpp"
#include "orthant/normal.hpp"

namespace orthant {

namespace {

Eigen::VectorXd raw_weights(const Eigen::VectorXd& p_t, SelectionMethod method) {
  if (method == SelectionMethod::A) return p_t;
  return (p_t.array() * (1.0 - p_t.array())).matrix();
}

/// Multiplies `delta` by the distances to point `idx` and renormalises.
void update_delta(Eigen::VectorXd& delta, const Eigen::MatrixXd& spatial, int idx) {
  delta.array() *= (spatial.rowwise() - spatial.row(idx)).rowwise().norm().array();
  const double norm = delta.norm();
  if (norm > 0.0) delta /= norm;
}

CdfEstimate core_cdf(const GaussianSpec& spec, double t, const std::vector<int>& idx,
                     const QmcBudget& budget, Rng rng) {
  const GaussianSpec sub = spec.restrict(idx);
  return mvn_cdf(sub, Eigen::VectorXd::Constant(sub.dim(), t), budget, rng);
}

}  // namespace

std::string_view to_string(SelectionMethod m) noexcept {
  return m == SelectionMethod::A ? "A" : "B";
}

SelectionMethod selection_method_from_string(std::string_view name) {
  if (name == "A" || name == "a") return SelectionMethod::A;
  if (name == "B" || name == "b") return SelectionMethod::B;
  throw Error(ErrorCode::InvalidArgument, "unknown selection method '" + std::string(name) + "'");
}

int ExcursionWeights::eligible() const noexcept {
  return static_cast<int>((weights.array() > 0.0).count());
}

ExcursionWeights excursion_probs(const GaussianSpec& spec, double t, SelectionMethod method) {
  const int d = spec.dim();
  ExcursionWeights out;
  out.method = method;
  out.p_t.resize(d);
  for (int i = 0; i < d; ++i) {
    const double var = spec.cov()(i, i);
    if (!(var > 0.0))
      throw Error(ErrorCode::ZeroVariance, "variance of coordinate " + std::to_string(i) + " is not positive");
    out.p_t(i) = norm_cdf((spec.mean()(i) - t) / std::sqrt(var));
  }
  out.weights = raw_weights(out.p_t, method);
  const double total = out.weights.sum();
  if (total > 0.0) {
    out.weights /= total;
  } else {
    log::warn("all excursion weights are zero; selecting active dimensions uniformly");
    out.weights.setConstant(1.0 / d);
    out.uniform_fallback = true;
  }
  return out;
}

Eigen::VectorXd next_draw_probabilities(const ExcursionWeights& weights,
                                        std::span<const int> chosen,
                                        const Eigen::MatrixXd* spatial) {
  Eigen::VectorXd w = weights.weights;
  if (spatial) {
    Eigen::VectorXd delta = Eigen::VectorXd::Ones(w.size());
    for (int idx : chosen) update_delta(delta, *spatial, idx);
    w.array() *= delta.array();
  }
  for (int idx : chosen) w(idx) = 0.0;
  const double total = w.sum();
  if (total > 0.0) w /= total;
  return w;
}

std::vector<int> select_dims(const ExcursionWeights& weights, int q, Rng& rng,
                             const Eigen::MatrixXd* spatial, std::span<const int> preselected) {
  const auto d = weights.weights.size();
  if (q < 1 || q > d)
    throw Error(ErrorCode::InvalidArgument, "q must lie in [1, d], got " + std::to_string(q));
  if (spatial && spatial->rows() != d)
    throw Error(ErrorCode::InvalidArgument, "spatial point list must have one row per dimension");
  if (static_cast<int>(preselected.size()) > q)
    throw Error(ErrorCode::InvalidArgument, "more preselected indices than q");

  std::vector<int> chosen(preselected.begin(), preselected.end());
  Eigen::VectorXd base = weights.weights;
  for (int idx : chosen) base(idx) = 0.0;
  if ((base.array() > 0.0).count() < q - static_cast<Eigen::Index>(chosen.size()))
    throw Error(ErrorCode::InsufficientMass,
                "only " + std::to_string((base.array() > 0.0).count()) +
                    " indices have positive weight, need " + std::to_string(q - chosen.size()));

  Eigen::VectorXd delta;
  if (spatial) {
    delta = Eigen::VectorXd::Ones(d);
    for (int idx : chosen) update_delta(delta, *spatial, idx);
  }

  while (static_cast<int>(chosen.size()) < q) {
    Eigen::VectorXd w = spatial ? Eigen::VectorXd(base.array() * delta.array()) : base;
    const double total = w.sum();
    if (!(total > 0.0))
      throw Error(ErrorCode::InsufficientMass, "no positive selection weight left");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (w(i) <= 0.0) continue;
      acc += w(i);
      pick = i;
      if (u < acc) break;
    }
    chosen.push_back(static_cast<int>(pick));
    base(pick) = 0.0;
    if (spatial) update_delta(delta, *spatial, static_cast<int>(pick));
  }
  return chosen;
}

ActiveSet explicit_active_set(const GaussianSpec& spec, double t, std::vector<int> indices,
                              const QmcBudget& budget, const Stream& stream) {
  ActiveSet out;
  out.method = "explicit";
  out.cdf = core_cdf(spec, t, indices, budget, stream.named("qmc").sub(0).rng());
  out.indices = std::move(indices);
  out.history.push_back({out.q(), out.pq(), 3.0 * out.cdf.std_error,
                         std::numeric_limits<double>::quiet_NaN()});
  return out;
}

ActiveSet fixed_q_active_set(const GaussianSpec& spec, double t, int q, SelectionMethod method,
                             const QmcBudget& budget, const Stream& stream,
                             const Eigen::MatrixXd* spatial) {
  const ExcursionWeights w = excursion_probs(spec, t, method);
  Rng sel = stream.named("select").sub(0).rng();
  ActiveSet out = explicit_active_set(spec, t, select_dims(w, std::min(q, w.eligible()), sel, spatial),
                                      budget, stream);
  out.method = std::string(to_string(method)) + (spatial ? "-spatial" : "");
  return out;
}

ActiveSet choose_q(const GaussianSpec& spec, double t, const ActiveDimsParams& params,
                   const QmcBudget& budget, const Stream& stream, const Eigen::MatrixXd* spatial) {
  if (params.q0 < 0 || params.q_step < 1 || !(params.gamma > 0.0))
    throw Error(ErrorCode::InvalidArgument, "active-dimension parameters need q0 >= 1, q_step >= 1, gamma > 0");

  const int d = spec.dim();
  const ExcursionWeights w = excursion_probs(spec, t, params.method);
  const int cap = w.eligible();
  const int q0 = std::clamp(params.q0 > 0 ? params.q0
                                          : static_cast<int>(std::ceil(std::cbrt(double(d)) - 1e-9)),
                            1, cap);

  const Stream sel_stream = stream.named("select");
  const Stream qmc_stream = stream.named("qmc");

  ActiveSet out;
  out.method = std::string(to_string(params.method)) + (spatial ? "-spatial" : "");
  {
    Rng sel = sel_stream.sub(0).rng();
    out.indices = select_dims(w, q0, sel, spatial);
    out.cdf = core_cdf(spec, t, out.indices, budget, qmc_stream.sub(0).rng());
    out.history.push_back({q0, out.pq(), 3.0 * out.cdf.std_error,
                           std::numeric_limits<double>::quiet_NaN()});
  }
  // Nothing to refine: every eligible dimension is active, or the core has
  // exactly zero mass and zero error.
  if (q0 == cap || (out.pq() == 0.0 && out.cdf.std_error == 0.0)) return out;

  for (int k = 1;; ++k) {
    const int qk = std::min(q0 + k * params.q_step, cap);
    Rng sel = sel_stream.sub(static_cast<std::uint64_t>(k)).rng();
    std::vector<int> idx = params.grow ? select_dims(w, qk, sel, spatial, out.indices)
                                       : select_dims(w, qk, sel, spatial);
    CdfEstimate cdf = core_cdf(spec, t, idx, budget, qmc_stream.sub(static_cast<std::uint64_t>(k)).rng());

    const double p_prev = out.pq();
    out.indices = std::move(idx);
    out.cdf = std::move(cdf);
    const double p_k = out.pq();
    const double err = 3.0 * out.cdf.std_error;
    const double delta = std::fabs(p_k - p_prev) / (1.0 + p_k);
    out.history.push_back({qk, p_k, err, delta});

    if (delta < params.gamma * err || (delta == 0.0 && err == 0.0) || qk == cap) break;
    if (qk > params.q_limit) {
      out.q_exhausted = true;
      break;
    }
  }
  return out;
}

}  // namespace orthant
