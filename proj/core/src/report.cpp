#include "orthant/report.hpp"

#include <algorithm>
#include <cmath>

namespace orthant::report {

namespace {

using nlohmann::json;

/// JSON has no infinities; non-finite values become null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json cost_json(const CostModel& c) {
  return {{"c0", c.c0}, {"c", c.c}, {"alpha", c.alpha}, {"beta", c.beta}};
}

json plan_json(const AnmcPlan& p) {
  return {{"m_star", p.m_star},
          {"m_tilde", number(p.m_tilde)},
          {"epsilon", p.epsilon},
          {"a_hat", p.a_hat},
          {"b_hat", p.b_hat},
          {"n_star", p.n_star},
          {"predicted_ratio", p.predicted_ratio},
          {"eta", p.eta},
          {"efficiency_condition", p.efficiency_condition},
          {"m_clamped", p.m_clamped}};
}

json core_json(const ActiveSet& a) {
  json history = json::array();
  for (const ActiveStep& s : a.history)
    history.push_back({{"q", s.q}, {"p_hat", s.p_hat}, {"err", s.err}, {"delta", number(s.delta)}});
  return {{"q", a.q()},
          {"indices", a.indices},
          {"pq", a.pq()},
          {"pq_std_error", a.cdf.std_error},
          {"selection", a.method},
          {"q_exhausted", a.q_exhausted},
          {"degenerate_bounds", a.cdf.degenerate_bounds},
          {"qmc",
           {{"sequence", to_string(a.cdf.kind)},
            {"n_points", a.cdf.n_points},
            {"n_randomizations", a.cdf.n_randomizations}}},
          {"history", std::move(history)}};
}

json remainder_json(const RemainderEstimate& r) {
  return {{"method", r.method},
          {"value", r.value},
          {"variance", r.variance},
          {"n_outer", r.n_outer},
          {"m_inner", r.m_inner},
          {"acceptance_rate", r.acceptance_rate},
          {"budget_exhausted", r.budget_exhausted},
          {"empty", r.empty_remainder},
          {"timing", {{"wall_time", r.wall_time}}}};
}

}  // namespace

std::string_view version() noexcept { return ORTHANT_VERSION; }

nlohmann::json to_json(const Estimate& est, const nlohmann::json& config) {
  const Efficiency eff = efficiency(est);
  json j = {{"method", to_string(est.method)},
            {"p", est.p},
            {"pi_t", est.pi()},
            {"variance", est.variance},
            {"std_error", est.std_error()},
            {"q", est.q()},
            {"m_star", est.m_star()},
            {"acceptance_rate", est.acceptance_rate()},
            {"time_s", est.wall_time},
            {"efficiency", number(eff.value)},
            {"efficiency_infinite", eff.infinite},
            {"seed", est.seed},
            {"config", config},
            {"version", version()}};
  if (est.core) j["core"] = core_json(*est.core);
  if (est.remainder) j["remainder"] = remainder_json(*est.remainder);
  if (est.plan) j["plan"] = plan_json(*est.plan);
  if (est.cost) j["cost"] = cost_json(*est.cost);
  if (est.method == Method::MC) j["mc_samples"] = est.mc_samples;
  return j;
}

nlohmann::json to_json(const ConservativeResult& res, const nlohmann::json& config,
                       std::uint64_t seed) {
  json trace = json::array();
  for (const DichotomyStep& s : res.trace)
    trace.push_back({{"i_left", s.i_left},
                     {"i_right", s.i_right},
                     {"evaluated", s.evaluated},
                     {"prob", s.prob},
                     {"std_error", s.std_error},
                     {"accepted", s.accepted}});
  return {{"alpha", res.alpha},
          {"rho", res.rho},
          {"size", res.set.size()},
          {"set", res.set},
          {"inclusion_prob", res.inclusion_prob},
          {"inclusion_se", res.inclusion_se},
          {"i_top", res.i_top},
          {"i_bottom", res.i_bottom},
          {"empty", res.empty},
          {"trace", std::move(trace)},
          {"time_s", res.wall_time},
          {"seed", seed},
          {"config", config},
          {"version", version()}};
}

nlohmann::json error_json(std::string_view code, std::string_view message, int exit_code) {
  return {{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}},
          {"version", version()}};
}

nlohmann::json strip_timing(nlohmann::json j) {
  if (j.is_object()) {
    for (std::string_view key : kTimingKeys) j.erase(std::string(key));
    for (auto& [key, value] : j.items()) value = strip_timing(std::move(value));
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_timing(std::move(value));
  }
  return j;
}

}  // namespace orthant::report
