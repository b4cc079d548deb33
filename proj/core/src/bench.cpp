#include "orthant/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "orthant/error.hpp"
#include "orthant/qmc.hpp"

namespace orthant::bench {

namespace {

constexpr const char* kHeader =
    "method,axis,axis_value,replication,estimate,variance,time_s,efficiency,q,m_star,"
    "acceptance_rate,seed";

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

double parse_double(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::Io, "malformed number '" + std::string(s) + "' in benchmark CSV");
  return x;
}

template <class Int>
Int parse_int(std::string_view s) {
  Int x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::Io, "malformed integer '" + std::string(s) + "' in benchmark CSV");
  return x;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

BenchRecord composed_record(const std::string& method, double axis_value, int rep,
                            const ActiveSet& core, double core_time, const RemainderEstimate& rq,
                            std::uint64_t seed) {
  BenchRecord r;
  r.method = method;
  r.axis = "m";
  r.axis_value = axis_value;
  r.replication = rep;
  r.estimate = compose(core.pq(), rq.value);
  r.variance = compose_variance(core.pq_variance(), rq.variance, core.pq(), rq.value);
  r.time_s = core_time + rq.wall_time;
  r.efficiency = efficiency(r.variance, r.time_s).value;
  r.q = core.q();
  r.m_star = rq.m_inner;
  r.acceptance_rate = rq.acceptance_rate;
  r.seed = seed;
  return r;
}

}  // namespace

std::string csv_header() { return kHeader; }

void write_csv(std::ostream& os, std::span<const BenchRecord> records) {
  os << kHeader << '\n';
  for (const BenchRecord& r : records)
    os << r.method << ',' << r.axis << ',' << fmt(r.axis_value) << ',' << r.replication << ','
       << fmt(r.estimate) << ',' << fmt(r.variance) << ',' << fmt(r.time_s) << ','
       << fmt(r.efficiency) << ',' << r.q << ',' << r.m_star << ',' << fmt(r.acceptance_rate)
       << ',' << r.seed << '\n';
}

std::vector<BenchRecord> read_csv(std::istream& is) {
  std::string line;
  // Leading '#' lines carry provenance (version, seed, config).
  while (std::getline(is, line) && line.starts_with('#')) {
  }
  if (!is || line != kHeader)
    throw Error(ErrorCode::Io, "benchmark CSV header does not match");
  std::vector<BenchRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 12) throw Error(ErrorCode::Io, "benchmark CSV row has " + std::to_string(f.size()) + " fields");
    BenchRecord r;
    r.method = std::string(f[0]);
    r.axis = std::string(f[1]);
    r.axis_value = parse_double(f[2]);
    r.replication = parse_int<int>(f[3]);
    r.estimate = parse_double(f[4]);
    r.variance = parse_double(f[5]);
    r.time_s = parse_double(f[6]);
    r.efficiency = parse_double(f[7]);
    r.q = parse_int<int>(f[8]);
    r.m_star = parse_int<int>(f[9]);
    r.acceptance_rate = parse_double(f[10]);
    r.seed = parse_int<std::uint64_t>(f[11]);
    out.push_back(std::move(r));
  }
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(std::span<const BenchRecord> records, const std::string& baseline) {
  std::vector<std::pair<std::string, double>> keys;
  std::map<std::pair<std::string, double>, std::vector<const BenchRecord*>> groups;
  for (const BenchRecord& r : records) {
    auto key = std::make_pair(r.method, r.axis_value);
    auto& g = groups[key];
    if (g.empty()) keys.push_back(key);
    g.push_back(&r);
  }
  std::map<double, double> base_median;
  std::vector<SummaryRow> rows;
  for (const auto& key : keys) {
    const auto& g = groups[key];
    std::vector<double> eff, est;
    for (const BenchRecord* r : g) {
      eff.push_back(r->efficiency);
      est.push_back(r->estimate);
    }
    SummaryRow row;
    row.method = key.first;
    row.axis = g.front()->axis;
    row.axis_value = key.second;
    row.count = static_cast<int>(g.size());
    row.eff_q25 = quantile(eff, 0.25);
    row.eff_median = quantile(eff, 0.5);
    row.eff_q75 = quantile(eff, 0.75);
    row.estimate_median = quantile(est, 0.5);
    if (row.method == baseline) base_median[row.axis_value] = row.eff_median;
    rows.push_back(row);
  }
  // For the m axis the baseline sits at m = 1; compare every row against it.
  const bool single_base = base_median.size() == 1;
  for (SummaryRow& row : rows) {
    auto it = single_base ? base_median.begin() : base_median.find(row.axis_value);
    row.ratio_to_baseline = it != base_median.end() && it->second > 0.0
                                ? row.eff_median / it->second
                                : std::numeric_limits<double>::quiet_NaN();
  }
  return rows;
}

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
  os << "method,axis,axis_value,count,eff_q25,eff_median,eff_q75,estimate_median,ratio_to_baseline\n";
  for (const SummaryRow& r : rows)
    os << r.method << ',' << r.axis << ',' << fmt(r.axis_value) << ',' << r.count << ','
       << fmt(r.eff_q25) << ',' << fmt(r.eff_median) << ',' << fmt(r.eff_q75) << ','
       << fmt(r.estimate_median) << ',' << fmt(r.ratio_to_baseline) << '\n';
}

Kernel TestcaseParams::default_kernel() {
  Kernel k;
  k.kind = KernelKind::Matern52Tensor;
  k.variance = 8.0;
  k.ranges.resize(6);
  k.ranges << 0.5, 0.5, 1.0, 1.0, 0.5, 0.5;
  return k;
}

Testcase make_testcase(const TestcaseParams& params) {
  if (params.d < 1 || params.n_condition < 0)
    throw Error(ErrorCode::InvalidArgument, "testcase needs d >= 1 and n_condition >= 0");
  if (params.kernel.input_dim() != params.input_dim)
    throw Error(ErrorCode::InvalidArgument, "kernel ranges must match the input dimension");
  const Eigen::MatrixXd points =
      lowdiscrepancy_points({params.input_dim, SequenceKind::Sobol, 0}, params.d);

  const Stream root = Stream(params.seed).named("testcase");
  Rng design_rng = root.named("design").rng();
  Eigen::MatrixXd design(params.n_condition, params.input_dim);
  for (Eigen::Index i = 0; i < design.size(); ++i) design.data()[i] = design_rng.uniform();

  // Standard normal values, not prior draws: with sigma2 = 8 a prior
  // realisation pushes the mean past t = 5 and makes p indistinguishable from 1.
  Eigen::VectorXd values(params.n_condition);
  Rng value_rng = root.named("values").rng();
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = value_rng.normal();
  const GrfPosterior post =
      GrfPosterior::condition(params.kernel, PriorMean{}, design, values, points);
  return {GaussianSpec(post.mean(), post.full_covariance()), points};
}

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  if (n <= 0) return;
  jobs = std::clamp(jobs, 1, n);
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<BenchRecord> bench_vs_m(const GaussianSpec& spec, const BenchMConfig& config) {
  if (config.replications < 1 || config.n_outer < 1 || config.m_values.empty())
    throw Error(ErrorCode::InvalidArgument, "bench-m needs replications >= 1, n_outer >= 1 and m values");
  for (int m : config.m_values)
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "m values must be positive");

  const Stream root(config.seed);
  const auto core_start = std::chrono::steady_clock::now();
  const ActiveSet core = select_core(spec, config.t, config.base, root.named("core"));
  const double core_time = seconds_since(core_start);

  const std::size_t per_rep = 1 + config.m_values.size() + (config.include_auto ? 1 : 0);
  std::vector<BenchRecord> out(per_rep * static_cast<std::size_t>(config.replications));

  parallel_for(config.replications, config.jobs, [&](int rep) {
    const std::uint64_t seed = root.named("bench-m").sub(static_cast<std::uint64_t>(rep)).key();
    const Stream rs = Stream(seed).named("rq");
    std::size_t slot = per_rep * static_cast<std::size_t>(rep);

    const RemainderEstimate gmc =
        remainder_mc(spec, core.indices, config.t, config.n_outer, rs, config.base.max_tries);
    out[slot++] = composed_record("GMC", 1.0, rep, core, core_time, gmc, seed);

    NestedConfig nc = config.base.nested;
    nc.n_fixed = config.n_outer;
    for (int m : config.m_values) {
      nc.m_fixed = m;
      const AnmcOutcome res = remainder_anmc(spec, core.indices, config.t, nc, rs, config.base.max_tries);
      out[slot++] = composed_record("GanMC", m, rep, core, core_time, res.estimate, seed);
    }
    if (config.include_auto) {
      nc.m_fixed.reset();
      const AnmcOutcome res = remainder_anmc(spec, core.indices, config.t, nc, rs, config.base.max_tries);
      out[slot++] = composed_record("GanMC-auto", res.estimate.m_inner, rep, core, core_time,
                                    res.estimate, seed);
    }
  });
  return out;
}

std::vector<BenchRecord> bench_vs_d(const BenchDConfig& config) {
  if (config.d_values.empty() || config.replications < 1 || config.methods.empty())
    throw Error(ErrorCode::InvalidArgument, "bench-d needs d values, methods and replications >= 1");
  const int d_max = *std::max_element(config.d_values.begin(), config.d_values.end());
  if (*std::min_element(config.d_values.begin(), config.d_values.end()) < 1)
    throw Error(ErrorCode::InvalidArgument, "d values must be positive");

  TestcaseParams tp = config.testcase;
  tp.d = d_max;
  const Testcase big = make_testcase(tp);
  const Stream root = Stream(config.seed).named("bench-d");

  std::vector<BenchRecord> out;
  for (int d : config.d_values) {
    std::vector<int> prefix(static_cast<std::size_t>(d));
    std::iota(prefix.begin(), prefix.end(), 0);
    const GaussianSpec spec = big.spec.restrict(prefix);
    const std::size_t per_rep = config.methods.size();
    std::vector<BenchRecord> rows(per_rep * static_cast<std::size_t>(config.replications));

    parallel_for(config.replications, config.jobs, [&](int rep) {
      const std::uint64_t seed =
          root.sub(static_cast<std::uint64_t>(d)).sub(static_cast<std::uint64_t>(rep)).key();
      for (std::size_t k = 0; k < per_rep; ++k) {
        EstimatorConfig cfg = config.base;
        cfg.method = config.methods[k];
        if (cfg.spatial) cfg.spatial = big.points.topRows(d);
        const Estimate est = estimate_orthant(spec, config.t, cfg, seed);
        BenchRecord& r = rows[per_rep * static_cast<std::size_t>(rep) + k];
        r.method = std::string(to_string(cfg.method));
        r.axis = "d";
        r.axis_value = d;
        r.replication = rep;
        r.estimate = est.p;
        r.variance = est.variance;
        r.time_s = est.wall_time;
        r.efficiency = efficiency(est).value;
        r.q = est.q();
        r.m_star = est.m_star();
        r.acceptance_rate = est.acceptance_rate();
        r.seed = seed;
      }
    });
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

}  // namespace orthant::bench
