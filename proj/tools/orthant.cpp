#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "orthant/bench.hpp"
#include "orthant/error.hpp"
#include "orthant/grf.hpp"
#include "orthant/matrix_io.hpp"
#include "orthant/orthant.hpp"
#include "orthant/report.hpp"

namespace {

using nlohmann::json;
using namespace orthant;
namespace fs = std::filesystem;

constexpr int kExitConfig = 1;
constexpr int kExitEstimator = 2;
constexpr int kExitIo = 3;

// Errors raised before the estimator starts are configuration errors (exit 1);
// afterwards they are estimator errors (exit 2). I/O errors are always exit 3.
enum class Stage { Config, Run };

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

std::optional<double> parse_number(const std::string& s) {
  double x = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, x);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return x;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    const char* end = item.data() + item.size();
    const auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (item.empty() || ec != std::errc() || ptr != end)
      invalid(std::string("bad ") + what + " list '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) invalid(std::string("empty ") + what + " list");
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + out + "' for writing");
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write to '" + out + "' failed");
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::string format = "json";
  std::optional<double> budget_seconds;
};

void add_common(CLI::App* app, Common& c, const std::vector<std::string>& formats) {
  app->add_option("--seed", c.seed, "Root RNG seed")->capture_default_str();
  app->add_option("--jobs", c.jobs, "Worker threads across replications")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--out", c.out, "Output file (default stdout)");
  app->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember(formats))
      ->capture_default_str();
  app->add_option("--budget-seconds", c.budget_seconds,
                  "Wall-time budget; switches the cost model to measured timings")
      ->check(CLI::PositiveNumber);
}

json common_json(const Common& c) {
  return {{"seed", c.seed},
          {"jobs", c.jobs},
          {"format", c.format},
          {"budget_seconds", c.budget_seconds ? json(*c.budget_seconds) : json(nullptr)}};
}

// ------------------------------------------------------------ Gaussian input

struct SpecOpts {
  std::string cov;
  std::string mean = "0";
  int dim = 0;
  double var = 1.0;
  double rho = 0.0;
};

void add_spec_options(CLI::App* app, SpecOpts& s) {
  app->add_option("--cov", s.cov, "Covariance matrix file (CSV or binary)");
  app->add_option("--mean", s.mean, "Mean vector file, or a constant")->capture_default_str();
  app->add_option("--dim", s.dim, "Synthetic Gaussian: dimension")->check(CLI::NonNegativeNumber);
  app->add_option("--var", s.var, "Synthetic Gaussian: marginal variance")->capture_default_str();
  app->add_option("--rho", s.rho, "Synthetic Gaussian: common correlation")->capture_default_str();
}

bool has_spec(const SpecOpts& s) { return !s.cov.empty() || s.dim > 0; }

GaussianSpec load_spec(const SpecOpts& s) {
  Eigen::MatrixXd cov;
  if (!s.cov.empty()) {
    cov = io::read_matrix(s.cov);
    if (cov.rows() != cov.cols()) invalid("covariance must be square");
  } else if (s.dim > 0) {
    if (!(s.var > 0.0)) invalid("--var must be positive");
    if (!(s.rho > -1.0 / std::max(s.dim - 1, 1) && s.rho < 1.0) && s.dim > 1)
      invalid("--rho out of the positive definite range");
    cov = Eigen::MatrixXd::Constant(s.dim, s.dim, s.rho * s.var);
    cov.diagonal().setConstant(s.var);
  } else {
    invalid("no Gaussian given: use --cov/--mean or --dim/--mean/--var");
  }
  Eigen::VectorXd mean;
  if (const auto c = parse_number(s.mean)) {
    mean = Eigen::VectorXd::Constant(cov.rows(), *c);
  } else {
    mean = io::read_vector(s.mean);
    if (mean.size() != cov.rows()) invalid("mean and covariance sizes differ");
  }
  return GaussianSpec(std::move(mean), std::move(cov));
}

json spec_json(const SpecOpts& s) {
  if (!s.cov.empty()) return {{"cov", s.cov}, {"mean", s.mean}};
  return {{"dim", s.dim}, {"mean", s.mean}, {"var", s.var}, {"rho", s.rho}};
}

// ----------------------------------------------------------- estimator input

struct EstimatorOpts {
  std::string method = "GanMC";
  std::string active;
  int q = 0;
  int q0 = 0;
  int q_step = 10;
  double gamma = 1.0;
  int q_limit = 300;
  std::string select = "B";
  bool spatial = false;
  std::string spatial_file;
  bool grow = false;
  int qmc_points = 1 << 12;
  int qmc_randomizations = 12;
  std::string sequence = "lattice";
  int n0 = 50;
  int m0 = 10;
  int m_max = 200;
  int m = 0;
  long long n_outer = 0;
  double budget_samples = 10'000;
  std::string cost = "auto";
  long long max_tries = kDefaultMaxTries;
};

void add_estimator_options(CLI::App* app, EstimatorOpts& e, bool with_method, bool with_spatial_file) {
  if (with_method)
    app->add_option("--method", e.method, "GMC, GanMC or MC")
        ->check(CLI::IsMember({"GMC", "GanMC", "MC"}))
        ->capture_default_str();
  app->add_option("--active", e.active, "Explicit active dimensions, comma separated (0-based)");
  app->add_option("--q", e.q, "Fixed number of active dimensions (0 = adaptive)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--q0", e.q0, "Initial q of the adaptive search (0 = ceil(d^(1/3)))")
      ->capture_default_str();
  app->add_option("--q-step", e.q_step, "Increment of q per round")->capture_default_str();
  app->add_option("--gamma", e.gamma, "Stopping tolerance multiplier")->capture_default_str();
  app->add_option("--q-limit", e.q_limit, "Largest q tried")->capture_default_str();
  app->add_option("--select", e.select, "Selection weights: A = p_t, B = p_t (1 - p_t)")
      ->check(CLI::IsMember({"A", "B"}))
      ->capture_default_str();
  if (with_spatial_file)
    app->add_option("--spatial", e.spatial_file,
                    "Locations of the coordinates (one row each) for distance-weighted selection");
  else
    app->add_flag("--spatial", e.spatial, "Distance-weighted selection using the point locations");
  app->add_flag("--grow-dims", e.grow, "Grow the active set instead of redrawing it each round");
  app->add_option("--qmc-points", e.qmc_points, "QMC points per randomization")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--qmc-randomizations", e.qmc_randomizations, "QMC randomizations")
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  app->add_option("--sequence", e.sequence, "QMC point set")
      ->check(CLI::IsMember({"lattice", "sobol"}))
      ->capture_default_str();
  app->add_option("--n0", e.n0, "Pilot outer draws")->check(CLI::Range(2, 1 << 30))->capture_default_str();
  app->add_option("--m0", e.m0, "Pilot inner draws")->check(CLI::Range(2, 1 << 30))->capture_default_str();
  app->add_option("--m-max", e.m_max, "Upper clamp for m*")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--m", e.m, "Fixed inner sample count (0 = planner)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--n-outer", e.n_outer, "Fixed outer sample count (0 = from the budget)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--budget-samples", e.budget_samples,
                  "Budget in plain MC draws (ignored with --budget-seconds)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--cost", e.cost, "Cost model: analytic flop counts or timed measurements")
      ->check(CLI::IsMember({"auto", "analytic", "timed"}))
      ->capture_default_str();
  app->add_option("--max-tries", e.max_tries, "Rejection sampler proposal cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

EstimatorConfig build_estimator(const EstimatorOpts& e, const Common& c) {
  EstimatorConfig cfg;
  cfg.method = method_from_string(e.method);
  if (!e.active.empty()) cfg.active = parse_list<int>(e.active, "active dimension");
  if (e.q > 0) cfg.q_fixed = e.q;
  if (cfg.active && cfg.q_fixed) invalid("--active and --q are mutually exclusive");
  cfg.active_params.q0 = e.q0;
  cfg.active_params.q_step = e.q_step;
  cfg.active_params.gamma = e.gamma;
  cfg.active_params.q_limit = e.q_limit;
  cfg.active_params.method = selection_method_from_string(e.select);
  cfg.active_params.grow = e.grow;
  if (e.q0 < 0 || e.q_step < 1 || !(e.gamma > 0.0) || e.q_limit < 1)
    invalid("need q0 >= 0, q-step >= 1, gamma > 0 and q-limit >= 1");
  if (!e.spatial_file.empty()) cfg.spatial = io::read_matrix(e.spatial_file);
  if (e.spatial) cfg.spatial = Eigen::MatrixXd();
  cfg.qmc.n_points = e.qmc_points;
  cfg.qmc.n_randomizations = e.qmc_randomizations;
  cfg.qmc.kind = sequence_kind_from_string(e.sequence);

  cfg.nested.n0 = e.n0;
  cfg.nested.m0 = e.m0;
  cfg.nested.m_max = e.m_max;
  if (e.m > 0) cfg.nested.m_fixed = e.m;
  if (e.n_outer > 0) cfg.nested.n_fixed = e.n_outer;
  if (c.budget_seconds) {
    if (e.cost == "analytic") invalid("--budget-seconds needs measured costs, not --cost analytic");
    cfg.nested.budget = {SimBudget::Kind::Seconds, *c.budget_seconds};
    cfg.nested.cost_source = CostSource::Timed;
  } else {
    cfg.nested.budget = {SimBudget::Kind::EquivalentSamples, e.budget_samples};
    cfg.nested.cost_source = e.cost == "timed" ? CostSource::Timed : CostSource::Analytic;
  }
  cfg.max_tries = e.max_tries;
  return cfg;
}

void check_against(const EstimatorConfig& cfg, int dim) {
  if (cfg.active) {
    std::vector<char> seen(static_cast<std::size_t>(dim), 0);
    for (int i : *cfg.active) {
      if (i < 0 || i >= dim) invalid("active index " + std::to_string(i) + " out of range");
      if (seen[static_cast<std::size_t>(i)]++) invalid("active index " + std::to_string(i) + " repeated");
    }
  }
  if (cfg.q_fixed && *cfg.q_fixed > dim) invalid("--q exceeds the dimension");
  if (cfg.spatial && cfg.spatial->size() > 0 && cfg.spatial->rows() != dim)
    invalid("--spatial needs one location per coordinate");
}

json estimator_json(const EstimatorOpts& e) {
  return {{"method", e.method},
          {"active", e.active},
          {"q", e.q},
          {"q0", e.q0},
          {"q_step", e.q_step},
          {"gamma", e.gamma},
          {"q_limit", e.q_limit},
          {"select", e.select},
          {"spatial", e.spatial || !e.spatial_file.empty()},
          {"spatial_file", e.spatial_file},
          {"grow_dims", e.grow},
          {"qmc_points", e.qmc_points},
          {"qmc_randomizations", e.qmc_randomizations},
          {"sequence", e.sequence},
          {"n0", e.n0},
          {"m0", e.m0},
          {"m_max", e.m_max},
          {"m", e.m},
          {"n_outer", e.n_outer},
          {"budget_samples", e.budget_samples},
          {"cost", e.cost},
          {"max_tries", e.max_tries}};
}

// --------------------------------------------------------------- testcases

struct TestcaseOpts {
  int input_dim = 6;
  int d = 1000;
  std::string kernel = "matern52";
  double sigma2 = 8.0;
  std::string theta = "0.5,0.5,1,1,0.5,0.5";
  int n_condition = 60;
};

void add_testcase_options(CLI::App* app, TestcaseOpts& t, bool with_d) {
  app->add_option("--input-dim", t.input_dim, "Input dimension of the field")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  if (with_d)
    app->add_option("--d", t.d, "Number of Sobol points")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--kernel", t.kernel, "matern52 or gaussian")
      ->check(CLI::IsMember({"matern52", "gaussian"}))
      ->capture_default_str();
  app->add_option("--sigma2", t.sigma2, "Kernel variance")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--theta", t.theta, "Kernel ranges, comma separated")->capture_default_str();
  app->add_option("--n-condition", t.n_condition, "Number of conditioning values")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

bench::TestcaseParams build_testcase(const TestcaseOpts& t, std::uint64_t seed) {
  bench::TestcaseParams p;
  p.input_dim = t.input_dim;
  p.d = t.d;
  p.kernel.kind = kernel_kind_from_string(t.kernel);
  p.kernel.variance = t.sigma2;
  const auto theta = parse_list<double>(t.theta, "theta");
  p.kernel.ranges = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  p.n_condition = t.n_condition;
  p.seed = seed;
  return p;
}

json testcase_json(const TestcaseOpts& t) {
  return {{"input_dim", t.input_dim}, {"d", t.d},         {"kernel", t.kernel},
          {"sigma2", t.sigma2},       {"theta", t.theta}, {"n_condition", t.n_condition}};
}

// ---------------------------------------------------------------- commands

const char* const kProbCsvHeader =
    "method,p,pi_t,variance,std_error,q,m_star,acceptance_rate,time_s,efficiency,seed";

struct ProbCmd {
  Common common;
  SpecOpts spec;
  EstimatorOpts est;
  double t = 0.0;
};

int run_prob(const ProbCmd& cmd, Stage& stage) {
  const GaussianSpec spec = load_spec(cmd.spec);
  const EstimatorConfig cfg = build_estimator(cmd.est, cmd.common);
  check_against(cfg, spec.dim());
  json config = common_json(cmd.common);
  config["command"] = "prob";
  config["t"] = cmd.t;
  config["spec"] = spec_json(cmd.spec);
  config["estimator"] = estimator_json(cmd.est);

  stage = Stage::Run;
  const Estimate est = estimate_orthant(spec, cmd.t, cfg, cmd.common.seed);
  if (cmd.common.format == "csv") {
    std::ostringstream os;
    os << "# orthant " << report::version() << " seed=" << cmd.common.seed
       << " config=" << config.dump() << '\n'
       << kProbCsvHeader << '\n'
       << to_string(est.method) << ',' << fmt(est.p) << ',' << fmt(est.pi()) << ','
       << fmt(est.variance) << ',' << fmt(est.std_error()) << ',' << est.q() << ','
       << est.m_star() << ',' << fmt(est.acceptance_rate()) << ',' << fmt(est.wall_time) << ','
       << fmt(efficiency(est).value) << ',' << est.seed << '\n';
    emit(os.str(), cmd.common.out);
  } else {
    emit(report::to_json(est, config).dump(2) + "\n", cmd.common.out);
  }
  return 0;
}

json records_json(const std::vector<bench::BenchRecord>& records) {
  json arr = json::array();
  for (const auto& r : records)
    arr.push_back({{"method", r.method},
                   {"axis", r.axis},
                   {"axis_value", r.axis_value},
                   {"replication", r.replication},
                   {"estimate", r.estimate},
                   {"variance", r.variance},
                   {"time_s", r.time_s},
                   {"efficiency", std::isfinite(r.efficiency) ? json(r.efficiency) : json(nullptr)},
                   {"q", r.q},
                   {"m_star", r.m_star},
                   {"acceptance_rate", r.acceptance_rate},
                   {"seed", r.seed}});
  return arr;
}

json summary_json(const std::vector<bench::SummaryRow>& rows) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"method", r.method},
                   {"axis", r.axis},
                   {"axis_value", r.axis_value},
                   {"count", r.count},
                   {"eff_q25", num(r.eff_q25)},
                   {"eff_median", num(r.eff_median)},
                   {"eff_q75", num(r.eff_q75)},
                   {"estimate_median", r.estimate_median},
                   {"ratio_to_baseline", num(r.ratio_to_baseline)}});
  return arr;
}

void emit_bench(const std::vector<bench::BenchRecord>& records, const std::string& baseline,
                const json& config, const Common& common, const std::string& summary_path) {
  const auto summary = bench::summarize(records, baseline);
  if (common.format == "json") {
    const json j = {{"records", records_json(records)},
                    {"summary", summary_json(summary)},
                    {"baseline", baseline},
                    {"seed", common.seed},
                    {"config", config},
                    {"version", report::version()}};
    emit(j.dump(2) + "\n", common.out);
    return;
  }
  const std::string provenance = std::string("# orthant ") + std::string(report::version()) +
                                 " seed=" + std::to_string(common.seed) +
                                 " config=" + config.dump() + "\n";
  std::ostringstream rec;
  rec << provenance;
  bench::write_csv(rec, records);
  emit(rec.str(), common.out);

  std::ostringstream sum;
  sum << provenance;
  bench::write_summary_csv(sum, summary);
  std::string target = summary_path;
  if (target.empty() && !common.out.empty() && common.out != "-")
    target = fs::path(common.out).replace_extension(".summary.csv").string();
  if (target.empty())
    std::cerr << sum.str();
  else
    emit(sum.str(), target);
}

struct BenchMCmd {
  Common common;
  SpecOpts spec;
  TestcaseOpts testcase;
  EstimatorOpts est;
  double t = 5.0;
  std::string m_values = "1,2,3,5,10,20";
  int replications = 20;
  long long n_outer = 10'000;
  bool no_auto = false;
  std::string summary;
};

int run_bench_m(const BenchMCmd& cmd, Stage& stage) {
  bench::BenchMConfig cfg;
  cfg.t = cmd.t;
  cfg.m_values = parse_list<int>(cmd.m_values, "m");
  cfg.replications = cmd.replications;
  cfg.n_outer = cmd.n_outer;
  cfg.include_auto = !cmd.no_auto;
  cfg.base = build_estimator(cmd.est, cmd.common);
  cfg.jobs = cmd.common.jobs;
  cfg.seed = cmd.common.seed;

  json config = common_json(cmd.common);
  config["command"] = "bench-m";
  config["t"] = cmd.t;
  config["m_values"] = cfg.m_values;
  config["replications"] = cmd.replications;
  config["n_outer"] = cmd.n_outer;
  config["include_auto"] = cfg.include_auto;
  config["estimator"] = estimator_json(cmd.est);

  std::optional<GaussianSpec> spec;
  if (has_spec(cmd.spec)) {
    spec = load_spec(cmd.spec);
    config["spec"] = spec_json(cmd.spec);
  } else {
    const bench::Testcase tc = bench::make_testcase(build_testcase(cmd.testcase, cmd.common.seed));
    spec = tc.spec;
    if (cfg.base.spatial) cfg.base.spatial = tc.points;
    config["testcase"] = testcase_json(cmd.testcase);
  }
  if (cfg.base.spatial && cfg.base.spatial->size() == 0)
    invalid("--spatial needs the testcase locations; drop --cov/--dim");
  check_against(cfg.base, spec->dim());

  stage = Stage::Run;
  const auto records = bench::bench_vs_m(*spec, cfg);
  emit_bench(records, "GMC", config, cmd.common, cmd.summary);
  return 0;
}

struct BenchDCmd {
  Common common;
  TestcaseOpts testcase;
  EstimatorOpts est;
  double t = 5.0;
  std::string d_values = "100,300,1000";
  std::string methods = "MC,GMC,GanMC";
  int replications = 15;
  std::string summary;
};

int run_bench_d(const BenchDCmd& cmd, Stage& stage) {
  bench::BenchDConfig cfg;
  cfg.t = cmd.t;
  cfg.d_values = parse_list<int>(cmd.d_values, "d");
  cfg.methods.clear();
  for (const auto& name : split_names(cmd.methods)) cfg.methods.push_back(method_from_string(name));
  cfg.replications = cmd.replications;
  cfg.testcase = build_testcase(cmd.testcase, cmd.common.seed);
  cfg.base = build_estimator(cmd.est, cmd.common);
  cfg.jobs = cmd.common.jobs;
  cfg.seed = cmd.common.seed;

  json config = common_json(cmd.common);
  config["command"] = "bench-d";
  config["t"] = cmd.t;
  config["d_values"] = cfg.d_values;
  config["methods"] = cmd.methods;
  config["replications"] = cmd.replications;
  config["testcase"] = testcase_json(cmd.testcase);
  config["estimator"] = estimator_json(cmd.est);

  stage = Stage::Run;
  const auto records = bench::bench_vs_d(cfg);
  emit_bench(records, "MC", config, cmd.common, cmd.summary);
  return 0;
}

struct ConservativeCmd {
  Common common;
  EstimatorOpts est;
  std::string obs;
  int lhs = 0;
  std::string kernel = "matern52";
  double sigma2 = 0.5;
  std::string theta = "0.4,0.2";
  double prior_mean = 0.0;
  std::string grid = "2x100";
  std::string grid_file;
  double t = 1.0;
  double alpha = 0.95;
  double se_multiplier = 3.0;
  std::string mask;
};

// Design and observations: a CSV with the coordinates followed by the
// response, or a seeded LHS design with values drawn from the prior field.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> load_observations(const ConservativeCmd& cmd,
                                                              const Kernel& kernel) {
  const Eigen::Index dim = kernel.input_dim();
  if (!cmd.obs.empty()) {
    if (cmd.lhs > 0) invalid("--lhs conflicts with --obs");
    const Eigen::MatrixXd table = io::read_matrix(cmd.obs);
    if (table.cols() != dim + 1)
      invalid("observation CSV needs " + std::to_string(dim) + " coordinate columns and a response column");
    return {table.leftCols(dim), table.col(dim)};
  }
  if (cmd.lhs < 1) invalid("give --obs or --lhs");
  const Stream root = Stream(cmd.common.seed).named("observations");
  Rng design_rng = root.named("design").rng();
  Eigen::MatrixXd design = latin_hypercube(cmd.lhs, static_cast<int>(dim), design_rng);
  Rng value_rng = root.named("values").rng();
  Eigen::VectorXd z(cmd.lhs);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = value_rng.normal();
  const CholeskyFactor f = cholesky(kernel_eval(kernel, design, design));
  Eigen::VectorXd obs = (f.lower.triangularView<Eigen::Lower>() * z).array() + cmd.prior_mean;
  return {std::move(design), std::move(obs)};
}

// "<dim>x<n>": n points per axis on [0,1]^dim.
std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) invalid("--grid expects <dim>x<n>, e.g. 2x100");
  const auto dim = parse_number(s.substr(0, x));
  const auto n = parse_number(s.substr(x + 1));
  if (!dim || !n || *dim < 1 || *n < 2 || *dim != std::floor(*dim) || *n != std::floor(*n))
    invalid("--grid expects <dim>x<n> with dim >= 1 and n >= 2");
  return {static_cast<int>(*dim), static_cast<int>(*n)};
}

int run_conservative(const ConservativeCmd& cmd, Stage& stage) {
  Kernel kernel;
  kernel.kind = kernel_kind_from_string(cmd.kernel);
  kernel.variance = cmd.sigma2;
  const auto theta = parse_list<double>(cmd.theta, "theta");
  kernel.ranges = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));

  ConservativeConfig cc;
  cc.alpha = cmd.alpha;
  cc.se_multiplier = cmd.se_multiplier;
  cc.estimator = build_estimator(cmd.est, cmd.common);
  if (cc.estimator.active || cc.estimator.q_fixed)
    invalid("--active and --q do not apply to conservative sets");
  if (!(cmd.alpha > 0.0 && cmd.alpha < 1.0)) invalid("--alpha must lie in (0, 1)");

  const auto [design, obs] = load_observations(cmd, kernel);
  Eigen::MatrixXd grid;
  if (!cmd.grid_file.empty()) {
    grid = io::read_matrix(cmd.grid_file);
  } else {
    const auto [dim, n] = parse_grid(cmd.grid);
    if (dim != kernel.input_dim()) invalid("--grid dimension must match the kernel ranges");
    grid = uniform_grid(dim, n);
  }
  if (grid.cols() != kernel.input_dim()) invalid("grid columns must match the kernel ranges");
  PriorMean prior;
  prior.constant = cmd.prior_mean;

  json config = common_json(cmd.common);
  config["command"] = "conservative";
  config["t"] = cmd.t;
  config["alpha"] = cmd.alpha;
  config["se_multiplier"] = cmd.se_multiplier;
  config["kernel"] = {{"kind", cmd.kernel}, {"sigma2", cmd.sigma2}, {"theta", cmd.theta}};
  config["prior_mean"] = cmd.prior_mean;
  config["obs"] = cmd.obs;
  config["lhs"] = cmd.lhs;
  config["grid"] = cmd.grid_file.empty() ? cmd.grid : std::string();
  config["grid_file"] = cmd.grid_file;
  config["estimator"] = estimator_json(cmd.est);

  stage = Stage::Run;
  const GrfPosterior post = GrfPosterior::condition(kernel, prior, design, obs, grid);
  const ConservativeResult res = conservative_estimate(post, cmd.t, cc, cmd.common.seed);

  std::ostringstream mask;
  if (!cmd.mask.empty() || cmd.common.format == "csv") {
    const Eigen::VectorXd coverage = coverage_function(post, cmd.t);
    std::vector<char> in_set(static_cast<std::size_t>(post.size()), 0);
    for (int i : res.set) in_set[static_cast<std::size_t>(i)] = 1;
    mask << "# orthant " << report::version() << " seed=" << cmd.common.seed
         << " config=" << config.dump() << '\n';
    for (Eigen::Index k = 0; k < grid.cols(); ++k) mask << 'x' << k + 1 << ',';
    mask << "mean,sd,coverage,in_set\n";
    for (int i = 0; i < post.size(); ++i) {
      for (Eigen::Index k = 0; k < grid.cols(); ++k) mask << fmt(grid(i, k)) << ',';
      mask << fmt(post.mean()(i)) << ',' << fmt(std::sqrt(post.variance()(i))) << ','
           << fmt(coverage(i)) << ',' << int(in_set[static_cast<std::size_t>(i)]) << '\n';
    }
  }
  if (!cmd.mask.empty()) emit(mask.str(), cmd.mask);
  if (cmd.common.format == "csv")
    emit(mask.str(), cmd.common.out);
  else
    emit(report::to_json(res, config, cmd.common.seed).dump(2) + "\n", cmd.common.out);
  return 0;
}

struct MakeTestcaseCmd {
  Common common;
  TestcaseOpts testcase;
  std::string cov_format = "csv";
};

int run_make_testcase(const MakeTestcaseCmd& cmd, Stage& stage) {
  const bench::TestcaseParams params = build_testcase(cmd.testcase, cmd.common.seed);
  const fs::path dir = cmd.common.out.empty() ? fs::path(".") : fs::path(cmd.common.out);
  json config = common_json(cmd.common);
  config["command"] = "make-testcase";
  config["testcase"] = testcase_json(cmd.testcase);
  config["cov_format"] = cmd.cov_format;

  stage = Stage::Run;
  const bench::Testcase tc = bench::make_testcase(params);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  io::write_csv(dir / "mean.csv", tc.spec.mean());
  io::write_matrix(dir / ("cov." + cmd.cov_format), tc.spec.cov());
  io::write_csv(dir / "points.csv", tc.points);
  const json meta = {{"files", {"mean.csv", "cov." + cmd.cov_format, "points.csv"}},
                     {"d", tc.spec.dim()},
                     {"seed", cmd.common.seed},
                     {"config", config},
                     {"version", report::version()}};
  emit(meta.dump(2) + "\n", (dir / "testcase.json").string());
  return 0;
}

int report_error(int exit_code, std::string_view code, const std::string& message) {
  std::cout << report::error_json(code, message, exit_code).dump(2) << '\n';
  std::cerr << "orthant: " << message << '\n';
  return exit_code;
}

const char* const kFooter = R"(Exit codes: 0 success, 1 invalid configuration, 2 estimator failure, 3 I/O error.
Errors are also printed to stdout as {"error": {"code", "message", "exit_code"}, "version"}.

CSV schemas (fixed column order, '#' lines carry version, seed and config):
  prob --format csv:   method,p,pi_t,variance,std_error,q,m_star,acceptance_rate,time_s,efficiency,seed
  bench-m / bench-d:   method,axis,axis_value,replication,estimate,variance,time_s,efficiency,q,m_star,acceptance_rate,seed
  bench summary:       method,axis,axis_value,count,eff_q25,eff_median,eff_q75,estimate_median,ratio_to_baseline
  conservative mask:   x1,...,xk,mean,sd,coverage,in_set

Set ORTHANT_LOG=debug|info|warn|error|off for diagnostics on stderr.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exceedance and orthant probabilities of Gaussian vectors, with conservative excursion sets"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(orthant::report::version()));

  ProbCmd prob;
  auto* prob_app = app.add_subcommand("prob", "Estimate P(max X > t) for X ~ N(mean, cov)");
  add_common(prob_app, prob.common, {"json", "csv"});
  add_spec_options(prob_app, prob.spec);
  prob_app->add_option("-t,--threshold", prob.t, "Threshold t")->required();
  add_estimator_options(prob_app, prob.est, true, true);

  BenchMCmd bm;
  auto* bm_app = app.add_subcommand("bench-m", "Efficiency of the nested estimator against the inner count m");
  add_common(bm_app, bm.common, {"csv", "json"});
  bm.common.format = "csv";
  add_spec_options(bm_app, bm.spec);
  add_testcase_options(bm_app, bm.testcase, true);
  add_estimator_options(bm_app, bm.est, false, false);
  bm_app->add_option("-t,--threshold", bm.t, "Threshold t")->capture_default_str();
  bm_app->add_option("--m-values", bm.m_values, "Inner counts to sweep")->capture_default_str();
  bm_app->add_option("--replications", bm.replications, "Replications")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bm_app->add_option("--outer", bm.n_outer, "Outer draws per run, fixed across m")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bm_app->add_flag("--no-auto", bm.no_auto, "Skip the planner row (GanMC-auto)");
  bm_app->add_option("--summary", bm.summary, "Summary CSV path (default <out>.summary.csv, or stderr)");

  BenchDCmd bd;
  auto* bd_app = app.add_subcommand("bench-d", "Efficiency of MC, GMC and GanMC against the dimension");
  add_common(bd_app, bd.common, {"csv", "json"});
  bd.common.format = "csv";
  add_testcase_options(bd_app, bd.testcase, false);
  add_estimator_options(bd_app, bd.est, false, false);
  bd_app->add_option("-t,--threshold", bd.t, "Threshold t")->capture_default_str();
  bd_app->add_option("--d-values", bd.d_values, "Dimensions (prefixes of one Sobol design)")
      ->capture_default_str();
  bd_app->add_option("--methods", bd.methods, "Methods to compare")->capture_default_str();
  bd_app->add_option("--replications", bd.replications, "Replications per dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bd_app->add_option("--summary", bd.summary, "Summary CSV path (default <out>.summary.csv, or stderr)");

  ConservativeCmd cons;
  auto* cons_app = app.add_subcommand("conservative", "Conservative estimate of the excursion set {xi <= t}");
  add_common(cons_app, cons.common, {"json", "csv"});
  cons.est.budget_samples = 2000;  // A 100x100 grid stays well under 15 minutes.
  add_estimator_options(cons_app, cons.est, true, false);
  cons_app->add_option("--obs", cons.obs, "Observations CSV: coordinate columns then the response");
  cons_app->add_option("--lhs", cons.lhs, "Synthetic data: LHS design size, values drawn from the prior")
      ->check(CLI::NonNegativeNumber);
  cons_app->add_option("--kernel", cons.kernel, "matern52 or gaussian")
      ->check(CLI::IsMember({"matern52", "gaussian"}))
      ->capture_default_str();
  cons_app->add_option("--sigma2", cons.sigma2, "Kernel variance")->check(CLI::PositiveNumber)->capture_default_str();
  cons_app->add_option("--theta", cons.theta, "Kernel ranges, comma separated")->capture_default_str();
  cons_app->add_option("--prior-mean", cons.prior_mean, "Constant prior mean")->capture_default_str();
  cons_app->add_option("--grid", cons.grid, "Uniform grid <dim>x<n per axis> on [0,1]^dim")
      ->capture_default_str();
  cons_app->add_option("--grid-file", cons.grid_file, "Explicit grid, one point per row");
  cons_app->add_option("-t,--threshold", cons.t, "Threshold t")->capture_default_str();
  cons_app->add_option("--alpha", cons.alpha, "Confidence level")->capture_default_str();
  cons_app->add_option("--se-multiplier", cons.se_multiplier, "Accept when P - k SE >= alpha")
      ->capture_default_str();
  cons_app->add_option("--mask", cons.mask, "Also write the grid mask CSV here");

  MakeTestcaseCmd mt;
  auto* mt_app = app.add_subcommand("make-testcase", "Write mean.csv and cov.{csv,bin} of a conditioned Matern field");
  add_common(mt_app, mt.common, {"json"});
  mt_app->get_option("--out")->description("Output directory (default .)");
  add_testcase_options(mt_app, mt.testcase, true);
  mt_app->add_option("--cov-format", mt.cov_format, "Covariance file format")
      ->check(CLI::IsMember({"csv", "bin"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(kExitConfig, to_string(ErrorCode::InvalidArgument), e.what());
  }

  Stage stage = Stage::Config;
  try {
    if (*prob_app) return run_prob(prob, stage);
    if (*bm_app) return run_bench_m(bm, stage);
    if (*bd_app) return run_bench_d(bd, stage);
    if (*cons_app) return run_conservative(cons, stage);
    if (*mt_app) return run_make_testcase(mt, stage);
  } catch (const Error& e) {
    const int exit_code = e.code() == ErrorCode::Io ? kExitIo
                          : stage == Stage::Config  ? kExitConfig
                                                    : kExitEstimator;
    return report_error(exit_code, to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error(stage == Stage::Config ? kExitConfig : kExitEstimator, "Internal", e.what());
  }
  return kExitConfig;
}
