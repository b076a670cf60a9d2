#include "moran/run.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "moran/ctmc_oracle.hpp"
#include "moran/deterministic.hpp"
#include "moran/gillespie.hpp"
#include "moran/moment_hierarchy.hpp"
#include "moran/stats.hpp"

namespace moran {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Output {
 public:
  Output(const RunConfig& config, RunResult& result) : dir_(config.output), result_(result) {
    fs::create_directories(dir_);
  }

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir_ / name);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    result_.artifacts.push_back(name);
    return os;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  RunResult& result_;
};

void tally(RunResult& result, const ComparisonReport& report) {
  result.passed += report.passed;
  result.failed += report.failed;
}

void write_moments_csv(std::ostream& os, const std::string& kind,
                       const std::vector<std::tuple<double, std::string, double>>& rows) {
  os << "# moran-moments " << kind << " v1\n";
  os << "time,observable_id,value\n";
  const auto old = os.precision(17);
  for (const auto& [t, id, v] : rows) os << t << ",\"" << id << "\"," << v << "\n";
  os.precision(old);
}

std::vector<Observable> tracked_blocks(const std::vector<PartialPartition>& pps, TypeCode ref) {
  std::vector<Observable> out;
  for (const auto& pp : pps)
    for (SiteSet a : pp.blocks())
      if (std::find(out.begin(), out.end(), Observable{a, ref}) == out.end()) out.push_back({a, ref});
  return out;
}

std::vector<Prediction> hierarchy_predictions(const ModelParams& params, const PopulationState& z0,
                                              TypeCode ref, const std::vector<PartialPartition>& pps,
                                              std::span<const double> grid) {
  const MomentSystem sys = build_system(params, ref, params.all_sites());
  const MomentSolution sol = solve(sys, z0, grid);
  std::vector<Prediction> out;
  for (std::size_t ti = 0; ti < grid.size(); ++ti)
    for (const auto& pp : pps) out.push_back({pp.to_string(), grid[ti], sol.value(ti, pp)});
  return out;
}

std::vector<Prediction> oracle_predictions(const ModelParams& params, const PopulationState& z0,
                                           TypeCode ref, const std::vector<PartialPartition>& pps,
                                           std::span<const double> grid) {
  const CtmcOracle oracle(params);
  const Eigen::VectorXd p0 = oracle.point_mass(z0);
  std::vector<Prediction> out;
  for (double t : grid) {
    const Eigen::VectorXd p = oracle.distribution(p0, t);
    for (const auto& pp : pps) out.push_back({pp.to_string(), t, oracle.moment(p, pp, ref)});
  }
  return out;
}

void run_simulate(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  const auto tracked = tracked_blocks(c.observable_partitions(), c.reference());
  Rng rng = replicate_stream(c.seed, 0);
  const Trajectory traj = simulate(params, c.initial_state(), c.t_grid, tracked, rng);
  auto os = out.open("trajectory.csv");
  write_trajectory_csv(os, params.types, traj);
  result.summary["events"] = traj.events;
}

void run_hierarchy(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  const MomentSystem sys = build_system(params, c.reference(), params.all_sites());
  {
    auto os = out.open("hierarchy_matrix.csv");
    write_system_csv(os, sys);
  }
  const MomentSolution sol = solve(sys, c.initial_state(), c.t_grid);
  std::vector<std::tuple<double, std::string, double>> rows;
  for (std::size_t ti = 0; ti < sol.times.size(); ++ti)
    for (std::size_t i = 0; i < sys.size(); ++i)
      rows.emplace_back(sol.times[ti], sys.index[i].to_string(), sol.values[ti][i]);
  auto os = out.open("hierarchy_moments.csv");
  write_moments_csv(os, "hierarchy", rows);
  result.summary["system_size"] = sys.size();
  result.summary["nonzero_coefficients"] = sys.coefficients.nonZeros();
}

void run_oracle(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  const auto pps = c.observable_partitions();
  const auto preds = oracle_predictions(params, c.initial_state(), c.reference(), pps, c.t_grid);
  std::vector<std::tuple<double, std::string, double>> rows;
  for (const auto& p : preds) rows.emplace_back(p.time, p.id, p.value);
  auto os = out.open("oracle_moments.csv");
  write_moments_csv(os, "oracle", rows);
  result.summary["states"] = StateIndex::count_states(params.types.size(), params.population);
}

void run_deterministic(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  const TypeSpace& space = params.types;
  const Distribution omega0 = from_population(space, c.initial_state());
  const auto path = integrate(space, params.rho, omega0, c.t_grid);
  {
    auto os = out.open("distribution_path.csv");
    write_distribution_path_csv(os, space, c.t_grid, path);
  }
  double worst = 0.0;
  for (const auto& pp : enumerate_partial_partitions(params.all_sites())) {
    if (pp.support() != params.all_sites()) continue;
    for (const auto& omega : path) worst = std::max(worst, product_derivative_check(space, params.rho, omega, pp));
  }
  result.summary["product_derivative_max_residual"] = worst;
  (worst <= 1e-9 ? result.passed : result.failed) += 1;

  if (params.b == 0.0 && !params.has_mutation() && !c.lln.populations.empty()) {
    LlnOptions opts;
    opts.replicates = c.replicates;
    opts.seed = c.seed;
    opts.strict = c.strict;
    opts.grid_points = c.lln.grid_points;
    const LlnResult lln = lln_experiment(params, omega0, c.lln.populations, c.lln.time, opts);
    auto os = out.open("lln.csv");
    write_lln_csv(os, lln);
    json rows = json::array();
    for (const auto& r : lln.rows) rows.push_back({{"N", r.population}, {"median_sup_distance", r.median_sup_distance}});
    result.summary["lln"] = {{"rows", rows},
                             {"fitted_exponent", lln.fitted_exponent},
                             {"monotone_decreasing", lln.monotone_decreasing}};
    (lln.monotone_decreasing ? result.passed : result.failed) += 1;
  }
}

void run_compare(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  const PopulationState z0 = c.initial_state();
  const TypeCode ref = c.reference();
  const auto pps = c.observable_partitions();
  std::vector<Prediction> preds;
  if (params.b == 0.0) {
    preds = hierarchy_predictions(params, z0, ref, pps, c.t_grid);
    result.summary["prediction_source"] = "hierarchy";
  } else {
    preds = oracle_predictions(params, z0, ref, pps, c.t_grid);
    result.summary["prediction_source"] = "oracle";
  }
  std::vector<MomentObservable> obs;
  for (const auto& pp : pps) obs.push_back({pp, ref});
  const auto est = estimate_moments(params, z0, obs, c.t_grid, {c.replicates, c.seed, c.strict});
  const auto report = compare(est, preds, c.z_threshold);
  auto os = out.open("comparison.csv");
  write_comparison_csv(os, report);
  tally(result, report);
}

void run_ld(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  const PopulationState z0 = c.initial_state();
  const TypeCode ref = c.reference();
  const TwoSiteMeanLd closed(params, z0, ref);
  const std::vector<Observable> tracked{
      {SiteSet::of({1}), ref}, {SiteSet::of({2}), ref}, {SiteSet::of({1, 2}), ref}};
  const double n = static_cast<double>(params.population);
  const std::size_t nt = c.t_grid.size();
  const auto samples = run_replicates(
      params, z0, c.t_grid, tracked, {c.replicates, c.seed, c.strict}, [&](const Trajectory& tr) {
        std::vector<double> v(3 * nt);
        for (std::size_t ti = 0; ti < nt; ++ti) {
          const double s1 = static_cast<double>(tr.samples[ti][0].value);
          const double s2 = static_cast<double>(tr.samples[ti][1].value);
          const double s12 = static_cast<double>(tr.samples[ti][2].value);
          v[3 * ti] = s12;
          v[3 * ti + 1] = s1 * s2;
          v[3 * ti + 2] = n * s12 - s1 * s2;
        }
        return v;
      });
  const char* ids[3] = {"{1,2}", "{1}|{2}", "LD"};
  std::vector<MomentEstimate> est;
  std::vector<Prediction> preds;
  std::vector<double> column(samples.size());
  for (std::size_t ti = 0; ti < nt; ++ti) {
    const TwoSiteMeans m = closed.at(c.t_grid[ti]);
    const double values[3] = {m.joint, m.product, m.ld};
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t r = 0; r < samples.size(); ++r) column[r] = samples[r][3 * ti + k];
      const SampleSummary s = summarize(column);
      est.push_back({ids[k], c.t_grid[ti], s.mean, s.se, s.count});
      preds.push_back({ids[k], c.t_grid[ti], values[k]});
    }
  }
  const auto report = compare(est, preds, c.z_threshold);
  auto os = out.open("comparison.csv");
  write_comparison_csv(os, report);
  tally(result, report);
  result.summary["ld_decay_rate"] = closed.decay_rate();
}

void run_nonclosure(const RunConfig& c, Output& out, RunResult& result) {
  const ModelParams params = c.params();
  NonclosureOptions opts;
  opts.replicates = {c.replicates, c.seed, c.strict};
  opts.step = c.derivative_step;
  opts.z_threshold = c.z_threshold;
  const double t = c.t_grid.back();
  const auto r = three_site_nonclosure_check(params, c.initial_state(), c.reference(), t, opts);
  ComparisonReport report;
  for (const auto& row : {r.printed_bracket, r.corrected_bracket}) {
    report.rows.push_back(row);
    (row.verdict == Verdict::kPass ? report.passed : report.failed) += 1;
  }
  {
    auto os = out.open("comparison.csv");
    write_comparison_csv(os, report);
  }
  std::vector<std::tuple<double, std::string, double>> rows;
  for (const auto& e : r.constituents) rows.emplace_back(e.time, e.id, e.mean);
  auto os = out.open("constituents.csv");
  write_moments_csv(os, "nonclosure-constituents", rows);
  tally(result, report);
  result.summary["derivative"] = r.derivative;
  result.summary["derivative_se"] = r.derivative_se;
  result.summary["step"] = r.step;
  // The hierarchy refuses resampling.
  try {
    build_system(params, c.reference(), params.all_sites());
    result.summary["hierarchy_refuses_resampling"] = false;
  } catch (const ModelError& e) {
    result.summary["hierarchy_refuses_resampling"] = true;
    result.summary["hierarchy_refusal"] = e.what();
  }
}

}  // namespace

RunResult run(const RunConfig& config) {
  RunResult result;
  result.summary = json::object();
  result.summary["experiment"] = config.experiment;
  result.summary["seed"] = config.seed;
  result.summary["replicates"] = config.replicates;
  Output out(config, result);
  try {
    const std::string& e = config.experiment;
    if (e == "simulate") run_simulate(config, out, result);
    else if (e == "hierarchy") run_hierarchy(config, out, result);
    else if (e == "oracle") run_oracle(config, out, result);
    else if (e == "deterministic") run_deterministic(config, out, result);
    else if (e == "compare") run_compare(config, out, result);
    else if (e == "ld") run_ld(config, out, result);
    else if (e == "nonclosure") run_nonclosure(config, out, result);
    else throw ConfigError("unknown experiment '" + e + "'");
    result.exit_status = result.failed ? kExitComparisonFailed : kExitOk;
  } catch (const ConfigError& err) {
    result.exit_status = kExitConfigError;
    result.summary["error"] = err.what();
  } catch (const ModelError& err) {
    result.exit_status = kExitPreconditionRefused;
    result.summary["error"] = err.what();
  }
  result.summary["passed"] = result.passed;
  result.summary["failed"] = result.failed;
  result.summary["exit_status"] = result.exit_status;
  result.summary["artifacts"] = result.artifacts;
  std::ofstream os(out.dir() / "summary.json");
  os << result.summary.dump(2) << "\n";
  return result;
}

}  // namespace moran
