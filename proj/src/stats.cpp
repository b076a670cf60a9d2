#include "moran/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace moran {

SampleSummary summarize(std::span<const double> samples) {
  SampleSummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  s.mean = pairwise_sum(samples) / static_cast<double>(samples.size());
  if (samples.size() < 2) return s;
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - s.mean) * (samples[i] - s.mean);
  s.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(samples.size() - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(samples.size()));
  return s;
}

std::vector<MomentEstimate> estimate_moments(const ModelParams& params, const PopulationState& z0,
                                             std::span<const MomentObservable> observables,
                                             std::span<const double> t_grid,
                                             const ReplicateOptions& options) {
  if (options.replicates < 2) throw ModelError("moment estimation needs at least 2 replicates");
  std::vector<Observable> tracked;
  std::vector<std::vector<std::size_t>> slots(observables.size());
  for (std::size_t k = 0; k < observables.size(); ++k)
    for (SiteSet a : observables[k].blocks.blocks()) {
      const Observable ob{a, observables[k].reference};
      auto it = std::find(tracked.begin(), tracked.end(), ob);
      if (it == tracked.end()) it = tracked.insert(tracked.end(), ob);
      slots[k].push_back(static_cast<std::size_t>(it - tracked.begin()));
    }
  const std::size_t nt = t_grid.size();
  const std::size_t no = observables.size();
  const auto samples = run_replicates(params, z0, t_grid, tracked, options, [&](const Trajectory& tr) {
    std::vector<double> v(nt * no);
    for (std::size_t ti = 0; ti < nt; ++ti)
      for (std::size_t k = 0; k < no; ++k) {
        double prod = 1.0;
        for (std::size_t s : slots[k]) prod *= static_cast<double>(tr.samples[ti][s].value);
        v[ti * no + k] = prod;
      }
    return v;
  });
  std::vector<MomentEstimate> out;
  std::vector<double> column(samples.size());
  for (std::size_t ti = 0; ti < nt; ++ti)
    for (std::size_t k = 0; k < no; ++k) {
      for (std::size_t r = 0; r < samples.size(); ++r) column[r] = samples[r][ti * no + k];
      const SampleSummary s = summarize(column);
      out.push_back({observables[k].id(), t_grid[ti], s.mean, s.se, s.count});
    }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return "pass";
    case Verdict::kFail:
      return "fail";
    case Verdict::kExactMismatch:
      return "exact-mismatch";
  }
  return "fail";
}

ComparisonRow compare_one(const std::string& id, double time, double estimate, double se,
                          double prediction, double z_threshold) {
  ComparisonRow row{id, time, estimate, se, prediction, 0.0, Verdict::kPass};
  if (se > 0.0) {
    row.z = (estimate - prediction) / se;
    row.verdict = std::abs(row.z) <= z_threshold ? Verdict::kPass : Verdict::kFail;
  } else {
    const double tol = 1e-12 * std::max({1.0, std::abs(estimate), std::abs(prediction)});
    if (std::abs(estimate - prediction) > tol) {
      row.z = estimate > prediction ? INFINITY : -INFINITY;
      row.verdict = Verdict::kExactMismatch;
    }
  }
  return row;
}

ComparisonReport compare(std::span<const MomentEstimate> estimates,
                         std::span<const Prediction> predictions, double z_threshold) {
  std::map<std::pair<std::string, double>, double> lookup;
  for (const auto& p : predictions) lookup[{p.id, p.time}] = p.value;
  ComparisonReport report;
  for (const auto& e : estimates) {
    auto it = lookup.find({e.id, e.time});
    if (it == lookup.end())
      throw ModelError("no prediction for " + e.id + " at t = " + std::to_string(e.time));
    report.rows.push_back(compare_one(e.id, e.time, e.mean, e.se, it->second, z_threshold));
    (report.rows.back().verdict == Verdict::kPass ? report.passed : report.failed) += 1;
  }
  return report;
}

void write_comparison_csv(std::ostream& os, const ComparisonReport& report) {
  os << "# moran-moments comparison v1\n";
  os << "observable_id,time,estimate,se,prediction,z,verdict\n";
  const auto old = os.precision(17);
  for (const auto& r : report.rows)
    os << "\"" << r.id << "\"," << r.time << "," << r.estimate << "," << r.se << "," << r.prediction
       << "," << r.z << "," << to_string(r.verdict) << "\n";
  os.precision(old);
}

namespace {

// Per-replicate columns of the nonclosure statistic.
enum Column : std::size_t {
  kMinus,  // [1][2][3] at t - h
  kPlus,   // [1][2][3] at t + h
  kS1,
  kS2,
  kS3,
  kS12,
  kS13,
  kS23,
  kS123,
  kColumns
};

double printed_bracket(const std::vector<double>& v, double n) {
  const double s1 = v[kS1], s2 = v[kS2], s3 = v[kS3];
  return s1 * v[kS23] * n + s2 * v[kS13] * n + s3 * v[kS12] * n + s1 * v[kS12] * v[kS13] +
         s2 * v[kS12] * v[kS23] + s3 * v[kS13] * v[kS23] - 3 * s1 * s2 * s3 -
         s1 * s1 * v[kS123] - s2 * s2 * v[kS123] - s3 * s3 * v[kS123];
}

double corrected_bracket(const std::vector<double>& v, double n) {
  return n * (v[kS1] * v[kS23] + v[kS2] * v[kS13] + v[kS3] * v[kS12]) - 3 * v[kS1] * v[kS2] * v[kS3];
}

}  // namespace

NonclosureResult three_site_nonclosure_check(const ModelParams& params, const PopulationState& z0,
                                             TypeCode xstar, double t, const NonclosureOptions& options) {
  if (params.sites() != 3) throw ModelError("the three-site check needs n = 3");
  if (params.has_mutation()) throw ModelError("the three-site check assumes mu = 0");
  if (options.replicates.replicates < 2) throw ModelError("need at least 2 replicates");
  const double h = options.step > 0.0 ? options.step : 0.1 * std::min(t, 1.0);
  if (!(t > h)) throw ModelError("time must exceed the finite-difference step");
  const double n = static_cast<double>(params.population);
  const double scale = params.b / n;

  const std::vector<Observable> tracked{
      {SiteSet::of({1}), xstar},    {SiteSet::of({2}), xstar},    {SiteSet::of({3}), xstar},
      {SiteSet::of({1, 2}), xstar}, {SiteSet::of({1, 3}), xstar}, {SiteSet::of({2, 3}), xstar},
      {SiteSet::of({1, 2, 3}), xstar}};
  const std::vector<double> grid{0.0, t - h, t, t + h};
  const auto samples = run_replicates(params, z0, grid, tracked, options.replicates, [](const Trajectory& tr) {
    auto val = [&](std::size_t ti, std::size_t k) { return static_cast<double>(tr.samples[ti][k].value); };
    std::vector<double> v(kColumns);
    v[kMinus] = val(1, 0) * val(1, 1) * val(1, 2);
    v[kPlus] = val(3, 0) * val(3, 1) * val(3, 2);
    for (std::size_t k = 0; k < 7; ++k) v[kS1 + k] = val(2, k);
    return v;
  });

  const std::size_t reps = samples.size();
  auto mean_of = [&](auto&& f, std::span<const std::size_t> rows) {
    std::vector<double> vals(rows.empty() ? reps : rows.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = f(samples[rows.empty() ? i : rows[i]]);
    return pairwise_sum(vals) / static_cast<double>(vals.size());
  };
  auto derivative = [&](const std::vector<double>& v) { return (v[kPlus] - v[kMinus]) / (2 * h); };
  auto printed = [&](const std::vector<double>& v) { return scale * printed_bracket(v, n); };
  auto corrected = [&](const std::vector<double>& v) { return scale * corrected_bracket(v, n); };

  NonclosureResult out;
  out.step = h;
  std::vector<double> column(reps);
  for (std::size_t r = 0; r < reps; ++r) column[r] = derivative(samples[r]);
  const SampleSummary d = summarize(column);
  out.derivative = d.mean;
  out.derivative_se = d.se;

  auto check = [&](const std::string& id, auto&& bracket, std::uint64_t stream) {
    const double value = mean_of(bracket, {});
    const double se = bootstrap_se(
        samples,
        [&](const std::vector<std::vector<double>>&, std::span<const std::size_t> rows) {
          return mean_of(derivative, rows) - mean_of(bracket, rows);
        },
        options.bootstrap_resamples, options.replicates.seed ^ stream);
    ComparisonRow row = compare_one(id, t, out.derivative - value, se, 0.0, options.z_threshold);
    row.estimate = out.derivative;
    row.prediction = value;
    return row;
  };
  out.printed_bracket = check("d/dt[1][2][3] vs ten-moment bracket", printed, 1);
  out.corrected_bracket = check("d/dt[1][2][3] vs four-moment bracket", corrected, 2);

  const std::vector<std::pair<std::string, std::function<double(const std::vector<double>&)>>> parts{
      {"{1}|{2,3}", [](const auto& v) { return v[kS1] * v[kS23]; }},
      {"{2}|{1,3}", [](const auto& v) { return v[kS2] * v[kS13]; }},
      {"{3}|{1,2}", [](const auto& v) { return v[kS3] * v[kS12]; }},
      {"[1][1,2][1,3]", [](const auto& v) { return v[kS1] * v[kS12] * v[kS13]; }},
      {"[2][1,2][2,3]", [](const auto& v) { return v[kS2] * v[kS12] * v[kS23]; }},
      {"[3][1,3][2,3]", [](const auto& v) { return v[kS3] * v[kS13] * v[kS23]; }},
      {"{1}|{2}|{3}", [](const auto& v) { return v[kS1] * v[kS2] * v[kS3]; }},
      {"[1]^2[1,2,3]", [](const auto& v) { return v[kS1] * v[kS1] * v[kS123]; }},
      {"[2]^2[1,2,3]", [](const auto& v) { return v[kS2] * v[kS2] * v[kS123]; }},
      {"[3]^2[1,2,3]", [](const auto& v) { return v[kS3] * v[kS3] * v[kS123]; }},
  };
  for (const auto& [id, f] : parts) {
    for (std::size_t r = 0; r < reps; ++r) column[r] = f(samples[r]);
    const SampleSummary s = summarize(column);
    out.constituents.push_back({id, t, s.mean, s.se, s.count});
  }
  return out;
}

}  // namespace moran
