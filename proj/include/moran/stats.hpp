#ifndef MORAN_STATS_HPP
#define MORAN_STATS_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "moran/combinatorics.hpp"
#include "moran/gillespie.hpp"
#include "moran/model.hpp"
#include "moran/random.hpp"
#include "moran/replicates.hpp"

namespace moran {

/// E[prod_{A in blocks} [A]_t] relative to `reference`.
struct MomentObservable {
  PartialPartition blocks;
  TypeCode reference = 0;

  std::string id() const { return blocks.to_string(); }
};

struct MomentEstimate {
  std::string id;
  double time = 0.0;
  double mean = 0.0;
  double se = 0.0;
  std::size_t replicates = 0;
};

struct SampleSummary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

/// Mean, sample standard deviation (n - 1) and sd / sqrt(n); pairwise sums.
SampleSummary summarize(std::span<const double> samples);

struct ReplicateOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  bool strict = false;
  std::size_t workers = 0;  // 0: worker_count(strict); ignored in strict mode
};

/// samples[r][k] = statistic(trajectory of replicate r)[k]. Replicate r always
/// uses replicate_stream(seed, r).
template <class Statistic>
std::vector<std::vector<double>> run_replicates(const ModelParams& params, const PopulationState& z0,
                                                std::span<const double> t_grid,
                                                std::span<const Observable> tracked,
                                                const ReplicateOptions& options, Statistic&& statistic,
                                                SimulateOptions sim = {});

/// Sample mean and SE of each moment at each grid time.
std::vector<MomentEstimate> estimate_moments(const ModelParams& params, const PopulationState& z0,
                                             std::span<const MomentObservable> observables,
                                             std::span<const double> t_grid,
                                             const ReplicateOptions& options);

struct Prediction {
  std::string id;
  double time = 0.0;
  double value = 0.0;
};

enum class Verdict { kPass, kFail, kExactMismatch };

std::string to_string(Verdict v);

struct ComparisonRow {
  std::string id;
  double time = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double prediction = 0.0;
  double z = 0.0;
  Verdict verdict = Verdict::kPass;
};

/// z = (estimate - prediction) / se. With se == 0 the row passes iff the values
/// agree to 1e-12 relative, and is otherwise an exact mismatch.
ComparisonRow compare_one(const std::string& id, double time, double estimate, double se,
                          double prediction, double z_threshold);

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::size_t passed = 0;
  std::size_t failed = 0;
};

/// Matches estimates to predictions by (id, time); a missing key throws ModelError.
ComparisonReport compare(std::span<const MomentEstimate> estimates,
                         std::span<const Prediction> predictions, double z_threshold);

/// CSV: observable_id,time,estimate,se,prediction,z,verdict.
void write_comparison_csv(std::ostream& os, const ComparisonReport& report);

/// Bootstrap standard error of a statistic of the replicate sample matrix.
/// `statistic` maps (samples, resampled row indices) to a scalar.
template <class Statistic>
double bootstrap_se(const std::vector<std::vector<double>>& samples, Statistic&& statistic,
                    std::size_t resamples, std::uint64_t seed);

struct NonclosureResult {
  double derivative = 0.0;     // finite-difference estimate of d/dt E[[1][2][3]]
  double derivative_se = 0.0;
  double step = 0.0;
  ComparisonRow printed_bracket;    // ten-moment bracket
  ComparisonRow corrected_bracket;  // (b/N) E[N[1][23] + N[2][13] + N[3][12] - 3[1][2][3]]
  std::vector<MomentEstimate> constituents;  // moments at time t
};

struct NonclosureOptions {
  ReplicateOptions replicates;
  double step = 0.0;  // 0 selects 0.1 * min(t, 1)
  double z_threshold = 3.0;
  std::size_t bootstrap_resamples = 200;
};

/// Monte-Carlo check of the three-site resampling derivative. The derivative is
/// a symmetric difference of per-path values at t +/- h; each bracket is
/// evaluated from moment estimates at t; errors are combined by bootstrap over
/// replicates (the two sides come from the same paths).
NonclosureResult three_site_nonclosure_check(const ModelParams& params, const PopulationState& z0,
                                             TypeCode xstar, double t, const NonclosureOptions& options);

template <class Statistic>
std::vector<std::vector<double>> run_replicates(const ModelParams& params, const PopulationState& z0,
                                                std::span<const double> t_grid,
                                                std::span<const Observable> tracked,
                                                const ReplicateOptions& options, Statistic&& statistic,
                                                SimulateOptions sim) {
  check_time_grid(t_grid);
  std::vector<std::vector<double>> samples(options.replicates);
  const std::size_t workers =
      options.strict ? 1 : (options.workers ? options.workers : worker_count(false));
  for_each_replicate_on(workers, options.replicates, [&](std::size_t r) {
    Rng rng = replicate_stream(options.seed, r);
    samples[r] = statistic(simulate(params, z0, t_grid, tracked, rng, sim));
  });
  return samples;
}

template <class Statistic>
double bootstrap_se(const std::vector<std::vector<double>>& samples, Statistic&& statistic,
                    std::size_t resamples, std::uint64_t seed) {
  if (resamples < 2 || samples.size() < 2) return 0.0;
  std::vector<double> values(resamples);
  std::vector<std::size_t> rows(samples.size());
  Rng rng = replicate_stream(seed, 0xB007ull);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& i : rows) i = uniform_index(rng, samples.size());
    values[b] = statistic(samples, std::span<const std::size_t>(rows));
  }
  return summarize(values).sd;
}

}  // namespace moran

#endif  // MORAN_STATS_HPP
