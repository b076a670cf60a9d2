#ifndef MORAN_DETERMINISTIC_HPP
#define MORAN_DETERMINISTIC_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "moran/combinatorics.hpp"
#include "moran/model.hpp"

namespace moran {

inline constexpr std::uint64_t kMaxDenseTypes = 4096;

/// Dense measure on X, indexed by TypeCode.
struct Distribution {
  std::vector<double> weights;

  double mass() const;
  std::size_t size() const { return weights.size(); }
};

/// Zero measure of the right size; throws if |X| exceeds the dense cap.
Distribution zero_distribution(const TypeSpace& space);

/// Normalized counts z / N.
Distribution from_population(const TypeSpace& space, const PopulationState& z);

/// pi_A . omega, stored on X: entry x holds the mass of all types agreeing
/// with x on A (so it is constant along the fibres of the projection).
std::vector<double> marginal_on(const TypeSpace& space, const Distribution& omega, SiteSet a);

/// R_G(omega) = (pi_G . omega) (x) (pi_{complement G} . omega) / |omega|; R_G(0) = 0.
Distribution recombinator(const TypeSpace& space, const Distribution& omega, SiteSet g);

/// sum_G rho_G / 2 (R_G(omega) - omega).
Distribution deterministic_rhs(const TypeSpace& space, std::span<const double> rho,
                               const Distribution& omega);

/// Dormand-Prince integration of the recombination flow, rel. tol 1e-10.
std::vector<Distribution> integrate(const TypeSpace& space, std::span<const double> rho,
                                    const Distribution& omega0, std::span<const double> t_grid);

/// (x) over blocks of pi_{A_j}.omega, evaluated on X. Blocks must partition S.
std::vector<double> block_product_measure(const TypeSpace& space, const Distribution& omega,
                                          const PartialPartition& blocks);

/// d/dt of the block product measure by the chain rule applied to the flow.
std::vector<double> product_derivative_chain_rule(const TypeSpace& space,
                                                  std::span<const double> rho,
                                                  const Distribution& omega,
                                                  const PartialPartition& blocks);

/// sum_j sum_{B in A_j} coefficient * rho_B ( pi_B.omega (x) pi_{A_j\B}.omega / |omega| - pi_{A_j}.omega )
/// (x) the other block marginals, with rho_B = sum_{H : H & A_j = B} rho_H.
/// The flow's rho_G / 2 corresponds to coefficient 0.5.
std::vector<double> product_derivative_expansion(const TypeSpace& space,
                                                 std::span<const double> rho,
                                                 const Distribution& omega,
                                                 const PartialPartition& blocks,
                                                 double coefficient = 0.5);

/// Max-norm difference of the two sides above.
double product_derivative_check(const TypeSpace& space, std::span<const double> rho,
                                const Distribution& omega, const PartialPartition& blocks,
                                double coefficient = 0.5);

struct LlnRow {
  std::int64_t population = 0;
  double median_sup_distance = 0.0;
  std::vector<double> sup_distances;  // one per replicate
};

struct LlnResult {
  std::vector<LlnRow> rows;
  double fitted_exponent = 0.0;  // least-squares slope of log median vs log N
  bool monotone_decreasing = false;
};

struct LlnOptions {
  std::size_t replicates = 100;
  std::uint64_t seed = 1;
  std::size_t grid_points = 201;
  bool strict = false;
};

/// Counts N * profile rounded by largest remainder so they sum to N.
PopulationState scale_profile(const TypeSpace& space, const Distribution& profile, std::int64_t n);

/// For each N: median over replicates of sup_{s <= t} || Z_s / N - p_s ||_1, where p
/// solves the flow from Z_0 / N. Requires b = 0 and mu = 0.
LlnResult lln_experiment(const ModelParams& params, const Distribution& profile,
                         std::span<const std::int64_t> populations, double t, const LlnOptions& options);

/// CSV: population,replicate,sup_distance (median rows use replicate = "median").
void write_lln_csv(std::ostream& os, const LlnResult& result);

/// CSV: time,type,weight with types as allele strings.
void write_distribution_path_csv(std::ostream& os, const TypeSpace& space,
                                 std::span<const double> times, std::span<const Distribution> path);

}  // namespace moran

#endif  // MORAN_DETERMINISTIC_HPP
