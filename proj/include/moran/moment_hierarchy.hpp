#ifndef MORAN_MOMENT_HIERARCHY_HPP
#define MORAN_MOMENT_HIERARCHY_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "moran/combinatorics.hpp"
#include "moran/model.hpp"

namespace moran {

inline constexpr int kMaxHierarchySites = 8;

/// Normalization of a recombination term class relative to rho^I_{K,G} / (4N).
/// The printed coefficient counts one labelling of each creating split; the
/// generator also sees the mirrored split of every creating block. These are
/// the values recovered by calibrate_term_scales() and are re-checked in tests.
inline constexpr double kScaleNoCreatingBlock = 1.0;   // J = {}
inline constexpr double kScaleOneCreatingBlock = 2.0;  // |J| = 1
// For |J| >= 2 no single constant exists; the builder sums rho^I_{K,F} over the
// 2^|J| flips F of G inside the creating blocks, which reduces to the two
// constants above for |J| <= 1.

/// Which coefficient the recombination terms carry.
enum class CoefficientForm {
  kFlipSum,  // sum over flips of G (production form)
  kPrinted,  // bare rho^I_{K,G}, used only to calibrate class scales
};

/// Linear system d/dt m = C m for m_A = E[prod_{A in blocks} [A]_t] over every
/// partial partition of the support T, relative to one reference type.
struct MomentSystem {
  std::vector<PartialPartition> index;
  std::map<PartialPartition, std::size_t> position;
  Eigen::SparseMatrix<double, Eigen::RowMajor> coefficients;
  ModelParams params;
  TypeCode reference = 0;
  SiteSet support;
  double scale_no_creating_block = kScaleNoCreatingBlock;
  double scale_one_creating_block = kScaleOneCreatingBlock;

  std::size_t find(const PartialPartition& pp) const;
  std::size_t size() const { return index.size(); }
};

/// Builds the closed hierarchy on the partial partitions of `support`.
/// Requires b == 0 and |support| <= 8. Mutation into the reference allele at
/// each site must not depend on the source allele (always true with two
/// alleles), otherwise the x*-moments do not close and ModelError is thrown.
/// Before returning, the {T} row is checked against the mean-dynamics formula
/// sum_H rho^(T)_H / (2N) ([H][T\H] - N [T]); a mismatch throws std::logic_error.
MomentSystem build_system(const ModelParams& params, TypeCode xstar, SiteSet support);

/// One (target, coefficient) contribution of a recombination term.
using TermSink = std::function<void(const PartialPartition& target, double coefficient)>;

/// Emits the recombination terms of the row for `row`, restricted to triples
/// with |J| == creating and |K| == destroying when those are >= 0.
void recombination_terms(const PartialPartition& row, std::span<const double> support_rates,
                         std::int64_t population, CoefficientForm form, const TermSink& sink,
                         int creating = -1, int destroying = -1);

/// prod_A [A](z) for a concrete population.
double block_product(const TypeSpace& space, const PopulationState& z, const PartialPartition& pp,
                     TypeCode xstar);

struct MomentSolution {
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // values[time][index]
  const MomentSystem* system = nullptr;

  double value(std::size_t time_index, const PartialPartition& pp) const;
};

/// Integrates from m(0) = prod_A [A](z0) with adaptive Dormand-Prince, rel. tol 1e-10.
MomentSolution solve(const MomentSystem& system, const PopulationState& z0,
                     std::span<const double> t_grid);

/// CSV: row_index,col_index,coefficient,row_partition,col_partition.
void write_system_csv(std::ostream& os, const MomentSystem& system);

struct TermScaleFit {
  int creating = 0;
  int destroying = 0;
  double scale = 0.0;
};

struct CalibrationResult {
  std::vector<TermScaleFit> scales;
  double max_relative_residual = 0.0;
};

/// Fits one scale per (|J|, |K|) class of the printed coefficient against the
/// exact chain on the canonical instance (n = 3, N = 3, rho_{1} = 1/3,
/// rho_{2} = 1/2, rho_{3} = 3/4, reference 000) at t in {0, 0.7}.
CalibrationResult calibrate_term_scales();

// ---- closed-form special cases ----------------------------------------------

struct TwoSiteMeans {
  double joint = 0.0;    // E[[1,2]]
  double product = 0.0;  // E[[1][2]]
  double ld = 0.0;       // E[N[1,2] - [1][2]]
};

/// Two-site mean system with recombination and resampling:
///   d/dt E[[1,2]]  = rho_1/N E[[1][2] - N[1,2]],
///   d/dt E[[1][2]] = b/N     E[N[1,2] - [1][2]],
/// so the LD decays as exp(-(rho_1 + b/N) t).
class TwoSiteMeanLd {
 public:
  TwoSiteMeanLd(const ModelParams& params, const PopulationState& z0, TypeCode xstar);
  TwoSiteMeans at(double t) const;
  double decay_rate() const { return rho1_ + b_ / n_; }

 private:
  double rho1_ = 0.0;
  double b_ = 0.0;
  double n_ = 1.0;
  TwoSiteMeans initial_;
};

/// Linear system over E[[1,2]^k], k = 0..order, with [1], [2] fixed by z0.
struct TwoSiteMomentSystem {
  int order = 0;
  Eigen::MatrixXd matrix;   // d/dt v = matrix v
  Eigen::VectorXd initial;  // [1,2]_0^k

  /// values[time][k]
  std::vector<std::vector<double>> solve(std::span<const double> t_grid) const;
};

/// Expands the +/-1 jumps of [1,2] at rates rho_1/N ([1]-[1,2])([2]-[1,2]) and
/// rho_1/N [1,2](N-[1]-[2]+[1,2]) binomially. Requires n = 2, b = 0, mu = 0.
TwoSiteMomentSystem two_site_moments(const ModelParams& params, const PopulationState& z0,
                                     TypeCode xstar, int order);

/// a = sum_{H : |H & pair| = 1} rho_H / (2N) [g1]_0 [g2]_0.
double poisson_parameter(const ModelParams& params, const PopulationState& z0, TypeCode xstar,
                         SiteSet pair);

/// Nonlinear closed system for single-crossover rates over all site intervals.
class SingleCrossoverSystem {
 public:
  /// Throws ModelError if any rho_G > 0 with G not of the form {1..k} or {k+1..n},
  /// or if b != 0 or mu != 0.
  SingleCrossoverSystem(const ModelParams& params, TypeCode xstar);

  /// E[[1..n]_t] on the grid.
  std::vector<double> solve(const PopulationState& z0, std::span<const double> t_grid) const;
  /// E[[i..j]_t] for every interval; intervals()[k] = (i, j).
  std::vector<std::vector<double>> solve_all(const PopulationState& z0,
                                             std::span<const double> t_grid) const;
  const std::vector<std::pair<int, int>>& intervals() const { return intervals_; }

 private:
  struct Split {
    std::size_t left;
    std::size_t right;
    double rate;  // rho^(I)_H / (2N)
  };
  ModelParams params_;
  TypeCode reference_;
  std::vector<std::pair<int, int>> intervals_;
  std::vector<std::vector<Split>> splits_;
  std::vector<double> decay_;
};

}  // namespace moran

#endif  // MORAN_MOMENT_HIERARCHY_HPP
