#ifndef MORAN_CTMC_ORACLE_HPP
#define MORAN_CTMC_ORACLE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "moran/combinatorics.hpp"
#include "moran/model.hpp"

namespace moran {

inline constexpr std::uint64_t kMaxOracleStates = 200000;

/// Rates in an arbitrary scalar type, so the generator can be assembled in
/// exact rational arithmetic.
template <class T>
struct RateSet {
  RateTable<T> rho;
  std::vector<std::vector<std::vector<T>>> mu;  // mu[site-1][from][to]
  T b{};
};

RateSet<double> rate_set(const ModelParams& params);

/// Bijection between population states (compositions of N over the types) and 0..size-1.
class StateIndex {
 public:
  StateIndex(const TypeSpace& space, std::int64_t population);

  /// binomial(N + |X| - 1, N), saturating at UINT64_MAX.
  static std::uint64_t count_states(std::uint64_t type_count, std::int64_t population);

  std::size_t size() const { return states_.size(); }
  std::size_t type_count() const { return type_count_; }
  std::int64_t population() const { return population_; }
  const std::vector<std::int32_t>& composition(std::size_t idx) const { return states_[idx]; }
  std::size_t index_of(const std::vector<std::int32_t>& composition) const;
  std::size_t index_of(const PopulationState& z) const;
  PopulationState state(std::size_t idx) const;

 private:
  std::size_t type_count_ = 0;
  std::int64_t population_ = 0;
  std::vector<std::vector<std::int32_t>> states_;
  std::map<std::vector<std::int32_t>, std::size_t> lookup_;
};

/// Off-diagonal net transition rates per source state (diagonal excluded).
template <class T>
using RateRows = std::vector<std::map<std::size_t, T>>;

/// Aggregates every base event of every state into net jumps between distinct
/// states; events that leave the state unchanged contribute nothing.
template <class T>
RateRows<T> assemble_transitions(const StateIndex& index, const TypeSpace& space,
                                 const RateSet<T>& rates) {
  const std::size_t nt = index.type_count();
  const T n_pop = T(index.population());
  const SiteSet all = space.all_sites();
  RateRows<T> rows(index.size());
  std::vector<std::int32_t> next;
  for (std::size_t s = 0; s < index.size(); ++s) {
    const auto& comp = index.composition(s);
    auto add = [&](const std::vector<std::int32_t>& target, const T& rate) {
      if (rate == T(0)) return;
      const std::size_t to = index.index_of(target);
      if (to == s) return;
      rows[s][to] += rate;
    };
    for (std::uint32_t g = 0; g < rates.rho.size(); ++g) {
      if (rates.rho[g] == T(0)) continue;
      const SiteSet gs = SiteSet::from_mask(g);
      const SiteSet gc = gs.complement_in(all);
      for (std::size_t x = 0; x < nt; ++x) {
        if (comp[x] == 0) continue;
        for (std::size_t y = 0; y < nt; ++y) {
          if (comp[y] == 0) continue;
          next = comp;
          --next[x];
          --next[y];
          ++next[space.recombine(x, y, gs)];
          ++next[space.recombine(x, y, gc)];
          add(next, rates.rho[g] / (T(4) * n_pop) * T(comp[x]) * T(comp[y]));
        }
      }
    }
    for (std::size_t x = 0; x < nt; ++x) {
      if (comp[x] == 0) continue;
      for (int site = 1; site <= space.sites(); ++site) {
        const auto& row = rates.mu[site - 1][space.allele(x, site)];
        for (std::size_t a = 0; a < row.size(); ++a) {
          if (row[a] == T(0)) continue;
          next = comp;
          --next[x];
          ++next[space.with_allele(x, site, static_cast<int>(a))];
          add(next, row[a] * T(comp[x]));
        }
      }
      if (rates.b == T(0)) continue;
      for (std::size_t y = 0; y < nt; ++y) {
        if (y == x || comp[y] == 0) continue;
        next = comp;
        ++next[x];
        --next[y];
        add(next, rates.b / (T(2) * n_pop) * T(comp[x]) * T(comp[y]));
      }
    }
  }
  return rows;
}

using GeneratorMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Full generator of the population chain; rows sum to zero.
GeneratorMatrix build_generator(const ModelParams& params, const StateIndex& index);

/// e^{tQ} applied to the row distribution p0, by uniformization. Long horizons
/// are split so each Poisson window has mean <= 30; each window is truncated
/// once the remaining Poisson mass is below 1e-13.
Eigen::VectorXd transient_distribution(const GeneratorMatrix& q, const Eigen::VectorXd& p0,
                                       double t);

/// Ground-truth engine for tiny instances.
class CtmcOracle {
 public:
  explicit CtmcOracle(ModelParams params);

  const ModelParams& params() const { return params_; }
  const StateIndex& index() const { return index_; }
  const GeneratorMatrix& generator() const { return q_; }

  Eigen::VectorXd point_mass(const PopulationState& z) const;
  Eigen::VectorXd distribution(const Eigen::VectorXd& p0, double t) const {
    return transient_distribution(q_, p0, t);
  }

  /// f(state) = prod over blocks A of [A](state); 1 for the empty collection.
  Eigen::VectorXd moment_function(const PartialPartition& blocks, TypeCode xstar) const;

  double moment(const Eigen::VectorXd& p, const PartialPartition& blocks, TypeCode xstar) const;
  /// d/dt E[f] at distribution p: sum over states of (Q^T p)(state) f(state).
  double moment_derivative(const Eigen::VectorXd& p, const PartialPartition& blocks,
                           TypeCode xstar) const;

 private:
  ModelParams params_;
  StateIndex index_;
  GeneratorMatrix q_;
};

double exact_moment(const CtmcOracle& oracle, const Eigen::VectorXd& p0,
                    const PartialPartition& blocks, TypeCode xstar, double t);
double exact_moment_derivative(const CtmcOracle& oracle, const Eigen::VectorXd& p_t,
                               const PartialPartition& blocks, TypeCode xstar);

}  // namespace moran

#endif  // MORAN_CTMC_ORACLE_HPP
