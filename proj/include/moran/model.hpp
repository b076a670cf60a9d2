#ifndef MORAN_MODEL_HPP
#define MORAN_MODEL_HPP

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "moran/site_set.hpp"

namespace moran {

/// Thrown for any violated model invariant or precondition.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One allele index per site, 0-based alleles.
struct Genotype {
  std::vector<int> alleles;
  auto operator<=>(const Genotype&) const = default;
};

/// Dense mixed-radix code of a genotype; site 1 is the least significant digit.
using TypeCode = std::uint64_t;

/// Restriction of a genotype to a subset of sites, alleles listed in site order.
struct MarginalType {
  SiteSet sites;
  std::vector<int> alleles;
  auto operator<=>(const MarginalType&) const = default;
};

/// The type space X = X_1 x ... x X_n.
class TypeSpace {
 public:
  TypeSpace() = default;
  explicit TypeSpace(std::vector<int> allele_counts);

  int sites() const { return static_cast<int>(allele_counts_.size()); }
  SiteSet all_sites() const { return SiteSet::full(sites()); }
  const std::vector<int>& allele_counts() const { return allele_counts_; }
  std::uint64_t size() const { return size_; }

  bool valid(const Genotype& g) const;
  TypeCode encode(const Genotype& g) const;
  Genotype decode(TypeCode code) const;

  /// Allele at 1-based `site`.
  int allele(TypeCode code, int site) const {
    return static_cast<int>((code / stride_[site - 1]) % allele_counts_[site - 1]);
  }
  TypeCode with_allele(TypeCode code, int site, int allele) const {
    const auto s = stride_[site - 1];
    return code - s * static_cast<TypeCode>(this->allele(code, site)) +
           s * static_cast<TypeCode>(allele);
  }

  /// Type carrying x's alleles on `g` and y's alleles elsewhere.
  TypeCode recombine(TypeCode x, TypeCode y, SiteSet g) const;

  /// True iff x and ref agree on every site of `a`. Vacuously true for a = {}.
  bool matches_on(TypeCode x, TypeCode ref, SiteSet a) const;

  MarginalType project(TypeCode x, SiteSet sites) const;

  friend bool operator==(const TypeSpace& a, const TypeSpace& b) {
    return a.allele_counts_ == b.allele_counts_;
  }

 private:
  std::vector<int> allele_counts_;
  std::vector<TypeCode> stride_;
  std::uint64_t size_ = 1;
};

/// Counts of individuals per type; deltas sum to zero for every event.
struct SignedUpdate {
  std::map<TypeCode, std::int64_t> deltas;

  void add(TypeCode t, std::int64_t d);
  bool is_zero() const { return deltas.empty(); }
  std::int64_t total() const;
  friend bool operator==(const SignedUpdate&, const SignedUpdate&) = default;
};

/// Counting measure z on X with total mass N.
class PopulationState {
 public:
  PopulationState() = default;
  /// Zero counts are dropped; negative counts throw.
  explicit PopulationState(const std::map<TypeCode, std::int64_t>& counts);

  std::int64_t size() const { return size_; }
  std::int64_t count(TypeCode t) const;
  const std::map<TypeCode, std::int64_t>& counts() const { return counts_; }

  /// [A] relative to `ref`: number of individuals matching ref on `a`.
  std::int64_t marginal_count(const TypeSpace& space, TypeCode ref, SiteSet a) const;

  /// Throws if any count would become negative.
  void apply(const SignedUpdate& update);

  friend bool operator==(const PopulationState&, const PopulationState&) = default;

 private:
  std::map<TypeCode, std::int64_t> counts_;
  std::int64_t size_ = 0;
};

using MarginalPopulation = std::map<MarginalType, std::int64_t>;

/// Pushforward of z under the projection onto `sites`.
MarginalPopulation marginalize(const TypeSpace& space, const PopulationState& z, SiteSet sites);

/// Rate table indexed by SiteSet mask (size 2^n).
template <class T>
using RateTable = std::vector<T>;

struct RateEntry {
  SiteSet set;
  double rate = 0.0;
};

struct MutationEntry {
  int site = 1;  // 1-based
  int from = 0;
  int to = 0;
  double rate = 0.0;
};

/// Population size, type space, and the recombination, mutation and resampling rates.
struct ModelParams {
  TypeSpace types;
  std::int64_t population = 0;
  RateTable<double> rho;                           // rho[G.mask()], rho_G == rho_{complement}
  std::vector<std::vector<std::vector<double>>> mu;  // mu[site-1][from][to], zero diagonal
  double b = 0.0;

  /// Validates and expands `rho_entries` (one representative per {G, complement} pair).
  /// Throws ModelError with a precise message on any violated invariant.
  static ModelParams create(std::vector<int> allele_counts, std::int64_t population,
                            const std::vector<RateEntry>& rho_entries,
                            const std::vector<MutationEntry>& mu_entries = {}, double b = 0.0);

  int sites() const { return types.sites(); }
  SiteSet all_sites() const { return types.all_sites(); }
  double rho_of(SiteSet g) const { return rho[g.mask()]; }
  bool has_mutation() const;
  /// Total rate of leaving allele `from` at 1-based `site`.
  double mutation_out_rate(int site, int from) const;

  /// Re-checks every invariant; throws ModelError.
  void validate() const;
};

/// x on `g`, y on the complement.
Genotype recombine(const Genotype& x, const Genotype& y, SiteSet g);
MarginalType project(const Genotype& x, SiteSet sites);

/// -d_x - d_y + d_{p_G(x,y)} + d_{p_{complement}(x,y)}.
SignedUpdate recombination_update(const TypeSpace& space, SiteSet g, TypeCode x, TypeCode y);

template <class T>
struct JumpRates {
  T up{};
  T down{};
};

/// Rates of z(x*) -> z(x*) +/- 1 under recombination alone, summed over all G.
template <class T>
JumpRates<T> true_jump_rates(const TypeSpace& space, std::span<const T> rho,
                             const PopulationState& z, TypeCode xstar) {
  const SiteSet all = space.all_sites();
  const T n_pop = T(z.size());
  const T zx = T(z.count(xstar));
  JumpRates<T> out;
  for_each_subset(all, [&](SiteSet g) {
    const T& r = rho[g.mask()];
    if (r == T(0)) return;
    const T on_g = T(z.marginal_count(space, xstar, g));
    const T on_c = T(z.marginal_count(space, xstar, g.complement_in(all)));
    const T scale = r / (T(2) * n_pop);
    out.up += scale * (on_g - zx) * (on_c - zx);
    out.down += scale * zx * (n_pop - on_g - on_c + zx);
  });
  return out;
}

/// Same, for a parameter set; rejects mutation or resampling.
JumpRates<double> true_jump_rates(const ModelParams& params, const PopulationState& z,
                                  TypeCode xstar);

}  // namespace moran

#endif  // MORAN_MODEL_HPP
