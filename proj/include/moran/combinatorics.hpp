#ifndef MORAN_COMBINATORICS_HPP
#define MORAN_COMBINATORICS_HPP

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "moran/model.hpp"
#include "moran/site_set.hpp"

namespace moran {

/// A collection of pairwise disjoint nonempty site sets, kept sorted by mask so
/// that equal collections compare equal.
class PartialPartition {
 public:
  PartialPartition() = default;
  /// Canonicalizes; throws ModelError on empty or overlapping blocks.
  explicit PartialPartition(std::vector<SiteSet> blocks);

  const std::vector<SiteSet>& blocks() const { return blocks_; }
  int size() const { return static_cast<int>(blocks_.size()); }
  bool empty() const { return blocks_.empty(); }
  SiteSet support() const { return support_; }

  /// Stable text form, e.g. "{1,3}|{2}"; the empty collection is "{}".
  std::string to_string() const;
  /// Inverse of to_string.
  static PartialPartition parse(const std::string& text);

  auto operator<=>(const PartialPartition& o) const { return blocks_ <=> o.blocks_; }
  bool operator==(const PartialPartition& o) const { return blocks_ == o.blocks_; }

 private:
  std::vector<SiteSet> blocks_;
  SiteSet support_;
};

/// Assignment of block indices 0..m-1 to the parts I, J, K (bitmasks).
struct TripleIJK {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  friend bool operator==(const TripleIJK&, const TripleIJK&) = default;
};

/// G splits every block nontrivially: {} != G & A != A for all A. Vacuously true
/// for an empty block list.
bool disrupts(SiteSet g, std::span<const SiteSet> blocks);

/// Union of the blocks selected by `which` (bit l selects blocks[l]).
SiteSet union_of(std::span<const SiteSet> blocks, std::uint32_t which);

/// Lumped rates rho^(I)_H = sum over G with G & I == H of rho_G. The result is
/// indexed by mask over all n sites and is zero off the subsets of I.
template <class T>
RateTable<T> marginal_rates(std::span<const T> rho, SiteSet sites) {
  RateTable<T> out(rho.size(), T(0));
  for (std::uint32_t g = 0; g < rho.size(); ++g)
    if (rho[g] != T(0)) out[g & sites.mask()] += rho[g];
  return out;
}

/// sum_{D subset A_I} sum_{H subset A_K, H disrupts K_blocks} rho_{H u D u G}.
template <class T>
T rho_ikg(std::span<const T> rho, SiteSet a_i, std::span<const SiteSet> k_blocks, SiteSet g) {
  SiteSet a_k;
  for (SiteSet b : k_blocks) a_k = a_k | b;
  T sum(0);
  for_each_subset(a_k, [&](SiteSet h) {
    if (!disrupts(h, k_blocks)) return;
    for_each_subset(a_i, [&](SiteSet d) { sum += rho[(h | d | g).mask()]; });
  });
  return sum;
}

/// All sets G' obtained from G by complementing it inside any subcollection of
/// `j_blocks`; 2^|J| entries, G first.
std::vector<SiteSet> flip_orbit(SiteSet g, std::span<const SiteSet> j_blocks);

/// Every partial partition of `sites` (including the empty collection), sorted.
/// Throws for |sites| > 10.
std::vector<PartialPartition> enumerate_partial_partitions(SiteSet sites);

/// Every (I, J, K) partition of {0..m-1} with I != everything.
std::vector<TripleIJK> enumerate_triples(int m);

}  // namespace moran

#endif  // MORAN_COMBINATORICS_HPP
