#ifndef MORAN_SITE_SET_HPP
#define MORAN_SITE_SET_HPP

#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace moran {

inline constexpr int kMaxSites = 16;

/// A subset of the sites {1,...,n}. Site i is stored in bit i-1.
class SiteSet {
 public:
  constexpr SiteSet() = default;

  static constexpr SiteSet from_mask(std::uint32_t mask) {
    if (mask >> kMaxSites) throw std::invalid_argument("site mask exceeds 16 sites");
    SiteSet s;
    s.bits_ = mask;
    return s;
  }

  /// Sites are 1-based.
  static SiteSet of(std::initializer_list<int> sites) {
    return of(std::vector<int>(sites));
  }
  static SiteSet of(const std::vector<int>& sites) {
    std::uint32_t mask = 0;
    for (int s : sites) {
      if (s < 1 || s > kMaxSites)
        throw std::invalid_argument("site index " + std::to_string(s) + " out of range 1..16");
      mask |= 1u << (s - 1);
    }
    return from_mask(mask);
  }
  /// {1,...,n}
  static constexpr SiteSet full(int n) {
    if (n < 0 || n > kMaxSites) throw std::invalid_argument("site count must be in 0..16");
    return from_mask((1u << n) - 1u);
  }

  constexpr std::uint32_t mask() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(int site) const { return (bits_ >> (site - 1)) & 1u; }
  constexpr bool subset_of(SiteSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool disjoint(SiteSet other) const { return (bits_ & other.bits_) == 0; }

  /// Complement relative to an explicit universe.
  constexpr SiteSet complement_in(SiteSet universe) const {
    SiteSet s;
    s.bits_ = universe.bits_ & ~bits_;
    return s;
  }

  constexpr SiteSet operator|(SiteSet o) const { return raw(bits_ | o.bits_); }
  constexpr SiteSet operator&(SiteSet o) const { return raw(bits_ & o.bits_); }
  constexpr SiteSet operator^(SiteSet o) const { return raw(bits_ ^ o.bits_); }
  constexpr SiteSet minus(SiteSet o) const { return raw(bits_ & ~o.bits_); }

  std::vector<int> sites() const {
    std::vector<int> out;
    for (std::uint32_t m = bits_; m; m &= m - 1) out.push_back(std::countr_zero(m) + 1);
    return out;
  }

  /// "{1,3}" style.
  std::string to_string() const {
    std::string s = "{";
    bool first = true;
    for (int i : sites()) {
      if (!first) s += ",";
      s += std::to_string(i);
      first = false;
    }
    return s + "}";
  }

  constexpr auto operator<=>(const SiteSet&) const = default;

 private:
  static constexpr SiteSet raw(std::uint32_t m) {
    SiteSet s;
    s.bits_ = m;
    return s;
  }
  std::uint32_t bits_ = 0;
};

/// Calls f(SiteSet) for every subset of `universe`, including the empty set and
/// `universe` itself, in increasing mask order.
template <class F>
void for_each_subset(SiteSet universe, F&& f) {
  const std::uint32_t u = universe.mask();
  std::uint32_t sub = 0;
  while (true) {
    f(SiteSet::from_mask(sub));
    if (sub == u) break;
    sub = (sub - u) & u;
  }
}

}  // namespace moran

#endif  // MORAN_SITE_SET_HPP
