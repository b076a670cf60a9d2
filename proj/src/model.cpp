#include "moran/model.hpp"

#include <cmath>
#include <limits>

namespace moran {

TypeSpace::TypeSpace(std::vector<int> allele_counts) : allele_counts_(std::move(allele_counts)) {
  if (allele_counts_.empty()) throw ModelError("type space needs at least one site");
  if (static_cast<int>(allele_counts_.size()) > kMaxSites)
    throw ModelError("at most 16 sites are supported, got " +
                     std::to_string(allele_counts_.size()));
  stride_.reserve(allele_counts_.size());
  size_ = 1;
  for (std::size_t i = 0; i < allele_counts_.size(); ++i) {
    const int k = allele_counts_[i];
    if (k < 1)
      throw ModelError("site " + std::to_string(i + 1) + " must have at least one allele");
    stride_.push_back(size_);
    if (size_ > (std::uint64_t{1} << 62) / static_cast<std::uint64_t>(k))
      throw ModelError("type space too large to encode");
    size_ *= static_cast<std::uint64_t>(k);
  }
}

bool TypeSpace::valid(const Genotype& g) const {
  if (g.alleles.size() != allele_counts_.size()) return false;
  for (std::size_t i = 0; i < g.alleles.size(); ++i)
    if (g.alleles[i] < 0 || g.alleles[i] >= allele_counts_[i]) return false;
  return true;
}

TypeCode TypeSpace::encode(const Genotype& g) const {
  if (g.alleles.size() != allele_counts_.size())
    throw ModelError("genotype has " + std::to_string(g.alleles.size()) + " sites, expected " +
                     std::to_string(allele_counts_.size()));
  TypeCode code = 0;
  for (std::size_t i = 0; i < g.alleles.size(); ++i) {
    if (g.alleles[i] < 0 || g.alleles[i] >= allele_counts_[i])
      throw ModelError("allele " + std::to_string(g.alleles[i]) + " at site " +
                       std::to_string(i + 1) + " outside 0.." +
                       std::to_string(allele_counts_[i] - 1));
    code += stride_[i] * static_cast<TypeCode>(g.alleles[i]);
  }
  return code;
}

Genotype TypeSpace::decode(TypeCode code) const {
  Genotype g;
  g.alleles.resize(allele_counts_.size());
  for (std::size_t i = 0; i < allele_counts_.size(); ++i) {
    g.alleles[i] = static_cast<int>(code % allele_counts_[i]);
    code /= allele_counts_[i];
  }
  return g;
}

TypeCode TypeSpace::recombine(TypeCode x, TypeCode y, SiteSet g) const {
  TypeCode out = 0;
  for (std::size_t i = 0; i < allele_counts_.size(); ++i) {
    const TypeCode src = g.contains(static_cast<int>(i) + 1) ? x : y;
    out += stride_[i] * ((src / stride_[i]) % allele_counts_[i]);
  }
  return out;
}

bool TypeSpace::matches_on(TypeCode x, TypeCode ref, SiteSet a) const {
  for (std::uint32_t m = a.mask(); m; m &= m - 1) {
    const int i = std::countr_zero(m);
    if ((x / stride_[i]) % allele_counts_[i] != (ref / stride_[i]) % allele_counts_[i])
      return false;
  }
  return true;
}

MarginalType TypeSpace::project(TypeCode x, SiteSet sites) const {
  MarginalType m{sites, {}};
  for (int s : sites.sites()) m.alleles.push_back(allele(x, s));
  return m;
}

void SignedUpdate::add(TypeCode t, std::int64_t d) {
  if (d == 0) return;
  auto [it, inserted] = deltas.try_emplace(t, d);
  if (!inserted) {
    it->second += d;
    if (it->second == 0) deltas.erase(it);
  }
}

std::int64_t SignedUpdate::total() const {
  std::int64_t s = 0;
  for (const auto& [t, d] : deltas) s += d;
  return s;
}

PopulationState::PopulationState(const std::map<TypeCode, std::int64_t>& counts) {
  for (const auto& [t, c] : counts) {
    if (c < 0) throw ModelError("negative count in population state");
    if (c == 0) continue;
    counts_.emplace(t, c);
    size_ += c;
  }
}

std::int64_t PopulationState::count(TypeCode t) const {
  auto it = counts_.find(t);
  return it == counts_.end() ? 0 : it->second;
}

std::int64_t PopulationState::marginal_count(const TypeSpace& space, TypeCode ref,
                                             SiteSet a) const {
  if (a.empty()) return size_;
  std::int64_t s = 0;
  for (const auto& [t, c] : counts_)
    if (space.matches_on(t, ref, a)) s += c;
  return s;
}

void PopulationState::apply(const SignedUpdate& update) {
  for (const auto& [t, d] : update.deltas) {
    const std::int64_t now = count(t) + d;
    if (now < 0) throw ModelError("update drives a count negative");
  }
  for (const auto& [t, d] : update.deltas) {
    auto& c = counts_[t];
    c += d;
    if (c == 0) counts_.erase(t);
    size_ += d;
  }
}

MarginalPopulation marginalize(const TypeSpace& space, const PopulationState& z, SiteSet sites) {
  MarginalPopulation out;
  for (const auto& [t, c] : z.counts()) out[space.project(t, sites)] += c;
  return out;
}

ModelParams ModelParams::create(std::vector<int> allele_counts, std::int64_t population,
                                const std::vector<RateEntry>& rho_entries,
                                const std::vector<MutationEntry>& mu_entries, double b) {
  ModelParams p;
  p.types = TypeSpace(std::move(allele_counts));
  if (population < 1) throw ModelError("population size N must be at least 1");
  p.population = population;
  const int n = p.types.sites();
  const SiteSet all = p.types.all_sites();
  p.rho.assign(std::size_t{1} << n, 0.0);
  std::vector<bool> set(p.rho.size(), false);
  for (const auto& e : rho_entries) {
    if (!e.set.subset_of(all))
      throw ModelError("rho set " + e.set.to_string() + " contains sites outside 1.." +
                       std::to_string(n));
    if (!(e.rate >= 0.0) || !std::isfinite(e.rate))
      throw ModelError("rho for " + e.set.to_string() + " must be a finite nonnegative rate");
    if ((e.set.empty() || e.set == all) && e.rate != 0.0)
      throw ModelError(std::string("rho for ") + (e.set.empty() ? "the empty set" : "the full set S") +
                       " must be 0");
    const SiteSet comp = e.set.complement_in(all);
    for (SiteSet s : {e.set, comp}) {
      if (set[s.mask()] && p.rho[s.mask()] != e.rate)
        throw ModelError("conflicting rho entries for " + e.set.to_string() + " and its complement " +
                         comp.to_string());
      p.rho[s.mask()] = e.rate;
      set[s.mask()] = true;
    }
  }
  p.mu.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(p.types.allele_counts()[i]);
    p.mu[i].assign(k, std::vector<double>(k, 0.0));
  }
  for (const auto& m : mu_entries) {
    if (m.site < 1 || m.site > n)
      throw ModelError("mutation site " + std::to_string(m.site) + " outside 1.." + std::to_string(n));
    const int k = p.types.allele_counts()[m.site - 1];
    if (m.from < 0 || m.from >= k || m.to < 0 || m.to >= k)
      throw ModelError("mutation alleles out of range at site " + std::to_string(m.site));
    if (!(m.rate >= 0.0) || !std::isfinite(m.rate))
      throw ModelError("mutation rate at site " + std::to_string(m.site) +
                       " must be finite and nonnegative");
    if (m.from == m.to) continue;  // diagonal forced to zero
    p.mu[m.site - 1][m.from][m.to] = m.rate;
  }
  if (!(b >= 0.0) || !std::isfinite(b)) throw ModelError("resampling rate b must be finite and nonnegative");
  p.b = b;
  p.validate();
  return p;
}

bool ModelParams::has_mutation() const {
  for (const auto& site : mu)
    for (const auto& row : site)
      for (double r : row)
        if (r != 0.0) return true;
  return false;
}

double ModelParams::mutation_out_rate(int site, int from) const {
  double s = 0.0;
  for (double r : mu[site - 1][from]) s += r;
  return s;
}

void ModelParams::validate() const {
  const int n = sites();
  const SiteSet all = all_sites();
  if (population < 1) throw ModelError("population size N must be at least 1");
  if (rho.size() != (std::size_t{1} << n)) throw ModelError("rho table has wrong size");
  if (rho[0] != 0.0 || rho[all.mask()] != 0.0) throw ModelError("rho for the empty set and S must be 0");
  for (std::uint32_t g = 0; g < rho.size(); ++g) {
    if (!(rho[g] >= 0.0)) throw ModelError("rho must be nonnegative");
    if (rho[g] != rho[all.mask() & ~g]) throw ModelError("rho must satisfy rho_G = rho_complement");
  }
  if (static_cast<int>(mu.size()) != n) throw ModelError("mutation table has wrong size");
  for (int i = 0; i < n; ++i)
    for (std::size_t a = 0; a < mu[i].size(); ++a) {
      if (mu[i][a][a] != 0.0) throw ModelError("mutation diagonal must be zero");
      for (double r : mu[i][a])
        if (!(r >= 0.0)) throw ModelError("mutation rates must be nonnegative");
    }
  if (!(b >= 0.0)) throw ModelError("resampling rate must be nonnegative");
}

Genotype recombine(const Genotype& x, const Genotype& y, SiteSet g) {
  if (x.alleles.size() != y.alleles.size()) throw ModelError("genotypes differ in length");
  Genotype out = y;
  for (std::size_t i = 0; i < x.alleles.size(); ++i)
    if (g.contains(static_cast<int>(i) + 1)) out.alleles[i] = x.alleles[i];
  return out;
}

MarginalType project(const Genotype& x, SiteSet sites) {
  MarginalType m{sites, {}};
  for (int s : sites.sites()) m.alleles.push_back(x.alleles.at(s - 1));
  return m;
}

SignedUpdate recombination_update(const TypeSpace& space, SiteSet g, TypeCode x, TypeCode y) {
  const SiteSet comp = g.complement_in(space.all_sites());
  SignedUpdate u;
  u.add(x, -1);
  u.add(y, -1);
  u.add(space.recombine(x, y, g), 1);
  u.add(space.recombine(x, y, comp), 1);
  return u;
}

JumpRates<double> true_jump_rates(const ModelParams& params, const PopulationState& z,
                                  TypeCode xstar) {
  if (params.b != 0.0 || params.has_mutation())
    throw ModelError("true jump rates are defined for recombination alone (b = 0, mu = 0)");
  return true_jump_rates<double>(params.types, std::span<const double>(params.rho), z, xstar);
}

}  // namespace moran
