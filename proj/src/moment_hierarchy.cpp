#include "moran/moment_hierarchy.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "moran/ctmc_oracle.hpp"
#include "moran/gillespie.hpp"

namespace moran {

namespace odeint = boost::numeric::odeint;
using OdeState = std::vector<double>;

namespace {

template <class Rhs, class Observer>
void integrate_on_grid(Rhs&& rhs, OdeState x, std::span<const double> t_grid, double abs_tol,
                       double rel_tol, Observer&& observer) {
  auto stepper = odeint::make_controlled(abs_tol, rel_tol, odeint::runge_kutta_dopri5<OdeState>());
  const double first_step = t_grid.size() > 1 ? std::min(1e-3, (t_grid[1] - t_grid[0]) / 10) : 1e-3;
  odeint::integrate_times(stepper, rhs, x, t_grid.begin(), t_grid.end(), first_step, observer);
}

double max_abs(const OdeState& x) {
  double m = 1.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

std::size_t MomentSystem::find(const PartialPartition& pp) const {
  auto it = position.find(pp);
  if (it == position.end())
    throw ModelError("partial partition " + pp.to_string() + " is not indexed by this system");
  return it->second;
}

void recombination_terms(const PartialPartition& row, std::span<const double> support_rates,
                         std::int64_t population, CoefficientForm form, const TermSink& sink,
                         int creating, int destroying) {
  const auto& blocks = row.blocks();
  const int m = row.size();
  if (m == 0) return;
  std::uint32_t splittable = 0;
  for (int l = 0; l < m; ++l)
    if (blocks[l].size() >= 2) splittable |= 1u << l;
  if (splittable == 0) return;
  const double n_pop = static_cast<double>(population);

  std::vector<SiteSet> j_blocks, k_blocks;
  for (const TripleIJK& t : enumerate_triples(m)) {
    if ((t.j | t.k) & ~splittable) continue;  // singletons cannot be split
    const int nj = std::popcount(t.j);
    const int nk = std::popcount(t.k);
    if (creating >= 0 && nj != creating) continue;
    if (destroying >= 0 && nk != destroying) continue;
    j_blocks.clear();
    k_blocks.clear();
    std::vector<SiteSet> kept;
    for (int l = 0; l < m; ++l) {
      if ((t.j >> l) & 1u) j_blocks.push_back(blocks[l]);
      if ((t.k >> l) & 1u) k_blocks.push_back(blocks[l]);
      if ((t.i >> l) & 1u) kept.push_back(blocks[l]);
    }
    const SiteSet a_i = union_of(blocks, t.i);
    const SiteSet a_j = union_of(blocks, t.j);
    const double sign = (nk % 2) ? -1.0 : 1.0;

    for_each_subset(a_j, [&](SiteSet g) {
      if (!disrupts(g, j_blocks)) return;
      double rate = 0.0;
      if (form == CoefficientForm::kPrinted) {
        rate = rho_ikg<double>(support_rates, a_i, k_blocks, g);
      } else {
        for (SiteSet f : flip_orbit(g, j_blocks)) rate += rho_ikg<double>(support_rates, a_i, k_blocks, f);
      }
      if (rate == 0.0) return;
      const double coefficient = sign * rate / (4.0 * n_pop);
      const SiteSet gc = g.complement_in(a_j);
      // K~ ranges over subsets of K, as a sub-mask of t.k
      std::uint32_t sub = 0;
      while (true) {
        const SiteSet first = union_of(blocks, sub) | g;
        const SiteSet second = union_of(blocks, t.k & ~sub) | gc;
        std::vector<SiteSet> target = kept;
        double factor = 1.0;
        for (SiteSet b : {first, second}) {
          if (b.empty())
            factor *= n_pop;
          else
            target.push_back(b);
        }
        sink(PartialPartition(std::move(target)), coefficient * factor);
        if (sub == t.k) break;
        sub = (sub - t.k) & t.k;
      }
    });
  }
}

namespace {

/// Rate of mutation into the reference allele at `site`; must be the same from
/// every other allele.
double inflow_rate(const ModelParams& params, int site, int reference_allele) {
  const auto& table = params.mu[site - 1];
  double nu = -1.0;
  for (std::size_t y = 0; y < table.size(); ++y) {
    if (static_cast<int>(y) == reference_allele) continue;
    const double r = table[y][reference_allele];
    if (nu < 0.0)
      nu = r;
    else if (r != nu)
      throw ModelError("mutation into reference allele " + std::to_string(reference_allele) +
                       " at site " + std::to_string(site) +
                       " depends on the source allele; reference-type moments do not close");
  }
  return nu < 0.0 ? 0.0 : nu;
}

void check_mean_row(const MomentSystem& sys, const std::map<std::size_t, double>& recombination_row,
                    std::span<const double> rates) {
  const SiteSet t = sys.support;
  if (t.empty()) return;
  const double n_pop = static_cast<double>(sys.params.population);
  std::map<std::size_t, double> expected;
  const std::size_t self = sys.find(PartialPartition({t}));
  for_each_subset(t, [&](SiteSet h) {
    const double r = rates[h.mask()];
    if (r == 0.0 || h.empty() || h == t) return;
    expected[sys.find(PartialPartition({h, h.complement_in(t)}))] += r / (2.0 * n_pop);
    expected[self] -= r / (2.0 * n_pop) * n_pop;
  });
  std::map<std::size_t, double> got;
  for (const auto& [col, v] : recombination_row)
    if (v != 0.0) got[col] = v;
  for (auto it = expected.begin(); it != expected.end();)
    it = (it->second == 0.0) ? expected.erase(it) : std::next(it);
  bool same = got.size() == expected.size();
  for (const auto& [col, v] : expected) {
    auto it = got.find(col);
    if (it == got.end() || std::abs(it->second - v) > 1e-12 * std::max(1.0, std::abs(v))) same = false;
  }
  if (!same)
    throw std::logic_error("moment hierarchy: the " + PartialPartition({t}).to_string() +
                           " row does not reproduce the mean dynamics");
}

}  // namespace

MomentSystem build_system(const ModelParams& params, TypeCode xstar, SiteSet support) {
  params.validate();
  if (params.b != 0.0)
    throw ModelError("the moment hierarchy is closed only without resampling (b = 0); "
                     "resampling destroys moment closure beyond two sites");
  if (!support.subset_of(params.all_sites()))
    throw ModelError("hierarchy support " + support.to_string() + " is not a subset of the sites");
  if (support.size() > kMaxHierarchySites)
    throw ModelError("hierarchy support is capped at 8 sites, got " + std::to_string(support.size()));
  if (xstar >= params.types.size()) throw ModelError("reference type is not a valid genotype");

  MomentSystem sys;
  sys.params = params;
  sys.reference = xstar;
  sys.support = support;
  sys.index = enumerate_partial_partitions(support);
  for (std::size_t i = 0; i < sys.index.size(); ++i) sys.position.emplace(sys.index[i], i);

  const double n_pop = static_cast<double>(params.population);
  std::vector<double> inflow(params.sites() + 1, 0.0), outflow(params.sites() + 1, 0.0);
  for (int site : support.sites()) {
    const int ref = params.types.allele(xstar, site);
    inflow[site] = inflow_rate(params, site, ref);
    outflow[site] = params.mutation_out_rate(site, ref);
  }

  std::map<std::uint32_t, RateTable<double>> rates_by_support;
  auto rates_for = [&](SiteSet u) -> const RateTable<double>& {
    auto it = rates_by_support.find(u.mask());
    if (it == rates_by_support.end())
      it = rates_by_support.emplace(u.mask(), marginal_rates<double>(params.rho, u)).first;
    return it->second;
  };

  std::vector<Eigen::Triplet<double>> entries;
  std::map<std::size_t, double> mean_row;
  const std::size_t mean_row_index =
      support.empty() ? 0 : sys.position.at(PartialPartition({support}));
  for (std::size_t r = 0; r < sys.index.size(); ++r) {
    const PartialPartition& pp = sys.index[r];
    std::map<std::size_t, double> row;
    recombination_terms(
        pp, rates_for(pp.support()), params.population, CoefficientForm::kFlipSum,
        [&](const PartialPartition& target, double c) { row[sys.find(target)] += c; });
    if (!support.empty() && r == mean_row_index) mean_row = row;

    const auto& blocks = pp.blocks();
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      for (int site : blocks[l].sites()) {
        row[r] -= inflow[site] + outflow[site];
        if (inflow[site] == 0.0) continue;
        std::vector<SiteSet> shrunk = blocks;
        const SiteSet rest = blocks[l].minus(SiteSet::of({site}));
        double factor = 1.0;
        if (rest.empty()) {
          shrunk.erase(shrunk.begin() + static_cast<std::ptrdiff_t>(l));
          factor = n_pop;
        } else {
          shrunk[l] = rest;
        }
        row[sys.find(PartialPartition(std::move(shrunk)))] += inflow[site] * factor;
      }
    }
    for (const auto& [col, v] : row)
      if (v != 0.0) entries.emplace_back(static_cast<int>(r), static_cast<int>(col), v);
  }
  const auto n = static_cast<Eigen::Index>(sys.index.size());
  sys.coefficients.resize(n, n);
  sys.coefficients.setFromTriplets(entries.begin(), entries.end());
  sys.coefficients.makeCompressed();
  check_mean_row(sys, mean_row, rates_for(support));
  return sys;
}

double block_product(const TypeSpace& space, const PopulationState& z, const PartialPartition& pp,
                     TypeCode xstar) {
  double prod = 1.0;
  for (SiteSet a : pp.blocks()) prod *= static_cast<double>(z.marginal_count(space, xstar, a));
  return prod;
}

double MomentSolution::value(std::size_t time_index, const PartialPartition& pp) const {
  return values.at(time_index).at(system->find(pp));
}

MomentSolution solve(const MomentSystem& system, const PopulationState& z0,
                     std::span<const double> t_grid) {
  check_time_grid(t_grid);
  if (z0.size() != system.params.population)
    throw ModelError("initial population size does not match N");
  OdeState x(system.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = block_product(system.params.types, z0, system.index[i], system.reference);
  MomentSolution sol;
  sol.system = &system;
  const auto& c = system.coefficients;
  auto rhs = [&c](const OdeState& v, OdeState& dv, double) {
    Eigen::Map<const Eigen::VectorXd> in(v.data(), static_cast<Eigen::Index>(v.size()));
    Eigen::Map<Eigen::VectorXd> out(dv.data(), static_cast<Eigen::Index>(dv.size()));
    out = c * in;
  };
  const double scale = max_abs(x);
  integrate_on_grid(rhs, x, t_grid, 1e-12 * scale, 1e-10, [&](const OdeState& v, double t) {
    sol.times.push_back(t);
    sol.values.push_back(v);
  });
  return sol;
}

void write_system_csv(std::ostream& os, const MomentSystem& system) {
  os << "# moran-moments hierarchy v1 support=" << system.support.to_string() << "\n";
  os << "row_index,col_index,coefficient,row_partition,col_partition\n";
  const auto old = os.precision(17);
  for (Eigen::Index r = 0; r < system.coefficients.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(system.coefficients, r); it; ++it)
      os << r << "," << it.col() << "," << it.value() << ",\""
         << system.index[static_cast<std::size_t>(r)].to_string() << "\",\""
         << system.index[static_cast<std::size_t>(it.col())].to_string() << "\"\n";
  os.precision(old);
}

CalibrationResult calibrate_term_scales() {
  const auto params = ModelParams::create(
      {2, 2, 2}, 3,
      {{SiteSet::of({1}), 1.0 / 3.0}, {SiteSet::of({2}), 1.0 / 2.0}, {SiteSet::of({3}), 3.0 / 4.0}});
  const TypeCode xstar = 0;
  const CtmcOracle oracle(params);
  const auto& space = params.types;
  const PopulationState z0({{space.encode({{0, 0, 0}}), 1},
                            {space.encode({{0, 1, 1}}), 1},
                            {space.encode({{1, 1, 0}}), 1}});
  const Eigen::VectorXd p0 = oracle.point_mass(z0);
  const std::vector<Eigen::VectorXd> dists{p0, oracle.distribution(p0, 0.7)};
  const auto rows = enumerate_partial_partitions(params.all_sites());

  std::vector<std::pair<int, int>> classes;
  for (int j = 0; j <= 3; ++j)
    for (int k = 0; k <= 3; ++k)
      if (j + k >= 1) classes.emplace_back(j, k);

  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size() * dists.size()),
                         static_cast<Eigen::Index>(classes.size()));
  Eigen::VectorXd target(design.rows());
  Eigen::Index line = 0;
  for (const auto& p : dists) {
    for (const auto& pp : rows) {
      const auto rates = marginal_rates<double>(params.rho, pp.support());
      for (std::size_t c = 0; c < classes.size(); ++c) {
        double v = 0.0;
        recombination_terms(
            pp, rates, params.population, CoefficientForm::kPrinted,
            [&](const PartialPartition& tgt, double coef) { v += coef * oracle.moment(p, tgt, xstar); },
            classes[c].first, classes[c].second);
        design(line, static_cast<Eigen::Index>(c)) = v;
      }
      target[line] = oracle.moment_derivative(p, pp, xstar);
      ++line;
    }
  }
  std::vector<Eigen::Index> used;
  for (Eigen::Index c = 0; c < design.cols(); ++c)
    if (design.col(c).norm() > 0.0) used.push_back(c);
  Eigen::MatrixXd reduced(design.rows(), static_cast<Eigen::Index>(used.size()));
  for (std::size_t u = 0; u < used.size(); ++u) reduced.col(static_cast<Eigen::Index>(u)) = design.col(used[u]);
  const Eigen::VectorXd sigma = reduced.colPivHouseholderQr().solve(target);

  CalibrationResult out;
  for (std::size_t u = 0; u < used.size(); ++u)
    out.scales.push_back({classes[static_cast<std::size_t>(used[u])].first,
                          classes[static_cast<std::size_t>(used[u])].second,
                          sigma[static_cast<Eigen::Index>(u)]});
  const Eigen::VectorXd residual = reduced * sigma - target;
  for (Eigen::Index i = 0; i < residual.size(); ++i)
    out.max_relative_residual = std::max(
        out.max_relative_residual, std::abs(residual[i]) / std::max(1.0, std::abs(target[i])));
  return out;
}

// ---- two sites ---------------------------------------------------------------

namespace {

struct TwoSiteCounts {
  double one = 0, two = 0, joint = 0, n = 0;
};

TwoSiteCounts two_site_counts(const ModelParams& params, const PopulationState& z0, TypeCode xstar) {
  if (params.sites() != 2) throw ModelError("two-site closed forms require n = 2");
  if (z0.size() != params.population) throw ModelError("initial population size does not match N");
  const auto& s = params.types;
  return {static_cast<double>(z0.marginal_count(s, xstar, SiteSet::of({1}))),
          static_cast<double>(z0.marginal_count(s, xstar, SiteSet::of({2}))),
          static_cast<double>(z0.marginal_count(s, xstar, SiteSet::of({1, 2}))),
          static_cast<double>(params.population)};
}

}  // namespace

TwoSiteMeanLd::TwoSiteMeanLd(const ModelParams& params, const PopulationState& z0, TypeCode xstar) {
  if (params.has_mutation()) throw ModelError("two-site mean/LD system requires mu = 0");
  const auto c = two_site_counts(params, z0, xstar);
  rho1_ = params.rho_of(SiteSet::of({1}));
  b_ = params.b;
  n_ = c.n;
  initial_ = {c.joint, c.one * c.two, c.n * c.joint - c.one * c.two};
}

TwoSiteMeans TwoSiteMeanLd::at(double t) const {
  const double ld = initial_.ld * std::exp(-decay_rate() * t);
  // (b/N) N E[[1,2]] + rho_1 E[[1][2]] is conserved
  TwoSiteMeans out;
  out.ld = ld;
  if (rho1_ == 0.0 && b_ == 0.0) return initial_;
  const double conserved = b_ / n_ * n_ * initial_.joint + rho1_ * initial_.product;
  const double n_joint = (conserved + rho1_ * ld) / (b_ / n_ + rho1_);
  out.joint = n_joint / n_;
  out.product = n_joint - ld;
  return out;
}

TwoSiteMomentSystem two_site_moments(const ModelParams& params, const PopulationState& z0,
                                     TypeCode xstar, int order) {
  if (params.b != 0.0 || params.has_mutation())
    throw ModelError("two-site moment closure requires b = 0 and mu = 0");
  if (order < 1) throw ModelError("moment order must be at least 1");
  const auto c = two_site_counts(params, z0, xstar);
  const auto a = static_cast<long long>(c.one);
  const auto b = static_cast<long long>(c.two);
  const auto n = static_cast<long long>(c.n);
  const double scale = params.rho_of(SiteSet::of({1})) / c.n;

  // up(X) = (a - X)(b - X), down(X) = X (N - a - b + X), without rho_1/N
  const std::vector<long long> up{a * b, -(a + b), 1};
  const std::vector<long long> down{0, n - a - b, 1};
  auto binom = [](int k, int i) {
    long long r = 1;
    for (int q = 1; q <= i; ++q) r = r * (k - i + q) / q;
    return r;
  };

  TwoSiteMomentSystem sys;
  sys.order = order;
  sys.matrix = Eigen::MatrixXd::Zero(order + 1, order + 1);
  sys.initial.resize(order + 1);
  for (int k = 0; k <= order; ++k) sys.initial[k] = std::pow(c.joint, k);
  for (int k = 1; k <= order; ++k) {
    std::vector<long long> poly(k + 2, 0);
    for (int i = 0; i < k; ++i) {
      const long long plus = binom(k, i);
      const long long minus = ((k - i) % 2 ? -1 : 1) * binom(k, i);
      for (int d = 0; d < 3; ++d) poly[i + d] += up[d] * plus + down[d] * minus;
    }
    if (poly[k + 1] != 0) throw std::logic_error("two-site moment expansion does not close");
    for (int i = 0; i <= k; ++i) sys.matrix(k, i) = scale * static_cast<double>(poly[i]);
  }
  return sys;
}

std::vector<std::vector<double>> TwoSiteMomentSystem::solve(std::span<const double> t_grid) const {
  check_time_grid(t_grid);
  OdeState x(initial.data(), initial.data() + initial.size());
  std::vector<std::vector<double>> out;
  auto rhs = [this](const OdeState& v, OdeState& dv, double) {
    Eigen::Map<const Eigen::VectorXd> in(v.data(), static_cast<Eigen::Index>(v.size()));
    Eigen::Map<Eigen::VectorXd> o(dv.data(), static_cast<Eigen::Index>(dv.size()));
    o = matrix * in;
  };
  integrate_on_grid(rhs, x, t_grid, 1e-12 * max_abs(x), 1e-10,
                    [&](const OdeState& v, double) { out.push_back(v); });
  return out;
}

double poisson_parameter(const ModelParams& params, const PopulationState& z0, TypeCode xstar,
                         SiteSet pair) {
  if (pair.size() != 2) throw ModelError("Poisson parameter needs a pair of sites");
  if (!pair.subset_of(params.all_sites())) throw ModelError("pair is not a subset of the sites");
  if (params.b != 0.0 || params.has_mutation())
    throw ModelError("the Poisson law holds for recombination alone (b = 0, mu = 0)");
  const auto sites = pair.sites();
  const double g1 = static_cast<double>(z0.marginal_count(params.types, xstar, SiteSet::of({sites[0]})));
  const double g2 = static_cast<double>(z0.marginal_count(params.types, xstar, SiteSet::of({sites[1]})));
  double a = 0.0;
  for (std::uint32_t h = 0; h < params.rho.size(); ++h)
    if ((SiteSet::from_mask(h) & pair).size() == 1) a += params.rho[h];
  return a / (2.0 * static_cast<double>(params.population)) * g1 * g2;
}

// ---- single crossover --------------------------------------------------------

SingleCrossoverSystem::SingleCrossoverSystem(const ModelParams& params, TypeCode xstar)
    : params_(params), reference_(xstar) {
  if (params.b != 0.0 || params.has_mutation())
    throw ModelError("single-crossover closure requires b = 0 and mu = 0");
  const int n = params.sites();
  for (std::uint32_t g = 0; g < params.rho.size(); ++g) {
    if (params.rho[g] == 0.0) continue;
    bool ok = false;
    for (int k = 1; k < n; ++k) {
      const std::uint32_t head = (1u << k) - 1u;
      if (g == head || g == (((1u << n) - 1u) & ~head)) ok = true;
    }
    if (!ok)
      throw ModelError("rho for " + SiteSet::from_mask(g).to_string() +
                       " is not a single-crossover set");
  }
  std::map<std::pair<int, int>, std::size_t> where;
  for (int len = 1; len <= n; ++len)
    for (int i = 1; i + len - 1 <= n; ++i) {
      where[{i, i + len - 1}] = intervals_.size();
      intervals_.emplace_back(i, i + len - 1);
    }
  const double n_pop = static_cast<double>(params.population);
  splits_.resize(intervals_.size());
  decay_.assign(intervals_.size(), 0.0);
  auto interval_of = [&](SiteSet s) -> std::size_t {
    const auto v = s.sites();
    if (v.back() - v.front() + 1 != static_cast<int>(v.size()))
      throw std::logic_error("single-crossover split is not an interval");
    return where.at({v.front(), v.back()});
  };
  for (std::size_t idx = 0; idx < intervals_.size(); ++idx) {
    const auto [i, j] = intervals_[idx];
    if (i == j) continue;
    std::vector<int> sites;
    for (int s = i; s <= j; ++s) sites.push_back(s);
    const SiteSet iv = SiteSet::of(sites);
    const auto rates = marginal_rates<double>(params.rho, iv);
    for_each_subset(iv, [&](SiteSet h) {
      const double r = rates[h.mask()];
      if (r == 0.0 || h.empty() || h == iv) return;
      splits_[idx].push_back({interval_of(h), interval_of(h.complement_in(iv)), r / (2.0 * n_pop)});
      decay_[idx] += r / (2.0 * n_pop) * n_pop;
    });
  }
}

std::vector<std::vector<double>> SingleCrossoverSystem::solve_all(const PopulationState& z0,
                                                                  std::span<const double> t_grid) const {
  check_time_grid(t_grid);
  OdeState x(intervals_.size());
  for (std::size_t k = 0; k < intervals_.size(); ++k) {
    std::vector<int> sites;
    for (int s = intervals_[k].first; s <= intervals_[k].second; ++s) sites.push_back(s);
    x[k] = static_cast<double>(z0.marginal_count(params_.types, reference_, SiteSet::of(sites)));
  }
  auto rhs = [this](const OdeState& v, OdeState& dv, double) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      double d = -decay_[k] * v[k];
      for (const Split& s : splits_[k]) d += s.rate * v[s.left] * v[s.right];
      dv[k] = d;
    }
  };
  std::vector<std::vector<double>> out;
  integrate_on_grid(rhs, x, t_grid, 1e-12 * max_abs(x), 1e-10,
                    [&](const OdeState& v, double) { out.push_back(v); });
  return out;
}

std::vector<double> SingleCrossoverSystem::solve(const PopulationState& z0,
                                                 std::span<const double> t_grid) const {
  std::vector<double> out;
  for (const auto& v : solve_all(z0, t_grid)) out.push_back(v.back());
  return out;
}

}  // namespace moran
