#include "moran/deterministic.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "moran/gillespie.hpp"
#include "moran/random.hpp"
#include "moran/replicates.hpp"

namespace moran {

namespace odeint = boost::numeric::odeint;

double Distribution::mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

Distribution zero_distribution(const TypeSpace& space) {
  if (space.size() > kMaxDenseTypes)
    throw ModelError("dense distributions are capped at 4096 types, got " +
                     std::to_string(space.size()));
  return {std::vector<double>(space.size(), 0.0)};
}

Distribution from_population(const TypeSpace& space, const PopulationState& z) {
  Distribution d = zero_distribution(space);
  const double n = static_cast<double>(z.size());
  for (const auto& [t, c] : z.counts()) d.weights.at(t) = static_cast<double>(c) / n;
  return d;
}

namespace {

/// Code of x with every site outside `a` reset to allele 0.
TypeCode fibre_key(const TypeSpace& space, TypeCode x, SiteSet a) {
  for (int s = 1; s <= space.sites(); ++s)
    if (!a.contains(s)) x = space.with_allele(x, s, 0);
  return x;
}

std::vector<TypeCode> fibre_keys(const TypeSpace& space, SiteSet a) {
  std::vector<TypeCode> keys(space.size());
  for (TypeCode x = 0; x < space.size(); ++x) keys[x] = fibre_key(space, x, a);
  return keys;
}

void check_size(const TypeSpace& space, const Distribution& omega) {
  if (omega.size() != space.size()) throw ModelError("distribution does not match the type space");
}

}  // namespace

std::vector<double> marginal_on(const TypeSpace& space, const Distribution& omega, SiteSet a) {
  check_size(space, omega);
  const auto keys = fibre_keys(space, a);
  std::vector<double> by_key(space.size(), 0.0);
  for (TypeCode x = 0; x < space.size(); ++x) by_key[keys[x]] += omega.weights[x];
  std::vector<double> out(space.size());
  for (TypeCode x = 0; x < space.size(); ++x) out[x] = by_key[keys[x]];
  return out;
}

Distribution recombinator(const TypeSpace& space, const Distribution& omega, SiteSet g) {
  check_size(space, omega);
  Distribution out = zero_distribution(space);
  const double m = omega.mass();
  if (m == 0.0) return out;
  const auto on_g = marginal_on(space, omega, g);
  const auto on_c = marginal_on(space, omega, g.complement_in(space.all_sites()));
  for (TypeCode x = 0; x < space.size(); ++x) out.weights[x] = on_g[x] * on_c[x] / m;
  return out;
}

Distribution deterministic_rhs(const TypeSpace& space, std::span<const double> rho,
                               const Distribution& omega) {
  check_size(space, omega);
  Distribution out = zero_distribution(space);
  for (std::uint32_t g = 0; g < rho.size(); ++g) {
    if (rho[g] == 0.0) continue;
    const Distribution r = recombinator(space, omega, SiteSet::from_mask(g));
    for (TypeCode x = 0; x < space.size(); ++x)
      out.weights[x] += rho[g] / 2.0 * (r.weights[x] - omega.weights[x]);
  }
  return out;
}

std::vector<Distribution> integrate(const TypeSpace& space, std::span<const double> rho,
                                    const Distribution& omega0, std::span<const double> t_grid) {
  check_time_grid(t_grid);
  check_size(space, omega0);
  using State = std::vector<double>;
  auto rhs = [&](const State& v, State& dv, double) {
    dv = deterministic_rhs(space, rho, Distribution{v}).weights;
  };
  std::vector<Distribution> path;
  State x = omega0.weights;
  const double scale = std::max(1.0, omega0.mass());
  auto stepper =
      odeint::make_controlled(1e-13 * scale, 1e-10, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_times(stepper, rhs, x, t_grid.begin(), t_grid.end(), 1e-3,
                          [&](const State& v, double) { path.push_back(Distribution{v}); });
  return path;
}

namespace {

void check_partition(const TypeSpace& space, const PartialPartition& blocks) {
  if (blocks.support() != space.all_sites())
    throw ModelError("blocks " + blocks.to_string() + " do not partition the sites");
}

/// prod over blocks of the given per-block measures on X.
std::vector<double> tensor(const std::vector<std::vector<double>>& factors, std::size_t size) {
  std::vector<double> out(size, 1.0);
  for (const auto& f : factors)
    for (std::size_t x = 0; x < size; ++x) out[x] *= f[x];
  return out;
}

}  // namespace

std::vector<double> block_product_measure(const TypeSpace& space, const Distribution& omega,
                                          const PartialPartition& blocks) {
  check_partition(space, blocks);
  std::vector<std::vector<double>> factors;
  for (SiteSet a : blocks.blocks()) factors.push_back(marginal_on(space, omega, a));
  return tensor(factors, space.size());
}

std::vector<double> product_derivative_chain_rule(const TypeSpace& space,
                                                  std::span<const double> rho,
                                                  const Distribution& omega,
                                                  const PartialPartition& blocks) {
  check_partition(space, blocks);
  const Distribution flow = deterministic_rhs(space, rho, omega);
  std::vector<std::vector<double>> factors;
  for (SiteSet a : blocks.blocks()) factors.push_back(marginal_on(space, omega, a));
  std::vector<double> out(space.size(), 0.0);
  for (std::size_t j = 0; j < factors.size(); ++j) {
    auto term = factors;
    term[j] = marginal_on(space, flow, blocks.blocks()[j]);
    const auto t = tensor(term, space.size());
    for (std::size_t x = 0; x < out.size(); ++x) out[x] += t[x];
  }
  return out;
}

std::vector<double> product_derivative_expansion(const TypeSpace& space,
                                                 std::span<const double> rho,
                                                 const Distribution& omega,
                                                 const PartialPartition& blocks,
                                                 double coefficient) {
  check_partition(space, blocks);
  const double m = omega.mass();
  std::vector<std::vector<double>> factors;
  for (SiteSet a : blocks.blocks()) factors.push_back(marginal_on(space, omega, a));
  std::vector<double> out(space.size(), 0.0);
  if (m == 0.0) return out;
  for (std::size_t j = 0; j < factors.size(); ++j) {
    const SiteSet aj = blocks.blocks()[j];
    const auto reduced = marginal_rates<double>(rho, aj);
    for_each_subset(aj, [&](SiteSet bset) {
      const double rate = reduced[bset.mask()];
      if (rate == 0.0) return;
      const auto on_b = marginal_on(space, omega, bset);
      const auto on_rest = marginal_on(space, omega, aj.minus(bset));
      auto term = factors;
      for (std::size_t x = 0; x < space.size(); ++x)
        term[j][x] = on_b[x] * on_rest[x] / m - factors[j][x];
      const auto t = tensor(term, space.size());
      for (std::size_t x = 0; x < out.size(); ++x) out[x] += coefficient * rate * t[x];
    });
  }
  return out;
}

double product_derivative_check(const TypeSpace& space, std::span<const double> rho,
                                const Distribution& omega, const PartialPartition& blocks,
                                double coefficient) {
  const auto lhs = product_derivative_chain_rule(space, rho, omega, blocks);
  const auto rhs = product_derivative_expansion(space, rho, omega, blocks, coefficient);
  double worst = 0.0;
  for (std::size_t x = 0; x < lhs.size(); ++x) worst = std::max(worst, std::abs(lhs[x] - rhs[x]));
  return worst;
}

PopulationState scale_profile(const TypeSpace& space, const Distribution& profile, std::int64_t n) {
  check_size(space, profile);
  const double m = profile.mass();
  if (!(m > 0.0)) throw ModelError("initial profile must have positive mass");
  if (n <= 0) throw ModelError("population size must be positive");
  std::vector<std::int64_t> counts(space.size());
  std::vector<std::pair<double, TypeCode>> remainders;
  std::int64_t assigned = 0;
  for (TypeCode x = 0; x < space.size(); ++x) {
    if (profile.weights[x] < 0.0) throw ModelError("initial profile has a negative weight");
    const double exact = static_cast<double>(n) * profile.weights[x] / m;
    counts[x] = static_cast<std::int64_t>(std::floor(exact));
    assigned += counts[x];
    remainders.emplace_back(exact - static_cast<double>(counts[x]), x);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i].second];
  std::map<TypeCode, std::int64_t> out;
  for (TypeCode x = 0; x < space.size(); ++x)
    if (counts[x]) out.emplace(x, counts[x]);
  return PopulationState(out);
}

LlnResult lln_experiment(const ModelParams& params, const Distribution& profile,
                         std::span<const std::int64_t> populations, double t,
                         const LlnOptions& options) {
  if (params.b != 0.0 || params.has_mutation())
    throw ModelError("the law-of-large-numbers experiment covers recombination alone (b = 0, mu = 0)");
  if (!(t > 0.0)) throw ModelError("time horizon must be positive");
  if (options.grid_points < 2) throw ModelError("need at least two grid points");
  const TypeSpace& space = params.types;
  std::vector<double> grid(options.grid_points);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = t * static_cast<double>(i) / static_cast<double>(grid.size() - 1);

  LlnResult result;
  for (std::size_t k = 0; k < populations.size(); ++k) {
    const std::int64_t n = populations[k];
    ModelParams scaled = params;
    scaled.population = n;
    const PopulationState z0 = scale_profile(space, profile, n);
    const auto path = integrate(space, params.rho, from_population(space, z0), grid);
    LlnRow row;
    row.population = n;
    row.sup_distances.assign(options.replicates, 0.0);
    for_each_replicate(options.replicates, options.strict, [&](std::size_t r) {
      Rng rng = replicate_stream(options.seed, (static_cast<std::uint64_t>(k) << 40) + r);
      const auto traj = simulate(scaled, z0, grid, {}, rng, {.record_states = true});
      double sup = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Distribution emp = from_population(space, traj.states[i]);
        double d = 0.0;
        for (TypeCode x = 0; x < space.size(); ++x) d += std::abs(emp.weights[x] - path[i].weights[x]);
        sup = std::max(sup, d);
      }
      row.sup_distances[r] = sup;
    });
    auto sorted = row.sup_distances;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    row.median_sup_distance =
        sorted.empty() ? 0.0
                       : (sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]));
    result.rows.push_back(std::move(row));
  }
  result.monotone_decreasing = true;
  for (std::size_t i = 1; i < result.rows.size(); ++i)
    if (!(result.rows[i].median_sup_distance < result.rows[i - 1].median_sup_distance))
      result.monotone_decreasing = false;
  if (result.rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(result.rows.size());
    for (const auto& row : result.rows) {
      const double x = std::log(static_cast<double>(row.population));
      const double y = std::log(row.median_sup_distance);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    result.fitted_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return result;
}

void write_lln_csv(std::ostream& os, const LlnResult& result) {
  os << "# moran-moments lln v1 fitted_exponent=" << result.fitted_exponent << "\n";
  os << "population,replicate,sup_distance\n";
  const auto old = os.precision(17);
  for (const auto& row : result.rows) {
    for (std::size_t r = 0; r < row.sup_distances.size(); ++r)
      os << row.population << "," << r << "," << row.sup_distances[r] << "\n";
    os << row.population << ",median," << row.median_sup_distance << "\n";
  }
  os.precision(old);
}

void write_distribution_path_csv(std::ostream& os, const TypeSpace& space,
                                 std::span<const double> times, std::span<const Distribution> path) {
  os << "# moran-moments distribution-path v1\n";
  os << "time,type,weight\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < path.size(); ++i)
    for (TypeCode x = 0; x < space.size(); ++x) {
      const auto g = space.decode(x);
      os << times[i] << ",";
      for (int a : g.alleles) os << a;
      os << "," << path[i].weights[x] << "\n";
    }
  os.precision(old);
}

}  // namespace moran
