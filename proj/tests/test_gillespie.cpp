#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "moran/gillespie.hpp"

using namespace moran;
using Counts = std::map<TypeCode, std::int64_t>;

namespace {

std::vector<Observable> every_subset(const TypeSpace& space, TypeCode ref) {
  std::vector<Observable> out;
  for_each_subset(space.all_sites(), [&](SiteSet a) { out.push_back({a, ref}); });
  return out;
}

void check_counter_identity(const Simulator& sim, const std::vector<std::int64_t>& initial) {
  for (std::size_t k = 0; k < sim.observables().size(); ++k) {
    const auto& c = sim.counters()[k];
    const auto& ob = sim.observables()[k];
    CHECK(c.value == initial[k] + c.created - c.destroyed);
    CHECK(c.value == sim.state().marginal_count(sim.params().types, ob.reference, ob.sites));
  }
}

}  // namespace

TEST_CASE("total rate components") {
  const auto none = ModelParams::create({2, 2}, 10, {});
  CHECK(total_rate(PopulationState(Counts{{0, 10}}), none).total() == 0.0);

  const auto p = ModelParams::create({2, 2}, 10, {{SiteSet::of({1}), 1.0}});
  CHECK(total_rate(PopulationState(Counts{{0, 4}, {3, 6}}), p).recombination == doctest::Approx(5.0));

  const auto q = ModelParams::create({2, 3}, 6, {{SiteSet::of({1}), 0.7}}, {{2, 0, 2, 0.25}, {1, 1, 0, 0.5}},
                                     1.5);
  std::mt19937 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    Counts c;
    for (int i = 0; i < 6; ++i) ++c[gen() % q.types.size()];
    const PopulationState z(c);
    const auto r = total_rate(z, q);
    CHECK(r.recombination == doctest::Approx(6.0 / 4.0 * 1.4));
    CHECK(r.resampling == doctest::Approx(1.5 * 6.0 / 2.0));
    double mut = 0.0;
    for (const auto& [t, k] : z.counts())
      mut += static_cast<double>(k) * ((q.types.allele(t, 2) == 0 ? 0.25 : 0.0) +
                                       (q.types.allele(t, 1) == 1 ? 0.5 : 0.0));
    CHECK(r.mutation == doctest::Approx(mut));
    CHECK(Simulator(q, z).rates().total() == doctest::Approx(r.total()));
  }
}

TEST_CASE("absorbing and monomorphic states") {
  const auto none = ModelParams::create({2, 2}, 4, {});
  Rng rng(1);
  CHECK_FALSE(Simulator(none, PopulationState(Counts{{1, 4}})).sample_event(rng).has_value());

  const auto p = ModelParams::create({2, 2, 2}, 5, {{SiteSet::of({1}), 1.0}, {SiteSet::of({2}), 0.5}});
  Simulator sim(p, PopulationState(Counts{{5, 5}}));
  for (int i = 0; i < 200; ++i) {
    const auto e = sim.sample_event(rng);
    REQUIRE(e.has_value());
    sim.apply_event(*e);
    CHECK(sim.state().counts() == Counts{{5, 5}});
  }
}

TEST_CASE("self-pairing changes nothing but moves the full-set counters equally") {
  const auto p = ModelParams::create({2, 2}, 3, {{SiteSet::of({1}), 1.0}});
  Simulator sim(p, PopulationState(Counts{{0, 2}, {3, 1}}), {{p.all_sites(), 0}, {SiteSet::of({1}), 0}});
  Event e;
  e.g = SiteSet::of({1});
  e.first = e.second = 0;
  e.x = e.y = sim.individuals()[0];
  REQUIRE(e.x == 0);
  sim.apply_event(e);
  CHECK(sim.state().counts() == Counts{{0, 2}, {3, 1}});
  CHECK(sim.counters()[0].created == 2);
  CHECK(sim.counters()[0].destroyed == 2);
  CHECK(sim.counters()[0].value == 2);
  CHECK(sim.counters()[1].created == 0);  // {1} is not split by G = {1}
}

TEST_CASE("counter identity and mass conservation at every event") {
  const auto p = ModelParams::create({2, 3, 2}, 7, {{SiteSet::of({1}), 0.8}, {SiteSet::of({2}), 0.3}},
                                     {{1, 0, 1, 0.2}, {2, 2, 0, 0.4}, {2, 0, 1, 0.1}}, 0.9);
  const TypeCode ref = p.types.encode(Genotype{{0, 1, 1}});
  Simulator sim(p, PopulationState(Counts{{ref, 3}, {0, 2}, {11, 2}}), every_subset(p.types, ref));
  std::vector<std::int64_t> initial;
  for (const auto& c : sim.counters()) initial.push_back(c.value);
  Rng rng(99);
  for (int i = 0; i < 3000; ++i) {
    const auto e = sim.sample_event(rng);
    REQUIRE(e.has_value());
    sim.apply_event(*e);
    CHECK(sim.state().size() == 7);
    check_counter_identity(sim, initial);
  }
}

TEST_CASE("event class frequencies match the class rates") {
  const auto p = ModelParams::create({2, 2}, 8, {{SiteSet::of({1}), 1.0}}, {{1, 0, 1, 0.3}, {2, 1, 0, 0.6}}, 0.5);
  Simulator sim(p, PopulationState(Counts{{0, 3}, {1, 2}, {2, 1}, {3, 2}}));
  const auto r = sim.rates();
  Rng rng(2024);
  const int draws = 100000;
  std::map<EventKind, int> seen;
  for (int i = 0; i < draws; ++i) ++seen[sim.sample_event(rng)->kind];
  const std::pair<EventKind, double> classes[] = {{EventKind::kRecombination, r.recombination},
                                                  {EventKind::kMutation, r.mutation},
                                                  {EventKind::kResampling, r.resampling}};
  for (const auto& [kind, rate] : classes) {
    const double prob = rate / r.total();
    const double sd = std::sqrt(draws * prob * (1 - prob));
    CHECK(std::abs(seen[kind] - draws * prob) < 4 * sd);
  }
}

TEST_CASE("(G, x, y) draws are proportional to rho_G z(x) z(y)") {
  const auto p = ModelParams::create({2, 2, 2}, 5, {{SiteSet::of({1}), 1.0}, {SiteSet::of({2}), 0.5}});
  const PopulationState z(Counts{{0, 3}, {7, 2}});
  const Simulator sim(p, z);
  Rng rng(17);
  const int draws = 100000;
  std::map<std::tuple<std::uint32_t, TypeCode, TypeCode>, int> seen;
  for (int i = 0; i < draws; ++i) {
    const auto e = sim.sample_event(rng);
    ++seen[{e->g.mask(), e->x, e->y}];
  }
  double rho_sum = 0.0;
  for (double v : p.rho) rho_sum += v;
  double chi2 = 0.0;
  int cells = 0;
  for (std::uint32_t g = 0; g < p.rho.size(); ++g) {
    if (p.rho[g] == 0.0) continue;
    for (const auto& [x, cx] : z.counts())
      for (const auto& [y, cy] : z.counts()) {
        const double expect = draws * p.rho[g] / rho_sum * static_cast<double>(cx * cy) / 25.0;
        const double d = seen[{g, x, y}] - expect;
        chi2 += d * d / expect;
        ++cells;
      }
  }
  CHECK(cells == 16);  // four nonzero G (two complementary pairs)
  const boost::math::chi_squared dist(cells - 1);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.001);
}

TEST_CASE("first-event increment rate of <S> on a frozen state") {
  const auto p = ModelParams::create({2, 2, 2}, 6, {{SiteSet::of({1}), 1.0}, {SiteSet::of({3}), 0.4}});
  const PopulationState z(Counts{{0, 2}, {3, 1}, {5, 2}, {6, 1}});
  const TypeCode ref = 0;
  const Simulator frozen(p, z, {{p.all_sites(), ref}});
  const double total = frozen.rates().total();
  Rng rng(3);
  const int draws = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    Simulator sim = frozen;
    sim.apply_event(*sim.sample_event(rng));
    const double inc = static_cast<double>(sim.counters()[0].created);
    sum += inc;
    sum2 += inc * inc;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  double expect = 0.0;
  for_each_subset(p.all_sites(), [&](SiteSet g) {
    expect += p.rho_of(g) / 12.0 * static_cast<double>(z.marginal_count(p.types, ref, g)) *
              static_cast<double>(z.marginal_count(p.types, ref, g.complement_in(p.all_sites())));
  });
  CHECK(std::abs(mean * total - expect) < 4 * se * total);
}

TEST_CASE("simulate on a grid") {
  const auto p = ModelParams::create({2, 2, 2}, 9, {{SiteSet::of({1}), 1.0}, {SiteSet::of({2}), 0.7}});
  const PopulationState z0(Counts{{0, 4}, {7, 3}, {2, 2}});
  const std::vector<Observable> obs{{SiteSet::of({1}), 0}, {SiteSet::of({2}), 0}, {SiteSet::of({3}), 0},
                                    {SiteSet::of({1, 2}), 0}, {p.all_sites(), 0}};

  SUBCASE("t_grid = [0] returns the initial observables") {
    Rng rng(4);
    const std::vector<double> grid{0.0};
    const auto traj = simulate(p, z0, grid, obs, rng);
    REQUIRE(traj.samples.size() == 1);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      CHECK(traj.samples[0][k].value == z0.marginal_count(p.types, 0, obs[k].sites));
      CHECK(traj.samples[0][k].created == 0);
    }
    CHECK(traj.final_state == z0);
  }

  SUBCASE("one-site marginals are constant without mutation and resampling") {
    std::vector<double> grid;
    for (int i = 0; i <= 50; ++i) grid.push_back(0.2 * i);
    for (std::uint64_t r = 0; r < 20; ++r) {
      Rng rng = replicate_stream(8, r);
      const auto traj = simulate(p, z0, grid, obs, rng, {.record_states = true});
      for (std::size_t t = 0; t < grid.size(); ++t) {
        for (std::size_t k = 0; k < 3; ++k) CHECK(traj.samples[t][k].value == traj.samples[0][k].value);
        for (std::size_t k = 0; k < obs.size(); ++k)
          CHECK(traj.samples[t][k].value == traj.states[t].marginal_count(p.types, 0, obs[k].sites));
      }
    }
  }

  SUBCASE("seeded runs are reproducible") {
    const std::vector<double> grid{0.0, 0.5, 1.0, 3.0};
    Rng a = replicate_stream(42, 3), b = replicate_stream(42, 3), c = replicate_stream(42, 4);
    const auto ta = simulate(p, z0, grid, obs, a);
    const auto tb = simulate(p, z0, grid, obs, b);
    const auto tc = simulate(p, z0, grid, obs, c);
    CHECK(ta.final_state == tb.final_state);
    CHECK(ta.events == tb.events);
    std::ostringstream sa, sb, sc;
    write_trajectory_csv(sa, p.types, ta);
    write_trajectory_csv(sb, p.types, tb);
    write_trajectory_csv(sc, p.types, tc);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str() != sc.str());
  }

  SUBCASE("csv layout") {
    Rng rng(5);
    const std::vector<double> grid{0.0, 1.0};
    std::ostringstream os;
    write_trajectory_csv(os, p.types, simulate(p, z0, grid, obs, rng));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "# moran-moments trajectory v1 reference=0,0,0");
    std::getline(is, line);
    CHECK(line == "time,observable_id,value");
    std::getline(is, line);
    CHECK(line == "0,[{1}],6");
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 2 * 3 * static_cast<int>(obs.size()));
  }

  SUBCASE("bad grids") {
    Rng rng(6);
    const std::vector<double> empty, late{0.5, 1.0}, flat{0.0, 1.0, 1.0};
    CHECK_THROWS_AS(simulate(p, z0, empty, obs, rng), ModelError);
    CHECK_THROWS_AS(simulate(p, z0, late, obs, rng), ModelError);
    CHECK_THROWS_AS(simulate(p, z0, flat, obs, rng), ModelError);
    CHECK_THROWS_AS(Simulator(p, PopulationState(Counts{{0, 3}})), ModelError);
  }
}
