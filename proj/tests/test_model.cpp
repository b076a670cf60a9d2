#include <doctest.h>

#include <boost/rational.hpp>

#include <random>

#include "moran/model.hpp"
#include "oracles.hpp"

using namespace moran;
using Rat = boost::rational<long long>;
using Counts = std::map<TypeCode, std::int64_t>;

namespace {

ModelParams three_site(double r1, double r2, double r3, std::int64_t n) {
  return ModelParams::create({2, 2, 2}, n,
                             {{SiteSet::of({1}), r1}, {SiteSet::of({2}), r2}, {SiteSet::of({3}), r3}});
}

}  // namespace

TEST_CASE("site sets") {
  const SiteSet a = SiteSet::of({1, 3});
  CHECK(a.mask() == 0b101u);
  CHECK(a.to_string() == "{1,3}");
  CHECK(a.complement_in(SiteSet::full(3)) == SiteSet::of({2}));
  CHECK(a.complement_in(SiteSet::full(4)) == SiteSet::of({2, 4}));
  CHECK(SiteSet::full(16).size() == 16);
  CHECK_THROWS(SiteSet::of({17}));
  CHECK_THROWS(SiteSet::full(17));
  int count = 0;
  for_each_subset(SiteSet::of({2, 4, 5}), [&](SiteSet) { ++count; });
  CHECK(count == 8);
}

TEST_CASE("recombine keeps x on G and y elsewhere") {
  const Genotype x{{0, 1, 2}}, y{{3, 4, 5}};
  CHECK(recombine(x, y, SiteSet::full(3)) == x);
  CHECK(recombine(x, y, SiteSet{}) == y);
  CHECK(recombine(x, y, SiteSet::of({1, 3})) == Genotype{{0, 4, 2}});
}

TEST_CASE("recombine(x, y, G) == recombine(y, x, complement G), exhaustively for n = 3") {
  const TypeSpace space({2, 2, 2});
  const SiteSet all = space.all_sites();
  for (TypeCode x = 0; x < space.size(); ++x)
    for (TypeCode y = 0; y < space.size(); ++y)
      for_each_subset(all, [&](SiteSet g) {
        CHECK(space.recombine(x, y, g) == space.recombine(y, x, g.complement_in(all)));
        CHECK(recombine(space.decode(x), space.decode(y), g) == space.decode(space.recombine(x, y, g)));
      });
}

TEST_CASE("projection") {
  const Genotype x{{0, 1, 2}};
  CHECK(project(x, SiteSet::full(3)).alleles == x.alleles);
  CHECK(project(x, SiteSet::of({2})).alleles == std::vector<int>{1});
  // project(recombine(x, y, G), I) depends only on x on G & I and y on I \ G
  const TypeSpace space({2, 3, 2});
  std::mt19937 gen(7);
  for (int trial = 0; trial < 300; ++trial) {
    const TypeCode x = gen() % space.size(), y = gen() % space.size();
    const TypeCode x2 = gen() % space.size(), y2 = gen() % space.size();
    const SiteSet g = SiteSet::from_mask(gen() % 8), i = SiteSet::from_mask(gen() % 8);
    const bool same_inputs = space.project(x, g & i) == space.project(x2, g & i) &&
                             space.project(y, i.minus(g)) == space.project(y2, i.minus(g));
    if (same_inputs)
      CHECK(space.project(space.recombine(x, y, g), i) == space.project(space.recombine(x2, y2, g), i));
  }
}

TEST_CASE("marginalize") {
  const TypeSpace space({2, 2, 3});
  const PopulationState z({{0, 2}, {5, 1}, {7, 3}, {11, 4}});
  const auto full = marginalize(space, z, space.all_sites());
  CHECK(full.size() == z.counts().size());
  const auto none = marginalize(space, z, SiteSet{});
  REQUIRE(none.size() == 1);
  CHECK(none.begin()->second == z.size());
  // tower property
  const SiteSet j = SiteSet::of({1, 3}), i = SiteSet::of({3});
  std::map<std::vector<int>, std::int64_t> via_j;
  for (const auto& [m, c] : marginalize(space, z, j)) via_j[{m.alleles.back()}] += c;
  std::map<std::vector<int>, std::int64_t> direct;
  for (const auto& [m, c] : marginalize(space, z, i)) direct[m.alleles] += c;
  CHECK(via_j == direct);
}

TEST_CASE("recombination updates") {
  const TypeSpace space({2, 2, 2});
  const SiteSet all = space.all_sites();
  for (TypeCode x = 0; x < space.size(); ++x) {
    CHECK(recombination_update(space, all, x, (x + 3) % 8).is_zero());
    for_each_subset(all, [&](SiteSet g) { CHECK(recombination_update(space, g, x, x).is_zero()); });
  }
  // invariant under the four labelings
  for (TypeCode x = 0; x < space.size(); ++x)
    for (TypeCode y = 0; y < space.size(); ++y)
      for_each_subset(all, [&](SiteSet g) {
        const SiteSet c = g.complement_in(all);
        const auto u = recombination_update(space, g, x, y);
        CHECK(u.total() == 0);
        CHECK(u == recombination_update(space, c, x, y));
        CHECK(u == recombination_update(space, g, y, x));
        CHECK(u == recombination_update(space, c, y, x));
      });
}

TEST_CASE("population state rejects negative counts") {
  PopulationState z({{0, 1}, {1, 1}});
  SignedUpdate u;
  u.add(0, -2);
  u.add(1, 2);
  CHECK_THROWS_AS(z.apply(u), ModelError);
  CHECK_THROWS_AS(PopulationState(Counts{{0, -1}}), ModelError);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_WITH_AS(ModelParams::create({2, 2}, 4, {{SiteSet::of({1, 2}), 1.0}}),
                       "rho for the full set S must be 0", ModelError);
  CHECK_THROWS_WITH_AS(ModelParams::create({2, 2}, 4, {{SiteSet{}, 1.0}}), "rho for the empty set must be 0",
                       ModelError);
  CHECK_THROWS_AS(ModelParams::create({2, 2, 2}, 4, {{SiteSet::of({1}), 1.0}, {SiteSet::of({2, 3}), 2.0}}),
                  ModelError);
  CHECK_THROWS_AS(ModelParams::create({2, 2}, 0, {}), ModelError);
  CHECK_THROWS_AS(ModelParams::create({2, 2}, 4, {}, {{1, 0, 1, -1.0}}), ModelError);
  CHECK_THROWS_AS(ModelParams::create({2, 2}, 4, {}, {}, -1.0), ModelError);

  const auto p = ModelParams::create({2, 2, 2}, 4, {{SiteSet::of({2, 3}), 0.5}}, {{2, 1, 1, 9.0}, {2, 0, 1, 0.3}});
  CHECK(p.rho_of(SiteSet::of({1})) == 0.5);
  CHECK(p.rho_of(SiteSet::of({2, 3})) == 0.5);
  CHECK(p.mu[1][1][1] == 0.0);
  CHECK(p.mu[1][0][1] == 0.3);
  CHECK(p.mutation_out_rate(2, 0) == 0.3);
}

TEST_CASE("true-jump rates vanish on a monomorphic population") {
  const auto p = three_site(1.0, 0.5, 0.25, 5);
  const auto r = true_jump_rates(p, PopulationState(Counts{{3, 5}}), 3);
  CHECK(r.up == 0.0);
  CHECK(r.down == 0.0);
}

TEST_CASE("true-jump rates, n = 2, N = 2 against the base-event sum") {
  const auto p = ModelParams::create({2, 2}, 2, {{SiteSet::of({1}), 1.0}});
  const PopulationState z({{0, 1}, {3, 1}});
  const auto r = true_jump_rates(p, z, 0);
  const auto brute = oracle::brute_jump_rates(p.types, p.rho, z, 0);
  CHECK(r.up == doctest::Approx(brute.up).epsilon(1e-15));
  CHECK(r.down == doctest::Approx(brute.down).epsilon(1e-15));
  CHECK(r.down == doctest::Approx(0.5));  // ({00,11} -> {01,10}) at 4 labelings x 1/8
}

TEST_CASE("true-jump rates equal the base-event sum exactly, n <= 3, N <= 5") {
  const std::vector<Rat> rates{Rat(1, 3), Rat(2, 7), Rat(5, 4)};
  for (int n = 1; n <= 3; ++n) {
    const TypeSpace space(std::vector<int>(n, 2));
    const std::uint32_t full = (1u << n) - 1u;
    std::vector<Rat> rho(1u << n, Rat(0));
    for (std::uint32_t g = 1; g < full; ++g) rho[g] = rho[full & ~g] = rates[(g * 7 + (full & ~g)) % 3];
    for (std::int64_t N = 1; N <= 5; ++N)
      for (const auto& z : oracle::all_states(space, N))
        for (TypeCode xs = 0; xs < space.size(); ++xs) {
          const auto r = true_jump_rates<Rat>(space, rho, z, xs);
          const auto b = oracle::brute_jump_rates(space, rho, z, xs);
          CHECK(r.up == b.up);
          CHECK(r.down == b.down);
        }
  }
}

TEST_CASE("true-jump rates reject mutation and resampling") {
  const auto with_b = ModelParams::create({2, 2}, 3, {{SiteSet::of({1}), 1.0}}, {}, 0.5);
  CHECK_THROWS_AS(true_jump_rates(with_b, PopulationState(Counts{{0, 3}}), 0), ModelError);
  const auto with_mu = ModelParams::create({2, 2}, 3, {{SiteSet::of({1}), 1.0}}, {{1, 0, 1, 0.1}});
  CHECK_THROWS_AS(true_jump_rates(with_mu, PopulationState(Counts{{0, 3}}), 0), ModelError);
}
