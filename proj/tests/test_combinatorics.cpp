#include <doctest.h>

#include <random>
#include <set>

#include "moran/combinatorics.hpp"
#include "oracles.hpp"

using namespace moran;

TEST_CASE("disruption") {
  const std::vector<SiteSet> single{SiteSet::of({1, 2})};
  CHECK_FALSE(disrupts(SiteSet{}, single));
  CHECK_FALSE(disrupts(SiteSet::of({1, 2}), single));
  CHECK(disrupts(SiteSet::of({1}), single));
  CHECK(disrupts(SiteSet::of({2}), single));
  const std::vector<SiteSet> two{SiteSet::of({1, 2}), SiteSet::of({3, 4})};
  CHECK(disrupts(SiteSet::of({1, 3}), two));
  CHECK_FALSE(disrupts(SiteSet::of({1, 2, 3}), two));
  CHECK(disrupts(SiteSet{}, {}));
  // closed under complement inside the union
  const SiteSet u = SiteSet::of({1, 2, 3, 4});
  for_each_subset(u, [&](SiteSet g) { CHECK(disrupts(g, two) == disrupts(g.complement_in(u), two)); });
  // exhaustive n = 4 against the definition
  for_each_subset(u, [&](SiteSet g) {
    bool expect = true;
    for (SiteSet a : two) expect = expect && !(g & a).empty() && (g & a) != a;
    CHECK(disrupts(g, two) == expect);
  });
}

TEST_CASE("marginal rates") {
  const double r1 = 0.3, r2 = 0.7, r3 = 1.9;
  auto p = ModelParams::create({2, 2, 2}, 3,
                               {{SiteSet::of({1}), r1}, {SiteSet::of({2}), r2}, {SiteSet::of({3}), r3}});
  const auto same = marginal_rates<double>(p.rho, p.all_sites());
  CHECK(same == p.rho);
  const SiteSet i = SiteSet::of({1, 2});
  const auto m = marginal_rates<double>(p.rho, i);
  // G = {1} and G = {1,3} = complement of {2}
  CHECK(m[SiteSet::of({1}).mask()] == doctest::Approx(r1 + r2));
  CHECK(m[SiteSet::of({2}).mask()] == doctest::Approx(r2 + r1));
  CHECK(m[0] == doctest::Approx(r3));
  CHECK(m[i.mask()] == doctest::Approx(r3));
  // brute force over all 8 subsets
  for_each_subset(i, [&](SiteSet h) {
    double s = 0.0;
    for (std::uint32_t g = 0; g < 8; ++g)
      if ((SiteSet::from_mask(g) & i) == h) s += p.rho[g];
    CHECK(m[h.mask()] == doctest::Approx(s));
    CHECK(m[h.mask()] == doctest::Approx(m[h.complement_in(i).mask()]));
  });
}

TEST_CASE("iterated lumping is consistent") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> rho(16, 0.0);
    for (std::uint32_t g = 1; g < 15; ++g)
      if (g < (15u & ~g)) rho[g] = rho[15u & ~g] = u(gen);
    for_each_subset(SiteSet::full(4), [&](SiteSet j) {
      for_each_subset(j, [&](SiteSet i) {
        const auto direct = marginal_rates<double>(rho, i);
        const auto twice = marginal_rates<double>(marginal_rates<double>(rho, j), i);
        for (std::size_t k = 0; k < 16; ++k) CHECK(direct[k] == doctest::Approx(twice[k]));
      });
    });
  }
}

TEST_CASE("rho^I_{K,G}") {
  const auto p2 = ModelParams::create({2, 2}, 3, {{SiteSet::of({1}), 0.4}});
  const std::vector<SiteSet> none;
  CHECK(rho_ikg<double>(p2.rho, SiteSet{}, none, SiteSet::of({1})) == 0.4);
  const std::vector<SiteSet> k12{SiteSet::of({1, 2})};
  CHECK(rho_ikg<double>(p2.rho, SiteSet{}, k12, SiteSet{}) == doctest::Approx(0.8));

  // brute force: sum rho_U over U with U & A_I arbitrary, U & A_K disrupting K, U outside == G
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rho(16, 0.0);
    for (std::uint32_t g = 1; g < 15; ++g)
      if (g < (15u & ~g)) rho[g] = rho[15u & ~g] = u(gen);
    // random assignment of the 4 sites to I, K1, K2 or G-side
    std::uint32_t ai = 0, k1 = 0, k2 = 0, rest = 0;
    for (int s = 0; s < 4; ++s) {
      const int which = static_cast<int>(gen() % 4);
      (which == 0 ? ai : which == 1 ? k1 : which == 2 ? k2 : rest) |= 1u << s;
    }
    std::vector<SiteSet> kb;
    if (k1) kb.push_back(SiteSet::from_mask(k1));
    if (k2) kb.push_back(SiteSet::from_mask(k2));
    const std::uint32_t g = rest & static_cast<std::uint32_t>(gen() % 16);
    double expect = 0.0;
    for (std::uint32_t m = 0; m < 16; ++m) {
      if ((m & rest) != g) continue;
      bool ok = true;
      for (SiteSet b : kb) ok = ok && (m & b.mask()) != 0 && (m & b.mask()) != b.mask();
      if (ok) expect += rho[m];
    }
    CHECK(rho_ikg<double>(rho, SiteSet::from_mask(ai), kb, SiteSet::from_mask(g)) == doctest::Approx(expect));
  }
}

TEST_CASE("flip orbit") {
  const std::vector<SiteSet> j{SiteSet::of({1, 2}), SiteSet::of({3, 4})};
  const auto orbit = flip_orbit(SiteSet::of({1, 3}), j);
  REQUIRE(orbit.size() == 4);
  CHECK(orbit[0] == SiteSet::of({1, 3}));
  const std::set<std::uint32_t> masks{orbit[0].mask(), orbit[1].mask(), orbit[2].mask(), orbit[3].mask()};
  CHECK(masks == std::set<std::uint32_t>{SiteSet::of({1, 3}).mask(), SiteSet::of({2, 3}).mask(),
                                         SiteSet::of({1, 4}).mask(), SiteSet::of({2, 4}).mask()});
}

TEST_CASE("partial partitions") {
  CHECK(enumerate_partial_partitions(SiteSet{}).size() == 1);
  CHECK(enumerate_partial_partitions(SiteSet{})[0].empty());
  const auto two = enumerate_partial_partitions(SiteSet::of({1, 2}));
  std::set<std::string> names;
  for (const auto& pp : two) names.insert(pp.to_string());
  CHECK(names == std::set<std::string>{"{}", "{1}", "{2}", "{1}|{2}", "{1,2}"});
  const auto bell = oracle::bell_numbers(11);
  for (int k = 0; k <= 7; ++k) {
    const auto all = enumerate_partial_partitions(SiteSet::full(k));
    CHECK(all.size() == bell[k + 1]);
    CHECK(std::is_sorted(all.begin(), all.end()));
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    for (const auto& pp : all) CHECK(PartialPartition::parse(pp.to_string()) == pp);
  }
  CHECK(enumerate_partial_partitions(SiteSet::full(4)).size() == 52);
  CHECK_THROWS_AS(enumerate_partial_partitions(SiteSet::full(11)), ModelError);
  CHECK_THROWS_AS(PartialPartition({SiteSet::of({1, 2}), SiteSet::of({2})}), ModelError);
  CHECK_THROWS_AS(PartialPartition({SiteSet{}}), ModelError);
  CHECK(PartialPartition({SiteSet::of({2}), SiteSet::of({1, 3})}).to_string() == "{2}|{1,3}");
}

TEST_CASE("(I, J, K) triples") {
  const auto one = enumerate_triples(1);
  REQUIRE(one.size() == 2);
  for (const auto& t : one) CHECK(t.i == 0u);
  CHECK(enumerate_triples(2).size() == 8);
  for (int m = 1; m <= 5; ++m) {
    const auto all = enumerate_triples(m);
    std::size_t expect = 1;
    for (int i = 0; i < m; ++i) expect *= 3;
    CHECK(all.size() == expect - 1);
    const std::uint32_t full = (1u << m) - 1u;
    for (const auto& t : all) {
      CHECK((t.i | t.j | t.k) == full);
      CHECK((t.i & t.j) == 0u);
      CHECK((t.i & t.k) == 0u);
      CHECK((t.j & t.k) == 0u);
      CHECK(t.i != full);
    }
  }
}
