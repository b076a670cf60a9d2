#include <doctest.h>

#include <cmath>
#include <sstream>

#include "moran/ctmc_oracle.hpp"
#include "moran/stats.hpp"

using namespace moran;
using Counts = std::map<TypeCode, std::int64_t>;

namespace {

std::vector<MomentObservable> all_moments(SiteSet sites) {
  std::vector<MomentObservable> out;
  for (const auto& pp : enumerate_partial_partitions(sites))
    if (!pp.empty()) out.push_back({pp, 0});
  return out;
}

std::vector<Prediction> oracle_predictions(const CtmcOracle& o, const PopulationState& z0,
                                           std::span<const MomentObservable> obs, std::span<const double> grid) {
  std::vector<Prediction> out;
  for (double t : grid) {
    const Eigen::VectorXd p = o.distribution(o.point_mass(z0), t);
    for (const auto& ob : obs) out.push_back({ob.id(), t, o.moment(p, ob.blocks, ob.reference)});
  }
  return out;
}

}  // namespace

TEST_CASE("summaries") {
  const std::vector<double> same(10, 3.0);
  const auto s = summarize(same);
  CHECK(s.mean == 3.0);
  CHECK(s.se == 0.0);
  const std::vector<double> v{1, 2, 3, 4};
  const auto t = summarize(v);
  CHECK(t.mean == 2.5);
  CHECK(t.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(t.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("verdicts") {
  CHECK(compare_one("a", 0, 2.0, 0.0, 2.0, 3).verdict == Verdict::kPass);
  CHECK(compare_one("a", 0, 2.0, 0.0, 2.0 + 1e-9, 3).verdict == Verdict::kExactMismatch);
  CHECK(compare_one("a", 0, 2.0, 0.5, 3.4, 3).verdict == Verdict::kPass);
  const auto far = compare_one("a", 0, 2.0, 0.5, 3.6, 3);
  CHECK(far.verdict == Verdict::kFail);
  CHECK(far.z == doctest::Approx(-3.2));
  CHECK(to_string(Verdict::kExactMismatch) == "exact-mismatch");

  const std::vector<MomentEstimate> est{{"{1}", 0.0, 1.0, 0.0, 10}};
  const std::vector<Prediction> wrong_key{{"{2}", 0.0, 1.0}};
  CHECK_THROWS_AS(compare(est, wrong_key, 3), ModelError);
  const std::vector<Prediction> wrong_time{{"{1}", 1.0, 1.0}};
  CHECK_THROWS_AS(compare(est, wrong_time, 3), ModelError);
}

TEST_CASE("moment estimates against the exact chain") {
  const auto params = ModelParams::create({2, 2}, 4, {{SiteSet::of({1}), 1.2}}, {{1, 1, 0, 0.3}});
  const CtmcOracle o(params);
  const PopulationState z0(Counts{{0, 1}, {3, 2}, {2, 1}});
  const auto obs = all_moments(params.all_sites());
  const std::vector<double> grid{0.0, 0.7, 2.0};
  const auto est = estimate_moments(params, z0, obs, grid, {10000, 5, false});
  const auto report = compare(est, oracle_predictions(o, z0, obs, grid), 4.0);
  CHECK(report.failed == 0);
  for (const auto& row : report.rows)
    if (row.time == 0.0) {
      CHECK(row.se == 0.0);
      CHECK(row.verdict == Verdict::kPass);
    }
  std::ostringstream os;
  write_comparison_csv(os, report);
  CHECK(os.str().find("observable_id,time,estimate,se,prediction,z,verdict\n\"{1}\",0,") != std::string::npos);
  CHECK_THROWS_AS(estimate_moments(params, z0, obs, grid, {1, 5, false}), ModelError);
}

TEST_CASE("calibration: correct predictions pass at z = 3 about 99.7% of the time") {
  const auto params = ModelParams::create({2, 2}, 4, {{SiteSet::of({1}), 0.8}});
  const CtmcOracle o(params);
  const PopulationState z0(Counts{{0, 2}, {3, 2}});
  const std::vector<MomentObservable> obs{{PartialPartition({params.all_sites()}), 0}};
  const std::vector<double> grid{0.0, 1.0};
  const auto pred = oracle_predictions(o, z0, obs, grid);
  int failed = 0;
  const int runs = 60;
  for (int seed = 0; seed < runs; ++seed) {
    const auto est = estimate_moments(params, z0, obs, grid, {2000, 1000u + seed, false});
    failed += static_cast<int>(compare(est, pred, 3.0).failed);
  }
  // P(failures >= 3) under Binomial(60, 0.0027) is below 1e-3
  CHECK(failed <= 2);
}

TEST_CASE("results do not depend on the number of workers") {
  const auto params = ModelParams::create({2, 2, 2}, 6, {{SiteSet::of({1}), 0.8}, {SiteSet::of({2}), 0.4}}, {},
                                          0.5);
  const PopulationState z0(Counts{{0, 3}, {7, 3}});
  const auto obs = all_moments(params.all_sites());
  const std::vector<double> grid{0.0, 0.5, 1.5};
  ReplicateOptions strict{500, 77, true};
  ReplicateOptions threaded{500, 77, false};
  threaded.workers = 4;
  const auto a = estimate_moments(params, z0, obs, grid, strict);
  const auto b = estimate_moments(params, z0, obs, grid, threaded);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].mean == b[i].mean);
    CHECK(a[i].se == b[i].se);
  }
  std::vector<int> seen(1000, 0);
  for_each_replicate_on(8, seen.size(), [&](std::size_t r) { seen[r] += 1; });
  CHECK(std::count(seen.begin(), seen.end(), 1) == 1000);
  CHECK_THROWS_AS(for_each_replicate_on(3, 100, [](std::size_t r) {
                    if (r == 42) throw ModelError("boom");
                  }),
                  ModelError);
}

TEST_CASE("three-site resampling derivative, exactly") {
  // The chain's derivative of E[[1][2][3]] equals (b/N) E[N([1][2,3] + [2][1,3] + [3][1,2]) - 3[1][2][3]].
  const auto params = ModelParams::create({2, 2, 2}, 4, {{SiteSet::of({1}), 0.6}, {SiteSet::of({3}), 0.3}}, {}, 1.0);
  const CtmcOracle o(params);
  const auto& space = params.types;
  const PopulationState z0(Counts{{0, 2}, {7, 1}, {1, 1}});
  const double n = 4.0, b = 1.0;
  auto count = [&](const PopulationState& z, std::initializer_list<int> s) {
    return static_cast<double>(z.marginal_count(space, 0, SiteSet::of(s)));
  };
  Eigen::VectorXd four(static_cast<Eigen::Index>(o.index().size())), ten(four.size());
  for (std::size_t i = 0; i < o.index().size(); ++i) {
    const PopulationState z = o.index().state(i);
    const double s1 = count(z, {1}), s2 = count(z, {2}), s3 = count(z, {3});
    const double s12 = count(z, {1, 2}), s13 = count(z, {1, 3}), s23 = count(z, {2, 3}), s123 = count(z, {1, 2, 3});
    four[static_cast<Eigen::Index>(i)] = b / n * (n * (s1 * s23 + s2 * s13 + s3 * s12) - 3 * s1 * s2 * s3);
    ten[static_cast<Eigen::Index>(i)] =
        b / n * (n * (s1 * s23 + s2 * s13 + s3 * s12) + s1 * s12 * s13 + s2 * s12 * s23 + s3 * s13 * s23 -
                 3 * s1 * s2 * s3 - (s1 * s1 + s2 * s2 + s3 * s3) * s123);
  }
  const PartialPartition singles({SiteSet::of({1}), SiteSet::of({2}), SiteSet::of({3})});
  double worst_ten = 0.0;
  for (double t : {0.0, 0.5, 1.5}) {
    const Eigen::VectorXd p = o.distribution(o.point_mass(z0), t);
    const double d = o.moment_derivative(p, singles, 0);
    CHECK(p.dot(four) == doctest::Approx(d).epsilon(1e-10));
    worst_ten = std::max(worst_ten, std::abs(p.dot(ten) - d));
  }
  CHECK(worst_ten > 1e-2);
}

TEST_CASE("nonclosure check") {
  SUBCASE("no resampling: both sides vanish") {
    const auto params = ModelParams::create({2, 2, 2}, 10, {});
    NonclosureOptions opt;
    opt.replicates = {200, 3, false};
    const auto r = three_site_nonclosure_check(params, PopulationState(Counts{{0, 5}, {7, 5}}), 0, 1.0, opt);
    CHECK(r.derivative == 0.0);
    CHECK(r.printed_bracket.prediction == 0.0);
    CHECK(r.corrected_bracket.prediction == 0.0);
    CHECK(r.printed_bracket.verdict == Verdict::kPass);
    CHECK(r.constituents.size() == 10);
  }
  SUBCASE("refusals") {
    NonclosureOptions opt;
    opt.replicates = {100, 3, false};
    const auto two = ModelParams::create({2, 2}, 10, {}, {}, 1.0);
    CHECK_THROWS_AS(three_site_nonclosure_check(two, PopulationState(Counts{{0, 10}}), 0, 1.0, opt), ModelError);
    const auto three = ModelParams::create({2, 2, 2}, 10, {}, {}, 1.0);
    opt.step = 2.0;
    CHECK_THROWS_AS(three_site_nonclosure_check(three, PopulationState(Counts{{0, 10}}), 0, 1.0, opt), ModelError);
  }
}
