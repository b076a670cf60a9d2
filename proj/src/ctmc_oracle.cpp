#include "moran/ctmc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace moran {

RateSet<double> rate_set(const ModelParams& params) {
  return {params.rho, params.mu, params.b};
}

std::uint64_t StateIndex::count_states(std::uint64_t type_count, std::int64_t population) {
  // binomial(N + K - 1, N) computed incrementally as a product of exact binomials
  const std::uint64_t k = type_count - 1;
  const auto n = static_cast<std::uint64_t>(population);
  const std::uint64_t r = std::min(n, k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    acc = acc * (n + k - r + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

namespace {

void compositions(std::size_t slot, std::int32_t left, std::vector<std::int32_t>& cur,
                  std::vector<std::vector<std::int32_t>>& out) {
  if (slot + 1 == cur.size()) {
    cur[slot] = left;
    out.push_back(cur);
    return;
  }
  for (std::int32_t c = left; c >= 0; --c) {
    cur[slot] = c;
    compositions(slot + 1, left - c, cur, out);
  }
  cur[slot] = 0;
}

}  // namespace

StateIndex::StateIndex(const TypeSpace& space, std::int64_t population)
    : type_count_(space.size()), population_(population) {
  const std::uint64_t n_states = count_states(space.size(), population);
  if (n_states > kMaxOracleStates)
    throw ModelError("exact oracle needs " + std::to_string(n_states) +
                     " states, more than the cap of " + std::to_string(kMaxOracleStates));
  states_.reserve(n_states);
  std::vector<std::int32_t> cur(type_count_, 0);
  compositions(0, static_cast<std::int32_t>(population), cur, states_);
  for (std::size_t i = 0; i < states_.size(); ++i) lookup_.emplace(states_[i], i);
}

std::size_t StateIndex::index_of(const std::vector<std::int32_t>& composition) const {
  auto it = lookup_.find(composition);
  if (it == lookup_.end()) throw ModelError("composition is not a state of this index");
  return it->second;
}

std::size_t StateIndex::index_of(const PopulationState& z) const {
  std::vector<std::int32_t> comp(type_count_, 0);
  for (const auto& [t, c] : z.counts()) {
    if (t >= type_count_) throw ModelError("population contains an invalid type");
    comp[t] = static_cast<std::int32_t>(c);
  }
  return index_of(comp);
}

PopulationState StateIndex::state(std::size_t idx) const {
  std::map<TypeCode, std::int64_t> counts;
  const auto& comp = states_[idx];
  for (std::size_t t = 0; t < comp.size(); ++t)
    if (comp[t]) counts.emplace(t, comp[t]);
  return PopulationState(counts);
}

GeneratorMatrix build_generator(const ModelParams& params, const StateIndex& index) {
  const auto rows = assemble_transitions<double>(index, params.types, rate_set(params));
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t s = 0; s < rows.size(); ++s) {
    double out = 0.0;
    for (const auto& [to, rate] : rows[s]) {
      entries.emplace_back(static_cast<int>(s), static_cast<int>(to), rate);
      out += rate;
    }
    if (out != 0.0) entries.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  GeneratorMatrix q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  q.setFromTriplets(entries.begin(), entries.end());
  q.makeCompressed();
  return q;
}

Eigen::VectorXd transient_distribution(const GeneratorMatrix& q, const Eigen::VectorXd& p0,
                                       double t) {
  if (!(t >= 0.0)) throw ModelError("transient time must be nonnegative");
  double lambda = 0.0;
  for (Eigen::Index s = 0; s < q.outerSize(); ++s) lambda = std::max(lambda, -q.coeff(s, s));
  if (t == 0.0 || lambda == 0.0) return p0;
  lambda *= 1.0 + 1e-9;
  const GeneratorMatrix qt = q.transpose();
  const int windows = static_cast<int>(std::ceil(lambda * t / 30.0));
  const double dt = t / windows;
  const double mean = lambda * dt;
  Eigen::VectorXd p = p0;
  for (int w = 0; w < windows; ++w) {
    Eigen::VectorXd term = p;
    double weight = std::exp(-mean);
    double mass = weight;
    Eigen::VectorXd acc = weight * term;
    for (int k = 1; 1.0 - mass > 1e-13 && k < 10000; ++k) {
      term += (qt * term) / lambda;
      weight *= mean / k;
      mass += weight;
      acc += weight * term;
    }
    p = acc / mass;
  }
  return p;
}

CtmcOracle::CtmcOracle(ModelParams params)
    : params_(std::move(params)), index_(params_.types, params_.population),
      q_(build_generator(params_, index_)) {}

Eigen::VectorXd CtmcOracle::point_mass(const PopulationState& z) const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index_.size()));
  p[static_cast<Eigen::Index>(index_.index_of(z))] = 1.0;
  return p;
}

Eigen::VectorXd CtmcOracle::moment_function(const PartialPartition& blocks, TypeCode xstar) const {
  const TypeSpace& space = params_.types;
  std::vector<std::vector<char>> match;
  for (SiteSet a : blocks.blocks()) {
    std::vector<char> m(index_.type_count());
    for (std::size_t t = 0; t < m.size(); ++t) m[t] = space.matches_on(t, xstar, a);
    match.push_back(std::move(m));
  }
  Eigen::VectorXd f(static_cast<Eigen::Index>(index_.size()));
  for (std::size_t s = 0; s < index_.size(); ++s) {
    const auto& comp = index_.composition(s);
    double prod = 1.0;
    for (const auto& m : match) {
      std::int64_t c = 0;
      for (std::size_t t = 0; t < comp.size(); ++t)
        if (m[t]) c += comp[t];
      prod *= static_cast<double>(c);
    }
    f[static_cast<Eigen::Index>(s)] = prod;
  }
  return f;
}

double CtmcOracle::moment(const Eigen::VectorXd& p, const PartialPartition& blocks,
                          TypeCode xstar) const {
  return p.dot(moment_function(blocks, xstar));
}

double CtmcOracle::moment_derivative(const Eigen::VectorXd& p, const PartialPartition& blocks,
                                     TypeCode xstar) const {
  const Eigen::VectorXd flow = q_.transpose() * p;
  return flow.dot(moment_function(blocks, xstar));
}

double exact_moment(const CtmcOracle& oracle, const Eigen::VectorXd& p0,
                    const PartialPartition& blocks, TypeCode xstar, double t) {
  return oracle.moment(oracle.distribution(p0, t), blocks, xstar);
}

double exact_moment_derivative(const CtmcOracle& oracle, const Eigen::VectorXd& p_t,
                               const PartialPartition& blocks, TypeCode xstar) {
  return oracle.moment_derivative(p_t, blocks, xstar);
}

}  // namespace moran
