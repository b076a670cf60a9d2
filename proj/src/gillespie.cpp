#include "moran/gillespie.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace moran {

RateBreakdown total_rate(const PopulationState& z, const ModelParams& params) {
  RateBreakdown r;
  const double n_pop = static_cast<double>(z.size());
  double rho_sum = 0.0;
  for (double v : params.rho) rho_sum += v;
  r.recombination = n_pop / 4.0 * rho_sum;
  r.resampling = params.b * n_pop / 2.0;
  for (const auto& [t, c] : z.counts()) {
    double w = 0.0;
    for (int i = 1; i <= params.sites(); ++i)
      w += params.mutation_out_rate(i, params.types.allele(t, i));
    r.mutation += static_cast<double>(c) * w;
  }
  return r;
}

Simulator::Simulator(const ModelParams& params, const PopulationState& z0,
                     std::vector<Observable> tracked)
    : params_(&params), state_(z0), tracked_(std::move(tracked)) {
  if (z0.size() != params.population)
    throw ModelError("initial population has " + std::to_string(z0.size()) +
                     " individuals, expected N = " + std::to_string(params.population));
  individuals_.reserve(static_cast<std::size_t>(z0.size()));
  for (const auto& [t, c] : z0.counts()) {
    if (t >= params.types.size()) throw ModelError("initial population contains an invalid type");
    individuals_.insert(individuals_.end(), static_cast<std::size_t>(c), t);
  }
  for (std::uint32_t g = 0; g < params.rho.size(); ++g) {
    if (params.rho[g] <= 0.0) continue;
    rho_sum_ += params.rho[g];
    rho_cumulative_.emplace_back(g, rho_sum_);
  }
  for (TypeCode t : individuals_) mutation_total_ += mutation_weight(t);
  counters_.resize(tracked_.size());
  for (std::size_t k = 0; k < tracked_.size(); ++k)
    counters_[k].value = state_.marginal_count(params.types, tracked_[k].reference, tracked_[k].sites);
}

double Simulator::mutation_weight(TypeCode t) const {
  double w = 0.0;
  for (int i = 1; i <= params_->sites(); ++i)
    w += params_->mutation_out_rate(i, params_->types.allele(t, i));
  return w;
}

RateBreakdown Simulator::rates() const {
  const double n_pop = static_cast<double>(individuals_.size());
  return {n_pop / 4.0 * rho_sum_, std::max(mutation_total_, 0.0), params_->b * n_pop / 2.0};
}

std::optional<Event> Simulator::sample_event(Rng& rng) const {
  const RateBreakdown r = rates();
  const double total = r.total();
  if (!(total > 0.0)) return std::nullopt;
  const std::uint64_t n_pop = individuals_.size();
  Event e;
  e.wait = exponential(rng, total);
  const double pick = uniform01(rng) * total;
  if (pick < r.recombination || (r.mutation == 0.0 && r.resampling == 0.0)) {
    e.kind = EventKind::kRecombination;
    const double target = uniform01(rng) * rho_sum_;
    auto it = std::upper_bound(rho_cumulative_.begin(), rho_cumulative_.end(), target,
                               [](double v, const auto& entry) { return v < entry.second; });
    if (it == rho_cumulative_.end()) --it;
    e.g = SiteSet::from_mask(it->first);
    e.first = uniform_index(rng, n_pop);
    e.second = uniform_index(rng, n_pop);
  } else if (pick < r.recombination + r.mutation || r.resampling == 0.0) {
    e.kind = EventKind::kMutation;
    double target = uniform01(rng) * r.mutation;
    std::size_t slot = 0;
    for (; slot + 1 < individuals_.size(); ++slot) {
      target -= mutation_weight(individuals_[slot]);
      if (target < 0.0) break;
    }
    while (mutation_weight(individuals_[slot]) == 0.0 && slot > 0) --slot;
    e.first = e.second = slot;
    const TypeCode t = individuals_[slot];
    double site_pick = uniform01(rng) * mutation_weight(t);
    int site = 1;
    for (; site < params_->sites(); ++site) {
      const double w = params_->mutation_out_rate(site, params_->types.allele(t, site));
      if (site_pick < w) break;
      site_pick -= w;
    }
    while (params_->mutation_out_rate(site, params_->types.allele(t, site)) == 0.0 && site > 1)
      --site;
    const auto& row = params_->mu[site - 1][params_->types.allele(t, site)];
    double allele_pick = uniform01(rng) * params_->mutation_out_rate(site, params_->types.allele(t, site));
    int target_allele = 0;
    int last_positive = 0;
    for (; target_allele < static_cast<int>(row.size()); ++target_allele) {
      if (row[target_allele] > 0.0) last_positive = target_allele;
      if (allele_pick < row[target_allele]) break;
      allele_pick -= row[target_allele];
    }
    if (target_allele == static_cast<int>(row.size())) target_allele = last_positive;
    e.site = site;
    e.target = target_allele;
  } else {
    e.kind = EventKind::kResampling;
    e.first = uniform_index(rng, n_pop);
    e.second = uniform_index(rng, n_pop);
  }
  e.x = individuals_[e.first];
  e.y = individuals_[e.second];
  return e;
}

void Simulator::set_individual(std::size_t slot, TypeCode t) {
  const TypeCode old = individuals_[slot];
  if (old == t) return;
  mutation_total_ += mutation_weight(t) - mutation_weight(old);
  individuals_[slot] = t;
  SignedUpdate u;
  u.add(old, -1);
  u.add(t, 1);
  state_.apply(u);
}

void Simulator::apply_event(const Event& e) {
  const TypeSpace& space = params_->types;
  const SiteSet all = space.all_sites();
  time_ += e.wait;
  ++events_;
  switch (e.kind) {
    case EventKind::kRecombination: {
      const SiteSet comp = e.g.complement_in(all);
      const TypeCode made_g = space.recombine(e.x, e.y, e.g);
      const TypeCode made_c = space.recombine(e.x, e.y, comp);
      for (std::size_t k = 0; k < tracked_.size(); ++k) {
        const Observable& ob = tracked_[k];
        const SiteSet cut = e.g & ob.sites;
        if (cut.empty() || cut == ob.sites) continue;  // G does not split A: no change on A
        auto& c = counters_[k];
        const int made = space.matches_on(made_g, ob.reference, ob.sites) +
                         space.matches_on(made_c, ob.reference, ob.sites);
        const int lost = space.matches_on(e.x, ob.reference, ob.sites) +
                         space.matches_on(e.y, ob.reference, ob.sites);
        c.created += made;
        c.destroyed += lost;
        c.value += made - lost;
      }
      if (e.first == e.second) break;  // p_G(x,x) = x
      set_individual(e.first, made_g);
      set_individual(e.second, made_c);
      break;
    }
    case EventKind::kMutation: {
      const TypeCode after = space.with_allele(e.x, e.site, e.target);
      for (std::size_t k = 0; k < tracked_.size(); ++k) {
        const Observable& ob = tracked_[k];
        if (!ob.sites.contains(e.site)) continue;
        auto& c = counters_[k];
        const int made = space.matches_on(after, ob.reference, ob.sites);
        const int lost = space.matches_on(e.x, ob.reference, ob.sites);
        c.created += made;
        c.destroyed += lost;
        c.value += made - lost;
      }
      set_individual(e.first, after);
      break;
    }
    case EventKind::kResampling: {
      for (std::size_t k = 0; k < tracked_.size(); ++k) {
        const Observable& ob = tracked_[k];
        auto& c = counters_[k];
        const int made = space.matches_on(e.x, ob.reference, ob.sites);
        const int lost = space.matches_on(e.y, ob.reference, ob.sites);
        c.created += made;
        c.destroyed += lost;
        c.value += made - lost;
      }
      set_individual(e.second, e.x);
      break;
    }
  }
}

void check_time_grid(std::span<const double> t_grid) {
  if (t_grid.empty()) throw ModelError("time grid must not be empty");
  if (t_grid.front() != 0.0) throw ModelError("time grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]) || !std::isfinite(t_grid[i]))
      throw ModelError("time grid must be strictly increasing and finite");
}

Trajectory simulate(const ModelParams& params, const PopulationState& z0,
                    std::span<const double> t_grid, std::span<const Observable> observables,
                    Rng& rng, SimulateOptions options) {
  check_time_grid(t_grid);
  Simulator sim(params, z0, {observables.begin(), observables.end()});
  Trajectory traj;
  traj.times.assign(t_grid.begin(), t_grid.end());
  traj.observables.assign(observables.begin(), observables.end());
  traj.samples.reserve(t_grid.size());
  auto record = [&] {
    traj.samples.emplace_back(sim.counters().begin(), sim.counters().end());
    if (options.record_states) traj.states.push_back(sim.state());
  };
  std::size_t next = 0;
  record();
  ++next;
  while (next < t_grid.size()) {
    auto event = sim.sample_event(rng);
    const double when = event ? sim.time() + event->wait : INFINITY;
    while (next < t_grid.size() && t_grid[next] < when) {
      record();
      ++next;
    }
    if (!event || next == t_grid.size()) break;
    sim.apply_event(*event);
  }
  traj.final_state = sim.state();
  traj.events = sim.events();
  return traj;
}

void write_trajectory_csv(std::ostream& os, const TypeSpace& space, const Trajectory& traj) {
  os << "# moran-moments trajectory v1";
  if (!traj.observables.empty()) {
    os << " reference=";
    const auto g = space.decode(traj.observables.front().reference);
    for (std::size_t i = 0; i < g.alleles.size(); ++i) os << (i ? "," : "") << g.alleles[i];
  }
  os << "\n";
  os << "time,observable_id,value\n";
  const auto old_precision = os.precision(17);
  for (std::size_t t = 0; t < traj.times.size(); ++t)
    for (std::size_t k = 0; k < traj.observables.size(); ++k) {
      const std::string a = traj.observables[k].sites.to_string();
      const auto& c = traj.samples[t][k];
      os << traj.times[t] << ",[" << a << "]," << c.value << "\n";
      os << traj.times[t] << ",<" << a << ">," << c.created << "\n";
      os << traj.times[t] << ",(" << a << ")," << c.destroyed << "\n";
    }
  os.precision(old_precision);
}

}  // namespace moran
