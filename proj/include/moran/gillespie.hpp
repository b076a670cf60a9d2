#ifndef MORAN_GILLESPIE_HPP
#define MORAN_GILLESPIE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moran/model.hpp"
#include "moran/random.hpp"

namespace moran {

/// A tracked marginal: individuals matching `reference` on `sites`.
struct Observable {
  SiteSet sites;
  TypeCode reference = 0;
  friend bool operator==(const Observable&, const Observable&) = default;
};

/// [A], <A> and (A) for one observable. value == initial + created - destroyed.
struct CounterState {
  std::int64_t value = 0;
  std::int64_t created = 0;
  std::int64_t destroyed = 0;
};

enum class EventKind { kRecombination, kMutation, kResampling };

/// One base event. Individuals are addressed by slot in the population vector.
///  - recombination: slots `first` (type x) and `second` (type y) become
///    p_G(x,y) and p_{complement G}(x,y); `first == second` is allowed.
///  - mutation: slot `first` changes allele at `site` to `target`.
///  - resampling: slot `second` (type y) takes the type of slot `first` (x).
struct Event {
  EventKind kind = EventKind::kRecombination;
  double wait = 0.0;  // exponential holding time before the event
  SiteSet g;
  std::size_t first = 0;
  std::size_t second = 0;
  TypeCode x = 0;
  TypeCode y = 0;
  int site = 0;
  int target = 0;
};

struct RateBreakdown {
  double recombination = 0.0;
  double mutation = 0.0;
  double resampling = 0.0;
  double total() const { return recombination + mutation + resampling; }
};

/// Class totals: (N/4) sum_G rho_G, sum_x z(x) sum_i sum_{a != x_i} mu^i_{x_i a}, and b N / 2.
RateBreakdown total_rate(const PopulationState& z, const ModelParams& params);

/// Exact simulation state: one type code per individual plus incrementally
/// maintained counts, mutation propensity and observable counters.
class Simulator {
 public:
  Simulator(const ModelParams& params, const PopulationState& z0,
            std::vector<Observable> tracked = {});

  const ModelParams& params() const { return *params_; }
  double time() const { return time_; }
  const PopulationState& state() const { return state_; }
  std::span<const TypeCode> individuals() const { return individuals_; }
  std::span<const Observable> observables() const { return tracked_; }
  std::span<const CounterState> counters() const { return counters_; }
  std::uint64_t events() const { return events_; }

  RateBreakdown rates() const;

  /// Draws the next event; std::nullopt when the total rate is zero (absorbing).
  std::optional<Event> sample_event(Rng& rng) const;

  /// Applies `event` (which must have been drawn from the current state),
  /// advances time by its wait and updates all counters. Empty events update
  /// the counters but leave the population unchanged.
  void apply_event(const Event& event);

 private:
  double mutation_weight(TypeCode t) const;
  void set_individual(std::size_t slot, TypeCode t);

  const ModelParams* params_;
  std::vector<TypeCode> individuals_;
  PopulationState state_;
  std::vector<Observable> tracked_;
  std::vector<CounterState> counters_;
  std::vector<std::pair<std::uint32_t, double>> rho_cumulative_;
  double rho_sum_ = 0.0;
  double mutation_total_ = 0.0;
  double time_ = 0.0;
  std::uint64_t events_ = 0;
};

struct SimulateOptions {
  bool record_states = false;
};

/// Observables sampled on a time grid from one exact path.
struct Trajectory {
  std::vector<double> times;
  std::vector<Observable> observables;
  std::vector<std::vector<CounterState>> samples;  // samples[time][observable]
  std::vector<PopulationState> states;             // per time, if recorded
  PopulationState final_state;
  std::uint64_t events = 0;
};

/// Exact simulation over `t_grid` (increasing, starting at 0). The piecewise
/// constant path is sampled at each grid time.
Trajectory simulate(const ModelParams& params, const PopulationState& z0,
                    std::span<const double> t_grid, std::span<const Observable> observables,
                    Rng& rng, SimulateOptions options = {});

/// Throws ModelError unless the grid is nonempty, starts at 0 and is strictly increasing.
void check_time_grid(std::span<const double> t_grid);

/// CSV with columns time,observable_id,value. Ids are "[A]", "<A>", "(A)" with A
/// in "{1,2}" form; the reference type is given in the header comment.
void write_trajectory_csv(std::ostream& os, const TypeSpace& space, const Trajectory& traj);

}  // namespace moran

#endif  // MORAN_GILLESPIE_HPP
