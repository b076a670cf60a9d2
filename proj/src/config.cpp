#include "moran/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "moran/gillespie.hpp"

namespace moran {

using nlohmann::json;

namespace {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return get<T>(j, key, where);
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
      throw ConfigError(where + ": unknown field '" + key + "'");
}

SiteSet to_site_set(const std::vector<int>& sites, int n, const std::string& where) {
  std::uint32_t mask = 0;
  for (int s : sites) {
    if (s < 1 || s > n) throw ConfigError(where + ": site " + std::to_string(s) + " out of range 1.." + std::to_string(n));
    if (mask & (1u << (s - 1))) throw ConfigError(where + ": site " + std::to_string(s) + " listed twice");
    mask |= 1u << (s - 1);
  }
  return SiteSet::from_mask(mask);
}

}  // namespace

ModelParams RunConfig::params() const {
  const int n = static_cast<int>(alleles.size());
  std::vector<RateEntry> rates;
  for (std::size_t i = 0; i < rho.size(); ++i)
    rates.push_back({to_site_set(rho[i].set, n, "model.rho[" + std::to_string(i) + "].set"), rho[i].rate});
  std::vector<MutationEntry> muts;
  for (const auto& m : mu) muts.push_back({m.site, m.from, m.to, m.rate});
  try {
    return ModelParams::create(alleles, population, rates, muts, b);
  } catch (const ModelError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

PopulationState RunConfig::initial_state() const {
  const TypeSpace space(alleles);
  std::map<TypeCode, std::int64_t> counts;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < initial.size(); ++i) {
    const std::string where = "initial[" + std::to_string(i) + "]";
    if (!space.valid(Genotype{initial[i].type})) throw ConfigError(where + ": invalid genotype");
    if (initial[i].count < 0) throw ConfigError(where + ": negative count");
    counts[space.encode(Genotype{initial[i].type})] += initial[i].count;
    total += initial[i].count;
  }
  if (total != population)
    throw ConfigError("initial counts sum to " + std::to_string(total) + ", expected N = " +
                      std::to_string(population));
  return PopulationState(counts);
}

TypeCode RunConfig::reference() const {
  const TypeSpace space(alleles);
  if (!space.valid(Genotype{reference_type})) throw ConfigError("reference_type is not a valid genotype");
  return space.encode(Genotype{reference_type});
}

std::vector<PartialPartition> RunConfig::observable_partitions() const {
  const int n = static_cast<int>(alleles.size());
  const SiteSet all = SiteSet::full(n);
  if (observables.empty()) {
    if (n <= 4) {
      auto all_pp = enumerate_partial_partitions(all);
      all_pp.erase(std::remove_if(all_pp.begin(), all_pp.end(), [](const auto& p) { return p.size() == 0; }),
                   all_pp.end());
      return all_pp;
    }
    return {PartialPartition({all})};
  }
  std::vector<PartialPartition> out;
  for (std::size_t i = 0; i < observables.size(); ++i) {
    const std::string where = "observables[" + std::to_string(i) + "]";
    std::vector<SiteSet> blocks;
    SiteSet seen;
    for (const auto& b : observables[i]) {
      const SiteSet s = to_site_set(b, n, where);
      if (s.empty()) throw ConfigError(where + ": empty block");
      if (!s.disjoint(seen)) throw ConfigError(where + ": blocks overlap");
      seen = seen | s;
      blocks.push_back(s);
    }
    if (blocks.empty()) throw ConfigError(where + ": no blocks");
    out.emplace_back(std::move(blocks));
  }
  return out;
}

RunConfig parse_config(const json& j) {
  reject_unknown(j,
                 {"model", "initial", "reference_type", "experiment", "t_grid", "replicates", "seed",
                  "z_threshold", "output", "strict", "observables", "derivative_step", "lln"},
                 "config");
  RunConfig c;
  const json& m = j.contains("model") ? j.at("model") : throw ConfigError("config: missing required field 'model'");
  reject_unknown(m, {"alleles", "N", "rho", "mu", "b"}, "model");
  c.alleles = get<std::vector<int>>(m, "alleles", "model");
  if (c.alleles.empty() || c.alleles.size() > 16) throw ConfigError("model.alleles: need 1..16 sites");
  c.population = get<std::int64_t>(m, "N", "model");
  if (c.population < 1) throw ConfigError("model.N must be at least 1");
  if (m.contains("rho")) {
    for (const auto& r : m.at("rho")) {
      reject_unknown(r, {"set", "rate"}, "model.rho entry");
      c.rho.push_back({get<std::vector<int>>(r, "set", "model.rho"), get<double>(r, "rate", "model.rho")});
    }
  }
  if (m.contains("mu")) {
    for (const auto& r : m.at("mu")) {
      reject_unknown(r, {"site", "from", "to", "rate"}, "model.mu entry");
      c.mu.push_back({get<int>(r, "site", "model.mu"), get<int>(r, "from", "model.mu"),
                      get<int>(r, "to", "model.mu"), get<double>(r, "rate", "model.mu")});
    }
  }
  c.b = get_or<double>(m, "b", 0.0, "model");

  if (!j.contains("initial")) throw ConfigError("config: missing required field 'initial'");
  for (const auto& e : j.at("initial")) {
    reject_unknown(e, {"type", "count"}, "initial entry");
    c.initial.push_back({get<std::vector<int>>(e, "type", "initial"), get<std::int64_t>(e, "count", "initial")});
  }
  c.reference_type = get<std::vector<int>>(j, "reference_type", "config");
  c.experiment = get_or<std::string>(j, "experiment", "", "config");
  const auto& names = experiment_names();
  if (!c.experiment.empty() && std::find(names.begin(), names.end(), c.experiment) == names.end())
    throw ConfigError("experiment '" + c.experiment + "' is not one of simulate, hierarchy, oracle, "
                      "deterministic, compare, ld, nonclosure");
  c.t_grid = get_or<std::vector<double>>(j, "t_grid", c.t_grid, "config");
  c.replicates = get_or<std::size_t>(j, "replicates", c.replicates, "config");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
  c.z_threshold = get_or<double>(j, "z_threshold", c.z_threshold, "config");
  c.output = get_or<std::string>(j, "output", c.output, "config");
  c.strict = get_or<bool>(j, "strict", c.strict, "config");
  c.observables = get_or<std::vector<std::vector<std::vector<int>>>>(j, "observables", {}, "config");
  c.derivative_step = get_or<double>(j, "derivative_step", 0.0, "config");
  if (j.contains("lln")) {
    const json& l = j.at("lln");
    reject_unknown(l, {"populations", "time", "grid_points"}, "lln");
    c.lln.populations = get_or<std::vector<std::int64_t>>(l, "populations", c.lln.populations, "lln");
    c.lln.time = get_or<double>(l, "time", c.lln.time, "lln");
    c.lln.grid_points = get_or<std::size_t>(l, "grid_points", c.lln.grid_points, "lln");
  }

  // Semantic checks.
  c.params();
  c.initial_state();
  c.reference();
  c.observable_partitions();
  try {
    check_time_grid(c.t_grid);
  } catch (const ModelError& e) {
    throw ConfigError(std::string("t_grid: ") + e.what());
  }
  if (c.replicates < 2) throw ConfigError("replicates must be at least 2");
  if (!(c.z_threshold > 0.0)) throw ConfigError("z_threshold must be positive");
  if (c.derivative_step < 0.0) throw ConfigError("derivative_step must be nonnegative");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json serialize(const RunConfig& c) {
  json model{{"alleles", c.alleles}, {"N", c.population}, {"b", c.b}};
  model["rho"] = json::array();
  for (const auto& r : c.rho) model["rho"].push_back({{"set", r.set}, {"rate", r.rate}});
  model["mu"] = json::array();
  for (const auto& m : c.mu)
    model["mu"].push_back({{"site", m.site}, {"from", m.from}, {"to", m.to}, {"rate", m.rate}});
  json initial = json::array();
  for (const auto& e : c.initial) initial.push_back({{"type", e.type}, {"count", e.count}});
  return json{{"model", model},
              {"initial", initial},
              {"reference_type", c.reference_type},
              {"experiment", c.experiment},
              {"t_grid", c.t_grid},
              {"replicates", c.replicates},
              {"seed", c.seed},
              {"z_threshold", c.z_threshold},
              {"output", c.output},
              {"strict", c.strict},
              {"observables", c.observables},
              {"derivative_step", c.derivative_step},
              {"lln",
               {{"populations", c.lln.populations},
                {"time", c.lln.time},
                {"grid_points", c.lln.grid_points}}}};
}

}  // namespace moran
