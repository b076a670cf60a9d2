#ifndef MORAN_CONFIG_HPP
#define MORAN_CONFIG_HPP

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "moran/combinatorics.hpp"
#include "moran/model.hpp"

namespace moran {

/// Malformed or invalid run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"simulate", "hierarchy", "oracle", "deterministic",
                                              "compare",  "ld",        "nonclosure"};
  return names;
}

struct InitialEntry {
  std::vector<int> type;  // 0-based alleles
  std::int64_t count = 0;
  friend bool operator==(const InitialEntry&, const InitialEntry&) = default;
};

struct RhoSpec {
  std::vector<int> set;  // 1-based sites
  double rate = 0.0;
  friend bool operator==(const RhoSpec&, const RhoSpec&) = default;
};

struct MuSpec {
  int site = 1;
  int from = 0;
  int to = 0;
  double rate = 0.0;
  friend bool operator==(const MuSpec&, const MuSpec&) = default;
};

struct LlnSpec {
  std::vector<std::int64_t> populations{50, 200, 800};
  double time = 1.0;
  std::size_t grid_points = 201;
  friend bool operator==(const LlnSpec&, const LlnSpec&) = default;
};

/// One run of the command-line tool. Subsets are 1-based site lists, genotypes
/// 0-based allele lists.
struct RunConfig {
  std::vector<int> alleles;
  std::int64_t population = 0;
  std::vector<RhoSpec> rho;
  std::vector<MuSpec> mu;
  double b = 0.0;
  std::vector<InitialEntry> initial;
  std::vector<int> reference_type;
  std::string experiment;  // may be left empty in the file and given on the command line
  std::vector<double> t_grid{0.0};
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  double z_threshold = 3.0;
  std::string output = "moran-out";
  bool strict = false;
  std::vector<std::vector<std::vector<int>>> observables;  // partial partitions; empty = default set
  double derivative_step = 0.0;
  LlnSpec lln;

  ModelParams params() const;
  PopulationState initial_state() const;
  TypeCode reference() const;
  std::vector<PartialPartition> observable_partitions() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates; every failure is a ConfigError naming the field.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json serialize(const RunConfig& config);

}  // namespace moran

#endif  // MORAN_CONFIG_HPP
