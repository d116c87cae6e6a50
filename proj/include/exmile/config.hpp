#ifndef EXMILE_CONFIG_HPP
#define EXMILE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exmile/baseline.hpp"
#include "exmile/geometry.hpp"
#include "exmile/milestoning.hpp"
#include "exmile/potentials.hpp"
#include "exmile/sde.hpp"
#include "exmile/types.hpp"

namespace exm {

struct PotentialConfig {
  PotentialKind kind = PotentialKind::MuellerBrown;
  int order = 0;                          // rough
  std::optional<std::uint64_t> landscape_seed;  // rough; defaults to the run seed
  Vec2 stiffness = Vec2::Ones();          // quadratic
  Vec2 center = Vec2::Zero();             // quadratic
  Vec2 gradient = Vec2::Zero();           // linear-drift
};

enum class PartitionType { Voronoi, Grid, Levels };

struct PartitionConfig {
  PartitionType type = PartitionType::Voronoi;
  Box bbox{-1.5, 1.2, -0.5, 2.0};
  // voronoi
  std::vector<Vec2> centers;
  std::optional<VoronoiRoles> voronoi_roles;
  // grid
  int n = 0;
  std::optional<GridRoles> grid_roles;
  // levels
  std::vector<double> levels;
  ReactantDistribution rho;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "exmile-out";
  PotentialConfig potential;
  IntegratorConfig integrator;
  PartitionConfig partition;
  MilestoningOptions milestoning;
  LongRunOptions baseline;
  bool write_fragments = true;
  int grid_points = 100;  // dump potential-grid resolution per axis
};

/// Parses and validates a TOML run file. Any problem raises ConfigError with
/// the offending field and, where known, its line.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::string_view text, const std::string& source_name = "<config>");

PotentialSpec build_potential(const RunConfig& cfg);
Partition build_partition(const RunConfig& cfg);

/// Resolved configuration with defaults filled in. Thread count and output
/// directory are left out so outputs do not depend on them.
nlohmann::ordered_json config_echo(const RunConfig& cfg);

/// Echo with integrator.dt removed: two runs are comparable under
/// error_report when these match.
std::string comparison_key(const nlohmann::ordered_json& echo);

}  // namespace exm

#endif  // EXMILE_CONFIG_HPP
