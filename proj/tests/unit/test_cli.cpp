#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "exmile/commands.hpp"
#include "exmile/config.hpp"
#include "exmile/errors.hpp"
#include "exmile/io.hpp"
#include "exmile/potentials.hpp"

using namespace exm;
namespace fs = std::filesystem;

namespace {

const fs::path kChains = fs::path(EXMILE_SOURCE_DIR) / "configs" / "chains";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "exmile-unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& path) {
  std::ifstream in(path);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

const char* kDrift = R"(seed = 3
output_dir = "out"

[potential]
kind = "linear-drift"
gradient = [-1.0, 0.0]

[integrator]
dt = 1e-3
beta_inv = 1.0

[partition]
type = "levels"
levels = [0.0, 0.5, 1.0]
bbox = [-5.0, 5.0, -1000.0, 1000.0]

[milestoning]
fragments_per_milestone = 200
epsilon = 0.05
max_iterations = 8

[baseline]
budget_force_evals = 200000
replicas = 2
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config errors exit with code 2 and name the field") {
  const auto dir = scratch("config-errors");
  std::ostringstream log;
  CommandOptions o;

  o.config = write_file(dir / "neg.toml", replace(kDrift, "dt = 1e-3", "dt = -1e-3"));
  CHECK(guarded([&] { return cmd_milestone_run(o, log); }, log) == exit_code::config);
  CHECK(log.str().find("dt") != std::string::npos);

  log.str("");
  o.config = write_file(dir / "unknown.toml", replace(kDrift, "beta_inv = 1.0", "beta_inv = 1.0\nbeta = 2.0"));
  CHECK(guarded([&] { return cmd_milestone_run(o, log); }, log) == exit_code::config);
  CHECK(log.str().find("integrator.beta") != std::string::npos);

  log.str("");
  o.config = dir / "missing.toml";
  CHECK(guarded([&] { return cmd_long_run(o, log); }, log) == exit_code::config);

  CHECK_THROWS_AS(parse_config(replace(kDrift, "kind = \"linear-drift\"", "kind = \"lennard-jones\"")), ConfigError);
  CHECK_THROWS_AS(parse_config(replace(kDrift, "bbox = [-5.0, 5.0, -1000.0, 1000.0]", "bbox = [5.0, -5.0, 0.0, 1.0]")), ConfigError);
}

TEST_CASE("milestone-run is byte-identical across reruns and thread counts") {
  const auto dir = scratch("determinism");
  const auto config = write_file(dir / "run.toml", kDrift);
  std::ostringstream log;
  auto run = [&](const std::string& name, int threads) {
    CommandOptions o;
    o.config = config;
    o.threads = threads;
    o.output = dir / name;
    return guarded([&] { return cmd_milestone_run(o, log); }, log);
  };
  const int code = run("a", 1);
  CHECK((code == exit_code::ok || code == exit_code::not_converged));
  CHECK(run("b", 1) == code);
  CHECK(run("c", 8) == code);
  for (const char* file : {"summary.json", "history.csv", "flux.csv", "reservoirs.csv", "fragments.csv"}) {
    INFO(file);
    const auto a = slurp(dir / "a" / file);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "b" / file));
    CHECK(a == slurp(dir / "c" / file));
  }
  // Thread count and output location are not part of the echoed config.
  CHECK(slurp(dir / "a" / "summary.json").find("threads") == std::string::npos);
}

TEST_CASE("long-run exit codes") {
  const auto dir = scratch("long-run");
  std::ostringstream log;
  CommandOptions o;
  o.output = dir / "tiny";
  o.config = write_file(dir / "tiny.toml", replace(kDrift, "budget_force_evals = 200000", "budget_force_evals = 10"));
  CHECK(guarded([&] { return cmd_long_run(o, log); }, log) == exit_code::no_events);
  CHECK(read_json(dir / "tiny" / "summary.json")["status"] == "no-events");

  o.output = dir / "ok";
  o.config = write_file(dir / "ok.toml", kDrift);
  CHECK(guarded([&] { return cmd_long_run(o, log); }, log) == exit_code::ok);
  const auto summary = read_json(dir / "ok" / "summary.json");
  CHECK(summary["events"].get<int>() > 10);
  CHECK(count_lines(dir / "ok" / "events.csv") == summary["events"].get<int>() + 1);
}

TEST_CASE("dump potential grid and partition") {
  const auto dir = scratch("dump");
  std::ostringstream log;
  CommandOptions o;
  o.output = dir;

  o.config = write_file(dir / "mb.toml", R"(seed = 1
[potential]
kind = "mueller-brown"
[integrator]
dt = 1e-4
beta_inv = 20.0
[partition]
type = "voronoi"
centers = [[-0.5, 1.5], [0.0, 0.5], [0.6, 0.0]]
bbox = [-1.5, 1.0, -0.5, 2.0]
reactant_pair = [0, 1]
product_pair = [1, 2]
[output]
grid_points = 100
)");
  CHECK(guarded([&] { return cmd_dump(o, "potential-grid", log); }, log) == exit_code::ok);
  CHECK(count_lines(dir / "potential_grid.csv") == 10001);
  {
    std::ifstream in(dir / "potential_grid.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "x1,x2,u");
    CHECK(first == format_double(-1.5) + "," + format_double(-0.5) + "," +
                       format_double(eval_potential(PotentialSpec::mueller_brown(), Vec2(-1.5, -0.5))));
  }
  CHECK(guarded([&] { return cmd_dump(o, "centers", log); }, log) == exit_code::config);

  o.config = write_file(dir / "grid.toml", R"(seed = 1
[potential]
kind = "rough"
order = 2
landscape_seed = 5
[integrator]
dt = 1e-4
beta_inv = 1.0
domain = "torus"
[partition]
type = "grid"
n = 2
[output]
grid_points = 5
)");
  CHECK(guarded([&] { return cmd_dump(o, "partition", log); }, log) == exit_code::ok);
  const auto partition = build_partition(load_config(o.config));
  std::size_t segments = 0;
  for (const auto& ms : partition.milestones()) segments += ms.segments.size();
  CHECK(partition.size() == 8);
  CHECK(count_lines(dir / "partition.csv") == static_cast<int>(segments) + 1);

  // Endpoints are both written on the torus, so opposite edges must match.
  CHECK(guarded([&] { return cmd_dump(o, "potential-grid", log); }, log) == exit_code::ok);
  std::ifstream in(dir / "potential_grid.csv");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> u;
  while (std::getline(in, line)) u.push_back(line.substr(line.rfind(',') + 1));
  REQUIRE(u.size() == 25);
  for (int a = 0; a < 5; ++a) {
    CHECK(u[static_cast<std::size_t>(a * 5)] == u[static_cast<std::size_t>(a * 5 + 4)]);
    CHECK(u[static_cast<std::size_t>(a)] == u[static_cast<std::size_t>(20 + a)]);
  }
}

TEST_CASE("oracle reports") {
  OracleOptions o;
  o.matrix = kChains / "three_state.csv";
  o.meta = kChains / "three_state.json";
  const auto j = oracle_report(o);
  const auto mu = j["mu"].get<std::vector<double>>();
  REQUIRE(mu.size() == 3);
  CHECK(mu[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(mu[2] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(j["mfpt"]["direct"].get<double>() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(j["gcd"] == 1);

  o.matrix = kChains / "nearest_neighbor_4.csv";
  o.meta = kChains / "nearest_neighbor_4.json";
  CHECK(oracle_report(o)["gcd"] == 2);

  const auto dir = scratch("oracle");
  o.matrix = write_file(dir / "bad.csv", "0,1,0\n0.5,0,0.4\n1,0,0\n");
  o.meta = kChains / "three_state.json";
  std::ostringstream out;
  CHECK(guarded([&] { return cmd_oracle(o, out); }, out) == exit_code::config);
}

TEST_CASE("error-report across two CLI runs") {
  const auto dir = scratch("error-report");
  std::ostringstream log;
  CommandOptions o;
  o.config = write_file(dir / "a.toml", kDrift);
  o.output = dir / "a";
  guarded([&] { return cmd_milestone_run(o, log); }, log);
  o.config = write_file(dir / "b.toml", replace(kDrift, "dt = 1e-3", "dt = 5e-4"));
  o.output = dir / "b";
  guarded([&] { return cmd_milestone_run(o, log); }, log);

  ErrorReportOptions r;
  r.run_a = dir / "a";
  r.run_b = dir / "b";
  r.output = dir / "report.json";
  std::ostringstream out;
  CHECK(guarded([&] { return cmd_error_report(r, out); }, out) == exit_code::ok);
  const auto j = read_json(dir / "report.json");
  CHECK(j["bound"].get<double>() >= 0.0);

  o.config = write_file(dir / "c.toml", replace(kDrift, "beta_inv = 1.0", "beta_inv = 2.0"));
  o.output = dir / "c";
  guarded([&] { return cmd_milestone_run(o, log); }, log);
  r.run_b = dir / "c";
  CHECK(guarded([&] { return cmd_error_report(r, out); }, out) != exit_code::ok);
}

TEST_CASE("flux and chain files round-trip") {
  const auto dir = scratch("io");
  const Eigen::Vector3d w(0.1, 0.2, 0.7), t(1.0 / 3.0, 2e-17, 0.0);
  write_flux_csv(dir / "flux.csv", w, t, {3, 1, 4});
  const auto table = read_flux_csv(dir / "flux.csv");
  CHECK(table.weights == Eigen::VectorXd(w));
  CHECK(table.mean_local_fpt == Eigen::VectorXd(t));
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);

  const auto chain = read_chain(kChains / "three_state.csv", kChains / "three_state.json");
  CHECK(chain.product == 2);
  CHECK(chain.kernel(1, 2) == 0.5);
}

}  // TEST_SUITE
