#include "exmile/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "exmile/errors.hpp"

namespace exm {

namespace {

std::string line_of(const toml::node* node) {
  if (!node || !node->source().begin) return "";
  return " (line " + std::to_string(node->source().begin.line) + ")";
}

// One TOML table plus its dotted name; tracks which keys were read so
// leftovers can be reported as typos.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  std::string field(std::string_view key) const {
    return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
  }

  const toml::node* node(std::string_view key) {
    used_.insert(std::string(key));
    return table_ ? table_->get(key) : nullptr;
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) {
    throw ConfigError(field(key) + ": " + what + line_of(table_ ? table_->get(key) : nullptr));
  }

  template <typename T>
  std::optional<T> opt(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;
      fail(key, "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = n->value_exact<bool>()) return *v;
      fail(key, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = n->value_exact<std::string>()) return *v;
      fail(key, "expected a string");
    } else {
      if (auto v = n->value_exact<std::int64_t>()) {
        if constexpr (std::is_unsigned_v<T>) {
          if (*v < 0) fail(key, "must be >= 0");
        }
        return static_cast<T>(*v);
      }
      fail(key, "expected an integer");
    }
  }

  template <typename T>
  T get(std::string_view key, T fallback) {
    return opt<T>(key).value_or(fallback);
  }

  template <typename T>
  T require(std::string_view key) {
    if (auto v = opt<T>(key)) return *v;
    fail(key, "missing required field");
  }

  std::optional<std::vector<double>> numbers(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const auto* arr = n->as_array();
    if (!arr) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& item : *arr) {
      auto v = item.value<double>();
      if (!v) fail(key, "expected an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  std::optional<Vec2> vec2(std::string_view key) {
    auto v = numbers(key);
    if (!v) return std::nullopt;
    if (v->size() != 2) fail(key, "expected two numbers");
    return Vec2((*v)[0], (*v)[1]);
  }

  std::optional<std::vector<Vec2>> points(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const auto* arr = n->as_array();
    if (!arr) fail(key, "expected an array of [x1, x2] pairs");
    std::vector<Vec2> out;
    for (const auto& item : *arr) {
      const auto* pair = item.as_array();
      if (!pair || pair->size() != 2) fail(key, "expected an array of [x1, x2] pairs");
      auto a = (*pair)[0].value<double>();
      auto b = (*pair)[1].value<double>();
      if (!a || !b) fail(key, "expected an array of [x1, x2] pairs");
      out.emplace_back(*a, *b);
    }
    return out;
  }

  Section sub(std::string_view key) {
    const toml::node* n = node(key);
    if (n && !n->is_table()) fail(key, "expected a table");
    return Section(n ? n->as_table() : nullptr, field(key));
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.count(std::string(k.str()))) {
        throw ConfigError(field(k.str()) + ": unknown field" + line_of(&v));
      }
    }
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

template <typename Parse>
auto parse_enum(Section& s, std::string_view key, std::string fallback, Parse parse) {
  const auto name = s.get<std::string>(key, std::move(fallback));
  try {
    return parse(name);
  } catch (const std::exception& e) {
    s.fail(key, e.what());
  }
}

std::array<int, 2> index_pair(Section& s, std::string_view key) {
  auto v = s.numbers(key);
  if (!v || v->size() != 2 || (*v)[0] != std::floor((*v)[0]) || (*v)[1] != std::floor((*v)[1])) {
    s.fail(key, "expected two center indices");
  }
  return {static_cast<int>((*v)[0]), static_cast<int>((*v)[1])};
}

GridEdge grid_edge(Section s) {
  GridEdge e;
  e.i = s.require<int>("i");
  e.j = s.require<int>("j");
  e.side = parse_enum(s, "side", "bottom", parse_cell_side);
  s.finish();
  return e;
}

PartitionType parse_partition_type(std::string_view name) {
  if (name == "voronoi") return PartitionType::Voronoi;
  if (name == "grid") return PartitionType::Grid;
  if (name == "levels") return PartitionType::Levels;
  throw InvalidArgument("unknown partition type '" + std::string(name) + "' (voronoi|grid|levels)");
}

std::string_view to_string(PartitionType t) {
  switch (t) {
    case PartitionType::Voronoi: return "voronoi";
    case PartitionType::Grid: return "grid";
    case PartitionType::Levels: return "levels";
  }
  return "unknown";
}

RunConfig from_table(const toml::table& root) {
  RunConfig cfg;
  Section top(&root, "");
  cfg.seed = top.get<std::uint64_t>("seed", 0);
  cfg.output_dir = top.get<std::string>("output_dir", "exmile-out");

  {
    Section s = top.sub("potential");
    auto& p = cfg.potential;
    p.kind = parse_enum(s, "kind", "mueller-brown", parse_potential_kind);
    if (p.kind == PotentialKind::RoughLandscape) {
      p.order = s.require<int>("order");
      if (p.order < 0 || p.order > kMaxRoughOrder) s.fail("order", "must be in [0, " + std::to_string(kMaxRoughOrder) + "]");
      p.landscape_seed = s.opt<std::uint64_t>("landscape_seed");
    }
    if (p.kind == PotentialKind::Quadratic) {
      p.stiffness = s.vec2("stiffness").value_or(Vec2::Ones());
      p.center = s.vec2("center").value_or(Vec2::Zero());
    }
    if (p.kind == PotentialKind::LinearDrift) {
      auto g = s.vec2("gradient");
      if (!g) s.fail("gradient", "missing required field");
      p.gradient = *g;
    }
    s.finish();
  }

  {
    Section s = top.sub("integrator");
    auto& ic = cfg.integrator;
    ic.dt = s.get<double>("dt", ic.dt);
    if (!(ic.dt > 0.0) || !std::isfinite(ic.dt)) s.fail("dt", "must be a finite number > 0");
    ic.beta_inv = s.get<double>("beta_inv", ic.beta_inv);
    if (!(ic.beta_inv > 0.0) || !std::isfinite(ic.beta_inv)) s.fail("beta_inv", "must be a finite number > 0");
    ic.domain = parse_enum(s, "domain", "plane", parse_domain);
    ic.max_steps_per_fragment = s.get<std::int64_t>("max_steps_per_fragment", ic.max_steps_per_fragment);
    if (ic.max_steps_per_fragment < 1) s.fail("max_steps_per_fragment", "must be >= 1");
    s.finish();
  }

  {
    Section s = top.sub("partition");
    if (!s.present()) throw ConfigError("partition: missing required section");
    auto& pc = cfg.partition;
    pc.type = parse_enum(s, "type", "voronoi", parse_partition_type);
    if (auto box = s.numbers("bbox")) {
      if (box->size() != 4 || !((*box)[0] < (*box)[1]) || !((*box)[2] < (*box)[3])) {
        s.fail("bbox", "expected [x1_min, x1_max, x2_min, x2_max] with min < max");
      }
      pc.bbox = {(*box)[0], (*box)[1], (*box)[2], (*box)[3]};
    }
    switch (pc.type) {
      case PartitionType::Voronoi: {
        auto centers = s.points("centers");
        if (!centers || centers->size() < 2) s.fail("centers", "need at least two centers");
        pc.centers = *centers;
        const bool has_r = s.node("reactant_pair") != nullptr, has_p = s.node("product_pair") != nullptr;
        if (has_r != has_p) s.fail(has_r ? "product_pair" : "reactant_pair", "reactant_pair and product_pair go together");
        if (has_r) pc.voronoi_roles = VoronoiRoles{index_pair(s, "reactant_pair"), index_pair(s, "product_pair")};
        break;
      }
      case PartitionType::Grid: {
        pc.n = s.require<int>("n");
        if (pc.n < 2) s.fail("n", "must be >= 2");
        Section r = s.sub("reactant"), p = s.sub("product");
        if (r.present() != p.present()) s.fail(r.present() ? "product" : "reactant", "reactant and product go together");
        if (r.present()) pc.grid_roles = GridRoles{grid_edge(r), grid_edge(p)};
        break;
      }
      case PartitionType::Levels: {
        auto levels = s.numbers("levels");
        if (!levels || levels->size() < 2) s.fail("levels", "need at least two levels");
        pc.levels = *levels;
        break;
      }
    }
    const auto rho = s.get<std::string>("rho", "point");
    if (rho == "point") {
      pc.rho.kind = ReactantDistribution::Kind::PointMass;
      pc.rho.point = s.vec2("rho_point");
    } else if (rho == "uniform") {
      pc.rho.kind = ReactantDistribution::Kind::UniformOnSegments;
    } else {
      s.fail("rho", "expected \"point\" or \"uniform\"");
    }
    s.finish();
  }

  {
    Section s = top.sub("milestoning");
    auto& mo = cfg.milestoning;
    mo.seed = cfg.seed;
    mo.fragments_per_milestone = s.get<int>("fragments_per_milestone", mo.fragments_per_milestone);
    if (mo.fragments_per_milestone < 1) s.fail("fragments_per_milestone", "must be >= 1");
    mo.epsilon = s.get<double>("epsilon", mo.epsilon);
    if (!(mo.epsilon > 0.0)) s.fail("epsilon", "must be > 0");
    mo.max_iterations = s.get<int>("max_iterations", mo.max_iterations);
    if (mo.max_iterations < 1) s.fail("max_iterations", "must be >= 1");
    mo.init = parse_enum(s, "init", "one-point", parse_init_mode);
    mo.init_points = s.get<int>("init_points", mo.init_points);
    if (mo.init_points < 1) s.fail("init_points", "must be >= 1");
    mo.weights = parse_enum(s, "weights", "stationary", parse_weights_mode);
    mo.stopping = parse_enum(s, "stopping", "consecutive", parse_stopping_rule);
    mo.solver = parse_enum(s, "solver", "power", parse_eigen_solver);
    mo.sampling.restart = parse_enum(s, "restart", "post-step", parse_restart_point);
    mo.sampling.censor = parse_enum(s, "censor", "abort", parse_censor_policy);
    const auto cap = s.get<std::int64_t>("reservoir_cap", 0);
    if (cap < 0) s.fail("reservoir_cap", "must be >= 0 (0 = uncapped)");
    if (cap > 0) mo.reservoir_cap = static_cast<std::size_t>(cap);
    s.finish();
  }

  {
    Section s = top.sub("baseline");
    auto& b = cfg.baseline;
    b.seed = cfg.seed;
    b.budget_force_evals = s.get<std::int64_t>("budget_force_evals", 0);
    if (b.budget_force_evals < 0) s.fail("budget_force_evals", "must be >= 0");
    b.replicas = s.get<int>("replicas", 1);
    if (b.replicas < 1) s.fail("replicas", "must be >= 1");
    const auto pts = s.get<std::int64_t>("points_per_milestone", 10000);
    if (pts < 0) s.fail("points_per_milestone", "must be >= 0");
    b.points_per_milestone = static_cast<std::size_t>(pts);
    s.finish();
  }

  {
    Section s = top.sub("output");
    cfg.write_fragments = s.get<bool>("fragments", true);
    cfg.grid_points = s.get<int>("grid_points", 100);
    if (cfg.grid_points < 2) s.fail("grid_points", "must be >= 2");
    s.finish();
  }
  top.finish();
  return cfg;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source_name << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  return from_table(root);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

PotentialSpec build_potential(const RunConfig& cfg) {
  const auto& p = cfg.potential;
  switch (p.kind) {
    case PotentialKind::MuellerBrown: return PotentialSpec::mueller_brown();
    case PotentialKind::Flat: return PotentialSpec::flat();
    case PotentialKind::Quadratic: return PotentialSpec::quadratic(p.stiffness, p.center);
    case PotentialKind::LinearDrift: return PotentialSpec::linear_drift(p.gradient);
    case PotentialKind::RoughLandscape: return make_rough_landscape(p.order, p.landscape_seed.value_or(cfg.seed));
  }
  throw ConfigError("potential.kind: unsupported");
}

Partition build_partition(const RunConfig& cfg) {
  const auto& pc = cfg.partition;
  try {
    switch (pc.type) {
      case PartitionType::Voronoi:
        if (cfg.integrator.domain == Domain::Torus) throw ConfigError("partition.type: voronoi needs the plane domain");
        return build_voronoi_partition(pc.centers, pc.bbox, pc.voronoi_roles, pc.rho);
      case PartitionType::Grid:
        return build_grid_partition(pc.n, cfg.integrator.domain == Domain::Torus, pc.grid_roles, pc.rho);
      case PartitionType::Levels:
        if (cfg.integrator.domain == Domain::Torus) throw ConfigError("partition.type: levels needs the plane domain");
        return build_level_partition(pc.levels, pc.bbox, pc.rho);
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }
  throw ConfigError("partition.type: unsupported");
}

nlohmann::ordered_json config_echo(const RunConfig& cfg) {
  using nlohmann::ordered_json;
  auto vec = [](const Vec2& v) { return ordered_json::array({v.x(), v.y()}); };
  ordered_json j;
  j["seed"] = cfg.seed;

  ordered_json pot;
  pot["kind"] = std::string(to_string(cfg.potential.kind));
  switch (cfg.potential.kind) {
    case PotentialKind::RoughLandscape:
      pot["order"] = cfg.potential.order;
      pot["landscape_seed"] = cfg.potential.landscape_seed.value_or(cfg.seed);
      break;
    case PotentialKind::Quadratic:
      pot["stiffness"] = vec(cfg.potential.stiffness);
      pot["center"] = vec(cfg.potential.center);
      break;
    case PotentialKind::LinearDrift: pot["gradient"] = vec(cfg.potential.gradient); break;
    default: break;
  }
  j["potential"] = pot;

  j["integrator"] = {{"dt", cfg.integrator.dt},
                     {"beta_inv", cfg.integrator.beta_inv},
                     {"domain", std::string(to_string(cfg.integrator.domain))},
                     {"max_steps_per_fragment", cfg.integrator.max_steps_per_fragment}};

  const auto& pc = cfg.partition;
  ordered_json part;
  part["type"] = std::string(to_string(pc.type));
  part["bbox"] = {pc.bbox.x1_min, pc.bbox.x1_max, pc.bbox.x2_min, pc.bbox.x2_max};
  if (pc.type == PartitionType::Voronoi) {
    part["centers"] = ordered_json::array();
    for (const auto& c : pc.centers) part["centers"].push_back(vec(c));
    if (pc.voronoi_roles) {
      part["reactant_pair"] = pc.voronoi_roles->reactant;
      part["product_pair"] = pc.voronoi_roles->product;
    }
  } else if (pc.type == PartitionType::Grid) {
    part["n"] = pc.n;
    if (pc.grid_roles) {
      auto edge = [](const GridEdge& e) {
        static constexpr const char* names[] = {"bottom", "top", "left", "right"};
        return ordered_json{{"i", e.i}, {"j", e.j}, {"side", names[static_cast<int>(e.side)]}};
      };
      part["reactant"] = edge(pc.grid_roles->reactant);
      part["product"] = edge(pc.grid_roles->product);
    }
  } else {
    part["levels"] = pc.levels;
  }
  part["rho"] = pc.rho.kind == ReactantDistribution::Kind::PointMass ? "point" : "uniform";
  if (pc.rho.point) part["rho_point"] = vec(*pc.rho.point);
  j["partition"] = part;

  const auto& mo = cfg.milestoning;
  j["milestoning"] = {{"fragments_per_milestone", mo.fragments_per_milestone},
                      {"epsilon", mo.epsilon},
                      {"max_iterations", mo.max_iterations},
                      {"init", std::string(to_string(mo.init))},
                      {"init_points", mo.init_points},
                      {"weights", std::string(to_string(mo.weights))},
                      {"stopping", std::string(to_string(mo.stopping))},
                      {"solver", std::string(to_string(mo.solver))},
                      {"restart", std::string(to_string(mo.sampling.restart))},
                      {"censor", std::string(to_string(mo.sampling.censor))},
                      {"reservoir_cap", mo.reservoir_cap ? static_cast<std::int64_t>(*mo.reservoir_cap) : 0}};
  j["baseline"] = {{"budget_force_evals", cfg.baseline.budget_force_evals},
                   {"replicas", cfg.baseline.replicas},
                   {"points_per_milestone", cfg.baseline.points_per_milestone}};
  j["output"] = {{"fragments", cfg.write_fragments}, {"grid_points", cfg.grid_points}};
  return j;
}

std::string comparison_key(const nlohmann::ordered_json& echo) {
  auto copy = echo;
  if (copy.contains("integrator")) copy["integrator"].erase("dt");
  return copy.dump();
}

}  // namespace exm
