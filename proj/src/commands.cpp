#include "exmile/commands.hpp"

#include <fstream>

#include "exmile/baseline.hpp"
#include "exmile/config.hpp"
#include "exmile/errors.hpp"
#include "exmile/io.hpp"
#include "exmile/markov.hpp"
#include "exmile/milestoning.hpp"
#include "exmile/parallel.hpp"

namespace exm {

namespace {

using nlohmann::ordered_json;

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

struct Prepared {
  RunConfig cfg;
  std::filesystem::path out_dir;
  int threads = 1;
};

Prepared prepare(const CommandOptions& options) {
  Prepared p;
  p.cfg = load_config(options.config);
  p.out_dir = options.output.value_or(p.cfg.output_dir);
  p.threads = options.threads.value_or(default_thread_count());
  if (p.threads < 1) throw ConfigError("--threads must be >= 1");
  p.cfg.milestoning.sampling.threads = p.threads;
  p.cfg.baseline.threads = p.threads;
  return p;
}

void write_reservoirs(const std::filesystem::path& path, const std::vector<Reservoir>& reservoirs) {
  auto out = open_output(path);
  out << "milestone_index,x1,x2,weight\n";
  for (const auto& r : reservoirs) {
    for (const auto& p : r.points()) {
      out << r.milestone_index() << ',' << format_double(p.x.x()) << ',' << format_double(p.x.y()) << ','
          << format_double(p.weight) << '\n';
    }
  }
}

std::vector<std::size_t> sizes_of(const std::vector<Reservoir>& reservoirs) {
  std::vector<std::size_t> out;
  for (const auto& r : reservoirs) out.push_back(r.size());
  return out;
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::runtime;
  }
}

int cmd_milestone_run(const CommandOptions& options, std::ostream& log) {
  const Prepared p = prepare(options);
  const auto spec = build_potential(p.cfg);
  const auto partition = build_partition(p.cfg);
  std::filesystem::create_directories(p.out_dir);

  std::ofstream fragments;
  if (p.cfg.write_fragments) {
    fragments = open_output(p.out_dir / "fragments.csv");
    fragments << kFragmentsHeader << '\n';
  }
  auto observer = [&](const IterationOutput& it) {
    if (p.cfg.write_fragments) write_fragment_rows(fragments, p.cfg.seed, it.record.n, it.rows);
    log << "iteration " << it.record.n << ": T = " << format_double(it.record.T) << ", force evals "
        << it.record.force_evals_cumulative << '\n';
  };
  const auto result = run_milestoning(partition, spec, p.cfg.integrator, p.cfg.milestoning, observer);

  write_history_csv(p.out_dir / "history.csv", result.history);
  write_flux_csv(p.out_dir / "flux.csv", result.flux.coarse_weights, result.mean_fpt, sizes_of(result.flux.reservoirs));
  write_reservoirs(p.out_dir / "reservoirs.csv", result.flux.reservoirs);

  ordered_json summary;
  summary["command"] = "milestone-run";
  summary["status"] = result.converged ? "converged" : "not-converged";
  summary["T"] = optional_number(result.T);
  const auto& last = result.history.back();
  summary["T_w"] = optional_number(last.T_w);
  summary["T_prev"] = optional_number(last.T_prev);
  summary["delta_T"] = optional_number(last.delta_T);
  summary["epsilon"] = p.cfg.milestoning.epsilon;
  summary["iterations"] = result.iterations;
  summary["force_evals"] = result.force_evals;
  summary["milestones"] = partition.size();
  summary["reactant"] = partition.reactant();
  summary["product"] = partition.product();
  summary["seed"] = p.cfg.seed;
  summary["config"] = config_echo(p.cfg);
  write_json(p.out_dir / "summary.json", summary);
  log << "T = " << format_double(result.T) << (result.converged ? " (converged)" : " (not converged)") << '\n';
  return result.converged ? exit_code::ok : exit_code::not_converged;
}

int cmd_long_run(const CommandOptions& options, std::ostream& log) {
  const Prepared p = prepare(options);
  const auto spec = build_potential(p.cfg);
  const auto partition = build_partition(p.cfg);
  std::filesystem::create_directories(p.out_dir);
  const auto result = run_long(partition, spec, p.cfg.integrator, p.cfg.baseline);

  write_events_csv(p.out_dir / "events.csv", result.events);
  write_flux_csv(p.out_dir / "flux.csv", result.weights, result.mean_local_fpt, sizes_of(result.reservoirs));
  write_reservoirs(p.out_dir / "reservoirs.csv", result.reservoirs);

  ordered_json summary;
  summary["command"] = "long-run";
  summary["status"] = result.events.empty() ? "no-events" : "ok";
  summary["events"] = result.events.size();
  summary["mfpt"] = optional_number(result.mfpt);
  summary["mfpt_std_error"] = result.mfpt ? ordered_json(result.mfpt_std_error) : ordered_json(nullptr);
  summary["force_evals"] = result.force_evals;
  summary["milestones"] = partition.size();
  summary["reactant"] = partition.reactant();
  summary["product"] = partition.product();
  summary["seed"] = p.cfg.seed;
  summary["config"] = config_echo(p.cfg);
  write_json(p.out_dir / "summary.json", summary);
  log << "events = " << result.events.size() << ", mfpt = " << format_double(result.mfpt) << '\n';
  return result.events.empty() ? exit_code::no_events : exit_code::ok;
}

int cmd_dump(const CommandOptions& options, const std::string& what, std::ostream& log) {
  if (what != "potential-grid" && what != "partition") {
    throw ConfigError("dump: unknown artifact '" + what + "' (potential-grid|partition)");
  }
  const Prepared p = prepare(options);
  std::filesystem::create_directories(p.out_dir);
  if (what == "potential-grid") {
    const auto spec = build_potential(p.cfg);
    const bool torus = p.cfg.integrator.domain == Domain::Torus;
    const Box box = torus ? Box{0.0, 1.0, 0.0, 1.0} : p.cfg.partition.bbox;
    const int n = p.cfg.grid_points;
    const auto path = p.out_dir / "potential_grid.csv";
    auto out = open_output(path);
    out << "x1,x2,u\n";
    for (int a = 0; a < n; ++a) {
      // Endpoints included, so on the torus opposite edges repeat.
      const double x2 = box.x2_min + (box.x2_max - box.x2_min) * a / (n - 1);
      for (int b = 0; b < n; ++b) {
        const double x1 = box.x1_min + (box.x1_max - box.x1_min) * b / (n - 1);
        out << format_double(x1) << ',' << format_double(x2) << ',' << format_double(eval_potential(spec, {x1, x2}))
            << '\n';
      }
    }
    log << "wrote " << path.string() << '\n';
  } else {
    const auto partition = build_partition(p.cfg);
    const auto path = p.out_dir / "partition.csv";
    auto out = open_output(path);
    out << "milestone_index,segment_index,role,cell_a,cell_b,x1_a,x2_a,x1_b,x2_b\n";
    for (const auto& ms : partition.milestones()) {
      const char* role = ms.role == MilestoneRole::Reactant ? "reactant"
                         : ms.role == MilestoneRole::Product ? "product"
                                                              : "interior";
      for (std::size_t s = 0; s < ms.segments.size(); ++s) {
        const auto& seg = ms.segments[s];
        out << ms.index << ',' << s << ',' << role << ',' << ms.cells[0] << ',' << ms.cells[1] << ','
            << format_double(seg.a.x()) << ',' << format_double(seg.a.y()) << ',' << format_double(seg.b.x()) << ','
            << format_double(seg.b.y()) << '\n';
      }
    }
    log << "wrote " << path.string() << '\n';
  }
  return exit_code::ok;
}

ordered_json oracle_report(const OracleOptions& options) {
  const Chain chain = read_chain(options.matrix, options.meta);
  const auto m = chain.size();
  ordered_json j;
  j["states"] = m;
  j["reactant"] = chain.reactant;
  j["product"] = chain.product;

  const Eigen::VectorXd mu = invariant_mu_visits(chain);
  j["mu"] = std::vector<double>(mu.data(), mu.data() + m);
  j["invariance_residual_inf"] = (chain.kernel.transpose() * mu - mu).cwiseAbs().maxCoeff();
  j["expected_sigma_P"] = expected_visits(chain).sum() - 1.0;

  const auto mfpt = mfpt_check(chain);
  j["mfpt"] = {{"direct", mfpt.direct},
               {"milestoning", mfpt.milestoning},
               {"mu_product", mfpt.mu_product},
               {"relative_difference", std::abs(mfpt.direct - mfpt.milestoning) / std::abs(mfpt.direct)}};

  const int horizon = options.gcd_horizon.value_or(4 * static_cast<int>(m) + 20);
  j["gcd_horizon"] = horizon;
  j["gcd"] = aperiodicity_gcd(chain, horizon);

  ordered_json cert;
  const auto N = certificate_horizon(chain, options.max_certificate_horizon);
  cert["max_N"] = options.max_certificate_horizon;
  if (N) {
    const auto g = geometric_bound_certificate(chain, *N, options.bound_steps);
    bool dominated = true;
    for (std::size_t n = 0; n < g.bound.size(); ++n) dominated = dominated && g.empirical[n] <= g.bound[n];
    cert["hypothesis_satisfied"] = true;
    cert["N"] = *N;
    cert["lambda"] = g.lambda;
    cert["bound"] = g.bound;
    cert["empirical"] = g.empirical;
    cert["dominated"] = dominated;
  } else {
    cert["hypothesis_satisfied"] = false;
    cert["N"] = nullptr;
    cert["lambda"] = 0.0;
  }
  j["geometric_certificate"] = cert;

  ordered_json neumann = ordered_json::array();
  for (int n = 1; n <= options.neumann_terms; ++n) {
    const auto r = neumann_partial(chain, n);
    neumann.push_back({{"n", n}, {"tv_error", r.tv_error}, {"bound", r.bound}});
  }
  j["neumann"] = neumann;

  try {
    const Eigen::VectorXd occ = semi_markov_occupancy(chain);
    j["semi_markov_occupancy"] = std::vector<double>(occ.data(), occ.data() + m);
  } catch (const DegenerateTime&) {
    j["semi_markov_occupancy"] = nullptr;
  }
  return j;
}

int cmd_oracle(const OracleOptions& options, std::ostream& out) {
  out << oracle_report(options).dump(2) << '\n';
  return exit_code::ok;
}

namespace {

RunDigest read_digest(const std::filesystem::path& dir) {
  const auto summary = read_json(dir / "summary.json");
  const auto flux = read_flux_csv(dir / "flux.csv");
  RunDigest d;
  try {
    const auto& config = summary.at("config");
    d.dt = config.at("integrator").at("dt").get<double>();
    d.comparison_key = comparison_key(config);
    if (!summary.at("T").is_null()) d.T = summary.at("T").get<double>();
    d.product = summary.at("product").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError((dir / "summary.json").string() + ": " + e.what());
  }
  d.weights = flux.weights;
  d.mean_fpt = flux.mean_local_fpt;
  return d;
}

}  // namespace

int cmd_error_report(const ErrorReportOptions& options, std::ostream& out) {
  const RunDigest a = read_digest(options.run_a);
  const RunDigest b = read_digest(options.run_b);
  std::optional<Eigen::VectorXd> reference;
  if (options.reference) reference = read_flux_csv(*options.reference / "flux.csv").weights;
  ErrorReport rep;
  try {
    rep = error_report(a, b, reference);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("error-report: ") + e.what());
  }
  ordered_json j;
  j["dt_a"] = a.dt;
  j["dt_b"] = b.dt;
  j["c1"] = rep.c1;
  j["c2_lower_proxy"] = rep.c2_proxy;
  j["tv"] = rep.tv;
  j["tv_against"] = rep.tv_against_reference ? "reference" : "run-b";
  j["phi"] = rep.phi;
  j["inverse_product_gap"] = rep.inverse_gap;
  j["bound"] = rep.bound;
  j["observed"] = rep.observed;
  j["observed_T"] = optional_number(rep.observed_T);
  j["bound_holds"] = rep.bound >= rep.observed;
  if (options.output) write_json(*options.output, j);
  out << j.dump(2) << '\n';
  return exit_code::ok;
}

}  // namespace exm
