#include <CLI11.hpp>
#include <iostream>

#include "exmile/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"exmile: exact milestoning and long-trajectory MFPT estimation"};
  app.require_subcommand(1);

  exm::CommandOptions run;
  std::string output, what;
  int threads = 0;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", run.config, "TOML run file")->required()->check(CLI::ExistingFile);
    sub->add_option("--threads", threads, "worker threads (default: available parallelism)")->check(CLI::PositiveNumber);
    sub->add_option("--output", output, "output directory (overrides output_dir)");
  };

  auto* milestone = app.add_subcommand("milestone-run", "run the exact milestoning iteration");
  add_run_flags(milestone);
  auto* long_run = app.add_subcommand("long-run", "long trajectories with restart at the reactant");
  add_run_flags(long_run);
  auto* dump = app.add_subcommand("dump", "write potential-grid.csv or partition.csv");
  add_run_flags(dump);
  dump->add_option("what", what, "potential-grid | partition")->required();

  exm::OracleOptions oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "certificates for a discrete chain");
  oracle_cmd->add_option("--matrix", oracle.matrix, "kernel CSV")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_option("--meta", oracle.meta, "metadata JSON")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_option("--max-N", oracle.max_certificate_horizon, "largest N tried for the certificate");
  oracle_cmd->add_option("--bound-steps", oracle.bound_steps, "steps of the TV decay curve");
  oracle_cmd->add_option("--neumann-terms", oracle.neumann_terms, "largest truncation n");
  int gcd_horizon = 0;
  oracle_cmd->add_option("--gcd-horizon", gcd_horizon, "horizon for the aperiodicity gcd");

  exm::ErrorReportOptions report;
  std::string reference, report_out;
  auto* report_cmd = app.add_subcommand("error-report", "compare runs at dt and dt/2");
  report_cmd->add_option("--run-a", report.run_a, "output directory of the run at dt")->required();
  report_cmd->add_option("--run-b", report.run_b, "output directory of the run at dt/2")->required();
  report_cmd->add_option("--reference", reference, "output directory of a long run");
  report_cmd->add_option("--output", report_out, "write the report JSON here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exm::exit_code::config;
  }
  if (threads > 0) run.threads = threads;
  if (!output.empty()) run.output = output;

  return exm::guarded(
      [&]() -> int {
        if (*milestone) return exm::cmd_milestone_run(run, std::cerr);
        if (*long_run) return exm::cmd_long_run(run, std::cerr);
        if (*dump) return exm::cmd_dump(run, what, std::cerr);
        if (*oracle_cmd) {
          if (gcd_horizon > 0) oracle.gcd_horizon = gcd_horizon;
          return exm::cmd_oracle(oracle, std::cout);
        }
        if (!reference.empty()) report.reference = reference;
        if (!report_out.empty()) report.output = report_out;
        return exm::cmd_error_report(report, std::cout);
      },
      std::cerr);
}
