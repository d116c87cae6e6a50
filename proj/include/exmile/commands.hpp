#ifndef EXMILE_COMMANDS_HPP
#define EXMILE_COMMANDS_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace exm {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int runtime = 1;
inline constexpr int config = 2;
inline constexpr int not_converged = 3;
inline constexpr int no_events = 4;
}  // namespace exit_code

struct CommandOptions {
  std::filesystem::path config;
  std::optional<int> threads;                   // default: available parallelism
  std::optional<std::filesystem::path> output;  // overrides output_dir
};

int cmd_milestone_run(const CommandOptions& options, std::ostream& log);
int cmd_long_run(const CommandOptions& options, std::ostream& log);
/// what: "potential-grid" or "partition".
int cmd_dump(const CommandOptions& options, const std::string& what, std::ostream& log);

struct OracleOptions {
  std::filesystem::path matrix;
  std::filesystem::path meta;
  int max_certificate_horizon = 20;
  int bound_steps = 60;
  int neumann_terms = 50;
  std::optional<int> gcd_horizon;  // default 4 m + 20
};
nlohmann::ordered_json oracle_report(const OracleOptions& options);
int cmd_oracle(const OracleOptions& options, std::ostream& out);

struct ErrorReportOptions {
  std::filesystem::path run_a;
  std::filesystem::path run_b;
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> output;
};
int cmd_error_report(const ErrorReportOptions& options, std::ostream& out);

/// Runs body, mapping exceptions to exit codes (config problems to 2,
/// everything else to 1) with a one-line message on `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace exm

#endif  // EXMILE_COMMANDS_HPP
