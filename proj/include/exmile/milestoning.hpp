#ifndef EXMILE_MILESTONING_HPP
#define EXMILE_MILESTONING_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exmile/fragments.hpp"
#include "exmile/geometry.hpp"
#include "exmile/potentials.hpp"
#include "exmile/sde.hpp"

namespace exm {

// LowestEnergy: one point per milestone at its lowest potential value.
enum class InitMode { OnePointPerMilestone, UniformOnMilestones, LowestEnergy };
enum class WeightsMode { Stationary, SimplePower };
enum class StoppingRule { Consecutive, Single };
enum class EigenSolver { Power, Direct };

std::string_view to_string(InitMode mode);
std::string_view to_string(WeightsMode mode);
std::string_view to_string(StoppingRule rule);
std::string_view to_string(EigenSolver solver);
InitMode parse_init_mode(std::string_view name);
WeightsMode parse_weights_mode(std::string_view name);
StoppingRule parse_stopping_rule(std::string_view name);
EigenSolver parse_eigen_solver(std::string_view name);

struct FluxEstimate {
  std::vector<Reservoir> reservoirs;
  Eigen::VectorXd coarse_weights;  // reservoir totals, normalized
  int iteration = 0;

  int size() const { return static_cast<int>(reservoirs.size()); }
};

/// Recomputes coarse_weights from the reservoir totals (all zero stays zero).
void refresh_coarse_weights(FluxEstimate& flux);

FluxEstimate init_guess(const Partition& partition, InitMode mode, int points_per_milestone = 1,
                        const PotentialSpec* spec = nullptr);

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Empirical milestone-to-milestone fractions. Active rows sum to one,
/// inactive rows are empty.
struct CoarseMatrix {
  SparseRowMatrix A;
  std::vector<bool> active;

  int size() const { return static_cast<int>(active.size()); }
};

CoarseMatrix build_coarse_matrix(const std::vector<RowSample>& rows);

struct StationaryOptions {
  EigenSolver solver = EigenSolver::Power;
  int max_iterations = 100000;
  double tolerance = 1e-13;  // on ||w A - w||_1
  int reactant = -1;         // needed by the direct solver
  int product = -1;
};

struct StationaryWeights {
  Eigen::VectorXd w;
  double residual = 0.0;
  int iterations = 0;
  std::vector<bool> used;  // rows that took part in the eigenproblem
};

/// Left fixed vector of A over its active rows. Rows left with no mass inside
/// the active set are pruned (weight 0). The power solver iterates
/// w <- (w + w A) / 2, which converges on periodic A too; `warm_start`
/// (optional) seeds it. The direct solver uses nu = rho (I - Abar)^{-1}, rho
/// being the product row.
StationaryWeights solve_stationary_weights(const CoarseMatrix& A, const StationaryOptions& options = {},
                                           const Eigen::VectorXd* warm_start = nullptr);

struct IterationRecord {
  int n = 0;
  std::optional<double> T;        // sum_i mu^{(n-1)}_i tbar_i / w_P
  std::optional<double> T_w;      // sum_i w_i tbar_i / w_P
  std::optional<double> T_prev;   // sum_i mu^{(n-1)}_i tbar_i / mu^{(n-1)}_P
  std::optional<double> delta_T;  // |T^{(n)} - T^{(n-1)}|
  double weight_tv = 0.0;         // TV between successive coarse weights
  double eigen_residual = 0.0;
  int eigen_iterations = 0;
  int active_rows = 0;
  std::int64_t fragments = 0;
  std::int64_t dropped = 0;
  std::int64_t force_evals = 0;
  std::int64_t force_evals_cumulative = 0;
  double flux_update_error = 0.0;  // max |new weights - w^T A|
  Eigen::VectorXd mean_fpt;
  Eigen::VectorXd weights;  // coarse weights after the update
  Eigen::VectorXd w;        // solved stationary weights
};

struct MilestoningOptions {
  int fragments_per_milestone = 10;  // L
  double epsilon = 1e-3;
  int max_iterations = 50;
  InitMode init = InitMode::OnePointPerMilestone;
  int init_points = 1;
  WeightsMode weights = WeightsMode::Stationary;
  StoppingRule stopping = StoppingRule::Consecutive;
  EigenSolver solver = EigenSolver::Power;
  SamplingOptions sampling;
  std::optional<std::size_t> reservoir_cap;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationOutput {
  FluxEstimate flux;
  CoarseMatrix matrix;
  IterationRecord record;
  std::vector<RowSample> rows;
};

/// One pass of row estimation, eigen-solve and flux update. `n` is the new
/// iteration number; `previous_T` feeds delta_T.
IterationOutput iterate(const FluxEstimate& flux, int n, const Partition& partition, const PotentialSpec& spec,
                        const IntegratorConfig& cfg, const MilestoningOptions& options,
                        std::optional<double> previous_T = std::nullopt, std::int64_t force_evals_before = 0);

struct MilestoningResult {
  FluxEstimate flux;
  Eigen::VectorXd mean_fpt;  // from the last iteration
  std::optional<double> T;
  bool converged = false;
  int iterations = 0;
  std::int64_t force_evals = 0;
  std::vector<IterationRecord> history;
};

/// Called after every iteration (for streaming fragments to disk).
using IterationObserver = std::function<void(const IterationOutput&)>;

MilestoningResult run_milestoning(const Partition& partition, const PotentialSpec& spec, const IntegratorConfig& cfg,
                                  const MilestoningOptions& options, const IterationObserver& observer = {});

/// What error_report needs from one finished run.
struct RunDigest {
  double dt = 0.0;
  std::string comparison_key;  // resolved config with dt removed
  std::optional<double> T;
  Eigen::VectorXd weights;
  Eigen::VectorXd mean_fpt;
  int product = -1;
};

struct ErrorReport {
  double c1 = 0.0;        // E^mu[tau_M] from the finer run
  double c2_proxy = 0.0;  // max sampled mean local fpt: a lower proxy of the sup
  double tv = 0.0;        // coarse-weight TV against the reference (else the finer run)
  bool tv_against_reference = false;
  double phi = 0.0;          // |E^{mu~}[tau_M](dt/2) - E^{mu~}[tau_M](dt)| under the coarser weights
  double inverse_gap = 0.0;  // |1/mu(P) - 1/mu~(P)|
  double bound = 0.0;        // c1 |1/mu(P) - 1/mu~(P)| + (c2 TV + phi) / mu~(P)
  double observed = 0.0;             // |E_a / mu~(P) - E_b / mu(P)| from the digests
  std::optional<double> observed_T;  // |T_a - T_b| as reported by the runs
};

/// run_a at dt, run_b at dt/2 (proxy for the exact-time limit).
ErrorReport error_report(const RunDigest& run_a, const RunDigest& run_b,
                         const std::optional<Eigen::VectorXd>& reference = std::nullopt);

}  // namespace exm

#endif  // EXMILE_MILESTONING_HPP
