#ifndef EXMILE_IO_HPP
#define EXMILE_IO_HPP

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exmile/baseline.hpp"
#include "exmile/fragments.hpp"
#include "exmile/geometry.hpp"
#include "exmile/markov.hpp"
#include "exmile/milestoning.hpp"

namespace exm {

/// %.17g, with "nan" / "inf" / "-inf" spelled out.
std::string format_double(double v);
inline std::string format_double(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

inline constexpr const char* kFluxHeader = "milestone_index,weight,mean_local_fpt,reservoir_size";
inline constexpr const char* kFragmentsHeader =
    "run_id,iteration,start_milestone,end_milestone,fpt,steps,stream_id,start_x1,start_x2,end_x1,end_x2";
inline constexpr const char* kEventsHeader = "replica,event_index,passage_time,crossings,force_evals";

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history);
void write_flux_csv(const std::filesystem::path& path, const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& mean_local_fpt, const std::vector<std::size_t>& reservoir_sizes);
void write_fragment_rows(std::ostream& out, std::uint64_t run_id, int iteration, const std::vector<RowSample>& rows);
void write_events_csv(const std::filesystem::path& path, const std::vector<PassageEvent>& events);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& json);

/// Opens for writing in binary mode (LF endings); throws std::runtime_error.
std::ofstream open_output(const std::filesystem::path& path);

struct FluxTable {
  Eigen::VectorXd weights;
  Eigen::VectorXd mean_local_fpt;
  std::vector<std::size_t> reservoir_sizes;
};

FluxTable read_flux_csv(const std::filesystem::path& path);

/// Square matrix from a CSV without header (comma separated rows).
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Chain from a matrix CSV and a metadata JSON with reactant, product,
/// jump_time_means and optional rho (default: point mass on the reactant).
Chain read_chain(const std::filesystem::path& matrix_csv, const std::filesystem::path& meta_json);

nlohmann::ordered_json read_json(const std::filesystem::path& path);

}  // namespace exm

#endif  // EXMILE_IO_HPP
