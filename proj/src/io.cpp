#include "exmile/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "exmile/errors.hpp"

namespace exm {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& history) {
  auto out = open_output(path);
  const auto m = history.empty() ? 0 : history.front().mean_fpt.size();
  out << "iteration,T,T_w,T_prev,delta_T,weight_tv,eigen_residual,eigen_iterations,active_rows,fragments,dropped,"
         "force_evals,force_evals_cumulative,flux_update_error";
  for (Eigen::Index i = 0; i < m; ++i) out << ",tau_" << i;
  out << '\n';
  for (const auto& r : history) {
    out << r.n << ',' << format_double(r.T) << ',' << format_double(r.T_w) << ',' << format_double(r.T_prev) << ','
        << format_double(r.delta_T) << ',' << format_double(r.weight_tv) << ',' << format_double(r.eigen_residual)
        << ',' << r.eigen_iterations << ',' << r.active_rows << ',' << r.fragments << ',' << r.dropped << ','
        << r.force_evals << ',' << r.force_evals_cumulative << ',' << format_double(r.flux_update_error);
    for (Eigen::Index i = 0; i < r.mean_fpt.size(); ++i) out << ',' << format_double(r.mean_fpt(i));
    out << '\n';
  }
}

void write_flux_csv(const std::filesystem::path& path, const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& mean_local_fpt, const std::vector<std::size_t>& reservoir_sizes) {
  auto out = open_output(path);
  out << kFluxHeader << '\n';
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    out << i << ',' << format_double(weights(i)) << ',' << format_double(mean_local_fpt(i)) << ','
        << reservoir_sizes.at(static_cast<std::size_t>(i)) << '\n';
  }
}

void write_fragment_rows(std::ostream& out, std::uint64_t run_id, int iteration, const std::vector<RowSample>& rows) {
  for (const auto& row : rows) {
    for (const auto& f : row.fragments) {
      out << run_id << ',' << iteration << ',' << f.start_milestone << ',' << f.end_milestone << ','
          << format_double(f.fpt) << ',' << f.steps << ',' << f.stream_id << ',' << format_double(f.start_point.x())
          << ',' << format_double(f.start_point.y()) << ',' << format_double(f.end_point.x()) << ','
          << format_double(f.end_point.y()) << '\n';
    }
  }
}

void write_events_csv(const std::filesystem::path& path, const std::vector<PassageEvent>& events) {
  auto out = open_output(path);
  out << kEventsHeader << '\n';
  for (const auto& e : events) {
    out << e.replica << ',' << e.event_index << ',' << format_double(e.passage_time) << ',' << e.crossings << ','
        << e.force_evals << '\n';
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& json) {
  auto out = open_output(path);
  out << json.dump(2) << '\n';
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    if (s == "nan") return NAN;
    throw ConfigError(where + ": '" + s + "' is not a number");
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

}  // namespace

FluxTable read_flux_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line != kFluxHeader) throw ConfigError(path.string() + ": unexpected flux header");
  std::vector<double> w, tau;
  FluxTable t;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = path.string() + " line " + std::to_string(row);
    if (cells.size() != 4) throw ConfigError(where + ": expected 4 columns");
    if (static_cast<std::size_t>(parse_number(cells[0], where)) != w.size()) {
      throw ConfigError(where + ": milestone indices must be consecutive from 0");
    }
    w.push_back(parse_number(cells[1], where));
    tau.push_back(parse_number(cells[2], where));
    t.reservoir_sizes.push_back(static_cast<std::size_t>(parse_number(cells[3], where)));
  }
  t.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  t.mean_local_fpt = Eigen::Map<Eigen::VectorXd>(tau.data(), static_cast<Eigen::Index>(tau.size()));
  return t;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    for (const auto& cell : split(line)) values.push_back(parse_number(cell, path.string() + " line " + std::to_string(row)));
    rows.push_back(std::move(values));
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m == 0) throw ConfigError(path.string() + ": empty matrix");
  Eigen::MatrixXd K(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != m) {
      throw ConfigError(path.string() + ": matrix must be square (row " + std::to_string(i) + ")");
    }
    for (Eigen::Index j = 0; j < m; ++j) K(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return K;
}

nlohmann::ordered_json read_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Chain read_chain(const std::filesystem::path& matrix_csv, const std::filesystem::path& meta_json) {
  Chain chain;
  chain.kernel = read_matrix_csv(matrix_csv);
  const auto m = chain.kernel.rows();
  const auto meta = read_json(meta_json);
  try {
    chain.reactant = meta.at("reactant").get<Eigen::Index>();
    chain.product = meta.at("product").get<Eigen::Index>();
    const auto times = meta.at("jump_time_means").get<std::vector<double>>();
    chain.jump_time_means = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    if (meta.contains("rho")) {
      const auto rho = meta.at("rho").get<std::vector<double>>();
      chain.rho = Eigen::Map<const Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
    } else {
      chain.rho = Eigen::VectorXd::Zero(m);
      if (chain.reactant >= 0 && chain.reactant < m) chain.rho(chain.reactant) = 1.0;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_json.string() + ": " + e.what());
  }
  try {
    chain.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid chain: ") + e.what());
  }
  return chain;
}

}  // namespace exm
