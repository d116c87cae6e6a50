#ifndef EXMILE_ERRORS_HPP
#define EXMILE_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace exm {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration problems; the CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fragment hit max_steps_per_fragment before crossing another milestone.
class CensoredFragment : public std::runtime_error {
 public:
  CensoredFragment(std::int64_t steps, std::uint64_t stream_id)
      : std::runtime_error("fragment censored after " + std::to_string(steps) +
                           " steps (stream " + std::to_string(stream_id) + ")"),
        steps_(steps),
        stream_id_(stream_id) {}

  std::int64_t steps() const noexcept { return steps_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::int64_t steps_;
  std::uint64_t stream_id_;
};

// The product state cannot be reached (I - Kbar singular, empty support...).
class UnreachableProduct : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace exm

#endif  // EXMILE_ERRORS_HPP
