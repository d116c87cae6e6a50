#ifndef EXMILE_MARKOV_HPP
#define EXMILE_MARKOV_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "exmile/errors.hpp"
#include "exmile/rng.hpp"

namespace exm {

class DegenerateTime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite source-sink jump chain: row-stochastic kernel whose product row is
/// the restart law rho, with a mean local passage time per state (zero on the
/// product).
template <typename Scalar>
struct DiscreteChain {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix kernel;
  Vector jump_time_means;
  Eigen::Index reactant = 0;
  Eigen::Index product = 1;
  Vector rho;

  Eigen::Index size() const { return kernel.rows(); }

  /// Kernel with the product row zeroed (the chain killed on P).
  Matrix transient_kernel() const {
    Matrix k = kernel;
    k.row(product).setZero();
    return k;
  }

  void validate() const;
};

using Chain = DiscreteChain<double>;

/// Half the l1 norm for measures of equal mass; in general sup_C |a(C) - b(C)|.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar total_variation(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const auto diff = (a - b).eval();
  const Scalar pos = diff.cwiseMax(Scalar(0)).sum();
  const Scalar neg = -diff.cwiseMin(Scalar(0)).sum();
  return pos > neg ? pos : neg;
}

template <typename Scalar>
void DiscreteChain<Scalar>::validate() const {
  using std::abs;
  const Eigen::Index m = kernel.rows();
  if (m < 2 || kernel.cols() != m) throw InvalidArgument("chain kernel must be square with at least two states");
  if (jump_time_means.size() != m || rho.size() != m) {
    throw InvalidArgument("chain: jump_time_means and rho must have one entry per state");
  }
  if (reactant < 0 || reactant >= m || product < 0 || product >= m || reactant == product) {
    throw InvalidArgument("chain: reactant/product indices invalid");
  }
  if (!kernel.allFinite() || (kernel.array() < Scalar(0)).any()) {
    throw InvalidArgument("chain kernel entries must be finite and nonnegative");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (abs(kernel.row(i).sum() - Scalar(1)) > Scalar(1e-12)) {
      throw InvalidArgument("chain kernel row " + std::to_string(i) + " is not stochastic");
    }
  }
  if ((rho.array() < Scalar(0)).any() || abs(rho.sum() - Scalar(1)) > Scalar(1e-12) || rho(product) != Scalar(0)) {
    throw InvalidArgument("chain rho must be a probability vector that does not charge the product");
  }
  if (!(rho(reactant) > Scalar(0))) throw InvalidArgument("chain rho must charge the reactant state");
  if (kernel.row(product) != rho.transpose()) {
    throw InvalidArgument("chain product row must equal rho (instantaneous restart)");
  }
  if (!jump_time_means.allFinite() || (jump_time_means.array() < Scalar(0)).any()) {
    throw InvalidArgument("chain jump_time_means must be finite and nonnegative");
  }
  if (jump_time_means(product) != Scalar(0)) throw InvalidArgument("chain jump time at the product must be 0");

  // Every state must reach the product.
  std::vector<bool> reaches(static_cast<std::size_t>(m), false);
  reaches[static_cast<std::size_t>(product)] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (reaches[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (kernel(i, j) > Scalar(0) && reaches[static_cast<std::size_t>(j)]) {
          reaches[static_cast<std::size_t>(i)] = changed = true;
          break;
        }
      }
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!reaches[static_cast<std::size_t>(i)]) {
      throw UnreachableProduct("chain state " + std::to_string(i) + " cannot reach the product");
    }
  }
}

/// nu = rho (I - Kbar)^{-1}: expected visits to each state over J_0..J_{sigma_P}.
template <typename Scalar>
typename DiscreteChain<Scalar>::Vector expected_visits(const DiscreteChain<Scalar>& chain) {
  using Matrix = typename DiscreteChain<Scalar>::Matrix;
  const Eigen::Index m = chain.size();
  const Matrix system = (Matrix::Identity(m, m) - chain.transient_kernel()).transpose();
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw UnreachableProduct("I - Kbar is singular: the product is not reachable");
  return lu.solve(chain.rho);
}

/// Invariant probability of the jump chain from the visit-count formula.
template <typename Scalar>
typename DiscreteChain<Scalar>::Vector invariant_mu_visits(const DiscreteChain<Scalar>& chain) {
  chain.validate();
  const auto nu = expected_visits(chain);
  return nu / nu.sum();
}

template <typename Scalar>
struct NeumannResult {
  typename DiscreteChain<Scalar>::Vector partial;
  Scalar tv_error;
  Scalar bound;
};

/// Truncated Neumann series nu(M)^{-1} sum_{i<n} rho Kbar^i against mu, with
/// the tail bound nu(M)^{-1} sum_{i>=n} P(sigma_P >= i) = nu(M)^{-1} rho Kbar^n (I - Kbar)^{-1} 1.
template <typename Scalar>
NeumannResult<Scalar> neumann_partial(const DiscreteChain<Scalar>& chain, int n) {
  using Matrix = typename DiscreteChain<Scalar>::Matrix;
  using Vector = typename DiscreteChain<Scalar>::Vector;
  if (n < 1) throw InvalidArgument("neumann_partial: n must be >= 1");
  chain.validate();
  const Eigen::Index m = chain.size();
  const Vector nu = expected_visits(chain);
  const Scalar mass = nu.sum();
  const Vector mu = nu / mass;
  const Matrix kbar = chain.transient_kernel();

  Vector term = chain.rho;  // (rho Kbar^i)^T
  Vector sum = Vector::Zero(m);
  for (int i = 0; i < n; ++i) {
    sum += term;
    term = kbar.transpose() * term;
  }
  // term now holds (rho Kbar^n)^T.
  Eigen::FullPivLU<Matrix> lu(Matrix::Identity(m, m) - kbar);
  const Vector expected_remaining = lu.solve(Vector::Ones(m));  // E^x[number of remaining visits]
  NeumannResult<Scalar> out;
  out.partial = sum / mass;
  out.tv_error = total_variation(out.partial, mu);
  out.bound = term.dot(expected_remaining) / mass;
  return out;
}

template <typename Scalar>
struct MfptCheck {
  Scalar direct;       // E^rho[tau_P] by first-step analysis
  Scalar milestoning;  // E^mu[tau_M] / mu(P)
  Scalar mu_product;
};

template <typename Scalar>
MfptCheck<Scalar> mfpt_check(const DiscreteChain<Scalar>& chain) {
  using Matrix = typename DiscreteChain<Scalar>::Matrix;
  using Vector = typename DiscreteChain<Scalar>::Vector;
  chain.validate();
  const Eigen::Index m = chain.size();
  const Eigen::Index p = chain.product;

  // (I - K_TT) T = t_T over the non-product states T.
  std::vector<Eigen::Index> states;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i != p) states.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(states.size());
  Matrix system(k, k);
  Vector rhs(k), rho_t(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      system(a, b) = (a == b ? Scalar(1) : Scalar(0)) - chain.kernel(states[a], states[b]);
    }
    rhs(a) = chain.jump_time_means(states[a]);
    rho_t(a) = chain.rho(states[a]);
  }
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw UnreachableProduct("first-step system is singular");
  const Vector times = lu.solve(rhs);

  const Vector mu = invariant_mu_visits(chain);
  MfptCheck<Scalar> out;
  out.direct = rho_t.dot(times);
  out.mu_product = mu(p);
  out.milestoning = mu.dot(chain.jump_time_means) / mu(p);
  return out;
}

/// gcd of { n <= horizon : P^rho(sigma_P = n - 1) > 1e-14 }.
template <typename Scalar>
int aperiodicity_gcd(const DiscreteChain<Scalar>& chain, int horizon) {
  using Vector = typename DiscreteChain<Scalar>::Vector;
  chain.validate();
  const auto kbar_t = chain.transient_kernel().transpose().eval();
  Vector dist = chain.rho;  // law of J_{n-1} on {sigma_P >= n - 1}
  int g = 0;
  for (int n = 1; n <= horizon; ++n) {
    if (dist(chain.product) > Scalar(1e-14)) g = std::gcd(g, n);
    dist = kbar_t * dist;
  }
  if (g == 0) throw UnreachableProduct("no product arrival within the horizon");
  return g;
}

template <typename Scalar>
struct GeometricCertificate {
  bool hypothesis_satisfied = false;
  int horizon = 0;  // N
  Scalar lambda = Scalar(0);
  std::vector<Scalar> bound;      // lambda^{-1} (1 - lambda)^{floor(n/N)}, n = 0..n_max
  std::vector<Scalar> empirical;  // sup_x TV(delta_x K^n, mu)
};

/// lambda = min_x P^x(J_{N-1} in P). When lambda > 0 the sup-TV distance to mu
/// decays at least like the bound curve.
template <typename Scalar>
GeometricCertificate<Scalar> geometric_bound_certificate(const DiscreteChain<Scalar>& chain, int N, int n_max) {
  using Matrix = typename DiscreteChain<Scalar>::Matrix;
  using std::pow;
  if (N < 1) throw InvalidArgument("geometric_bound_certificate: N must be >= 1");
  chain.validate();
  const Eigen::Index m = chain.size();
  Matrix power = Matrix::Identity(m, m);
  for (int i = 0; i < N - 1; ++i) power = power * chain.kernel;

  GeometricCertificate<Scalar> out;
  out.horizon = N;
  out.lambda = power.col(chain.product).minCoeff();
  out.hypothesis_satisfied = out.lambda > Scalar(0);
  if (!out.hypothesis_satisfied) return out;

  const auto mu = invariant_mu_visits(chain);
  Matrix kn = Matrix::Identity(m, m);
  for (int n = 0; n <= n_max; ++n) {
    Scalar worst(0);
    for (Eigen::Index x = 0; x < m; ++x) {
      const Scalar tv = total_variation(kn.row(x).transpose(), mu);
      if (tv > worst) worst = tv;
    }
    out.empirical.push_back(worst);
    out.bound.push_back(pow(Scalar(1) - out.lambda, Scalar(n / N)) / out.lambda);
    kn = kn * chain.kernel;
  }
  return out;
}

/// Smallest N <= max_N with min_x P^x(J_{N-1} in P) > 0.
template <typename Scalar>
std::optional<int> certificate_horizon(const DiscreteChain<Scalar>& chain, int max_N) {
  using Matrix = typename DiscreteChain<Scalar>::Matrix;
  chain.validate();
  Matrix power = Matrix::Identity(chain.size(), chain.size());
  for (int N = 1; N <= max_N; ++N) {
    if (power.col(chain.product).minCoeff() > Scalar(0)) return N;
    power = power * chain.kernel;
  }
  return std::nullopt;
}

template <typename Scalar>
struct CesaroResult {
  Scalar mean;
  Scalar std_error;  // regenerative estimate over completed product-to-product cycles
  std::int64_t cycles;
};

/// (1/n) sum_{i<n} f(J_i) along one simulated path with J_0 ~ rho.
template <typename Scalar>
CesaroResult<Scalar> cesaro_average(const DiscreteChain<Scalar>& chain,
                                    const typename DiscreteChain<Scalar>::Vector& f, std::int64_t n_steps,
                                    RngStream& rng) {
  using Matrix = typename DiscreteChain<Scalar>::Matrix;
  using std::sqrt;
  if (n_steps < 1) throw InvalidArgument("cesaro_average: n_steps must be >= 1");
  chain.validate();
  const Eigen::Index m = chain.size();
  if (f.size() != m) throw InvalidArgument("cesaro_average: f needs one value per state");

  Matrix cumulative(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Scalar acc(0);
    for (Eigen::Index j = 0; j < m; ++j) cumulative(i, j) = (acc += chain.kernel(i, j));
  }
  auto draw = [&](Eigen::Index row) {
    const Scalar u = Scalar(rng.uniform()) * cumulative(row, m - 1);
    Eigen::Index j = 0;
    while (j < m - 1 && !(u < cumulative(row, j))) ++j;
    // Never land on a zero-probability state through ties at the end.
    while (chain.kernel(row, j) == Scalar(0) && j > 0) --j;
    return j;
  };
  Eigen::Index state = 0;
  {
    const Scalar u = Scalar(rng.uniform());
    Scalar acc(0);
    state = m - 1;
    for (Eigen::Index j = 0; j < m; ++j) {
      acc += chain.rho(j);
      if (u < acc && chain.rho(j) > Scalar(0)) {
        state = j;
        break;
      }
    }
  }

  Scalar total(0);
  std::vector<Scalar> cycle_sums, cycle_lengths;
  Scalar cycle_sum(0), cycle_len(0);
  bool in_cycle = false;
  for (std::int64_t i = 0; i < n_steps; ++i) {
    const Scalar value = f(state);
    total += value;
    if (in_cycle) {
      cycle_sum += value;
      cycle_len += Scalar(1);
    }
    if (state == chain.product) {
      if (in_cycle) {
        cycle_sums.push_back(cycle_sum);
        cycle_lengths.push_back(cycle_len);
      }
      in_cycle = true;
      cycle_sum = Scalar(0);
      cycle_len = Scalar(0);
    }
    state = draw(state);
  }
  CesaroResult<Scalar> out;
  out.mean = total / Scalar(n_steps);
  out.cycles = static_cast<std::int64_t>(cycle_sums.size());
  if (cycle_sums.size() < 2) {
    out.std_error = Scalar(INFINITY);
    return out;
  }
  Scalar sum_f(0), sum_len(0);
  for (std::size_t k = 0; k < cycle_sums.size(); ++k) {
    sum_f += cycle_sums[k];
    sum_len += cycle_lengths[k];
  }
  const Scalar ratio = sum_f / sum_len;
  Scalar ss(0);
  for (std::size_t k = 0; k < cycle_sums.size(); ++k) {
    const Scalar r = cycle_sums[k] - ratio * cycle_lengths[k];
    ss += r * r;
  }
  const auto count = Scalar(cycle_sums.size());
  out.std_error = sqrt(ss * count / (count - Scalar(1))) / sum_len;
  return out;
}

/// Long-run occupancy of the semi-Markov process: mu_i t_i / sum_j mu_j t_j.
template <typename Scalar>
typename DiscreteChain<Scalar>::Vector semi_markov_occupancy(const DiscreteChain<Scalar>& chain) {
  const auto mu = invariant_mu_visits(chain);
  const auto weighted = mu.cwiseProduct(chain.jump_time_means).eval();
  const Scalar total = weighted.sum();
  if (!(total > Scalar(0))) throw DegenerateTime("all jump-time means are zero");
  return weighted / total;
}

/// Level chain on m states: the reactant 0 steps to 1, the product m-1
/// restarts at 0, interior states step left with probability p_left.
template <typename Scalar = double>
DiscreteChain<Scalar> nearest_neighbor_chain(int m, Scalar p_left = Scalar(0.5), Scalar jump_time = Scalar(1)) {
  if (m < 2) throw InvalidArgument("nearest_neighbor_chain: m must be >= 2");
  DiscreteChain<Scalar> chain;
  chain.kernel = DiscreteChain<Scalar>::Matrix::Zero(m, m);
  chain.kernel(0, 1) = Scalar(1);
  for (int i = 1; i + 1 < m; ++i) {
    chain.kernel(i, i - 1) = p_left;
    chain.kernel(i, i + 1) = Scalar(1) - p_left;
  }
  chain.kernel(m - 1, 0) = Scalar(1);
  chain.reactant = 0;
  chain.product = m - 1;
  chain.rho = DiscreteChain<Scalar>::Vector::Zero(m);
  chain.rho(0) = Scalar(1);
  chain.jump_time_means = DiscreteChain<Scalar>::Vector::Constant(m, jump_time);
  chain.jump_time_means(m - 1) = Scalar(0);
  return chain;
}

}  // namespace exm

#endif  // EXMILE_MARKOV_HPP
