// Reference computations used by the tests. Nothing here calls the solver:
// distributions are built by brute force or found by a primal ascent in
// probability space, and the ideal gas is differentiated in 50-digit
// arithmetic.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// -k sum p ln p accumulated in long double.
inline double entropy(const std::vector<double>& p, double k) {
  long double s = 0.0L;
  for (double x : p)
    if (x > 0.0) s -= static_cast<long double>(x) * std::log(static_cast<long double>(x));
  return static_cast<double>(k * s);
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(static_cast<long double>(p[i]) - q[i]);
  return static_cast<double>(0.5L * s);
}

/// exp(sum_j lambda_j F_j(m) / k), normalized, in long double. F is (states x functions).
inline std::vector<double> boltzmann(const Eigen::MatrixXd& F, const std::vector<double>& lambda, double k) {
  const auto n = F.rows();
  std::vector<long double> a(static_cast<std::size_t>(n));
  long double amax = -INFINITY;
  for (Eigen::Index i = 0; i < n; ++i) {
    long double s = 0.0L;
    for (Eigen::Index j = 0; j < F.cols(); ++j) s += static_cast<long double>(lambda[static_cast<std::size_t>(j)]) * F(i, j);
    a[static_cast<std::size_t>(i)] = s / k;
    amax = std::max(amax, a[static_cast<std::size_t>(i)]);
  }
  long double z = 0.0L;
  for (auto& x : a) z += (x = std::exp(x - amax));
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = static_cast<double>(a[i] / z);
  return p;
}

/// Ising-type energy -1/2 s^T J s - h sum s, evaluated directly.
inline double spin_energy(const std::vector<double>& s, const Eigen::MatrixXd& J, double h) {
  double e = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) e -= 0.5 * J(Eigen::Index(i), Eigen::Index(j)) * s[i] * s[j];
    e -= h * s[i];
  }
  return e;
}

/// Maximizes -sum p ln p over {p > 0 : A p = A q0} starting from the feasible
/// point q0 > 0 (A includes no normalization row; it is added here). Each
/// iteration projects the entropy gradient onto the constraint null space in
/// the metric diag(p) and takes a fraction-to-boundary, backtracked step.
inline std::vector<double> projected_gradient_maxent(const Eigen::MatrixXd& A_in, const std::vector<double>& q0,
                                                     int max_iter = 500) {
  const auto n = static_cast<Eigen::Index>(q0.size());
  Eigen::MatrixXd A(A_in.rows() + 1, n);
  A.row(0).setOnes();
  A.bottomRows(A_in.rows()) = A_in;
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(q0.data(), n);
  auto objective = [](const Eigen::VectorXd& x) {
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < x.size(); ++i) s -= static_cast<long double>(x(i)) * std::log(static_cast<long double>(x(i)));
    return s;
  };
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = -std::log(p(i)) - 1.0;
    const Eigen::MatrixXd AD = A * p.asDiagonal();
    const Eigen::MatrixXd M = AD * A.transpose();
    const Eigen::VectorXd nu = M.ldlt().solve(AD * g);
    const Eigen::VectorXd d = p.cwiseProduct(g - A.transpose() * nu);
    const double decrement = g.dot(d);
    if (!(decrement > 1e-28)) break;
    double t = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (d(i) < 0.0) t = std::min(t, 0.99 * p(i) / -d(i));
    const long double f0 = objective(p);
    Eigen::VectorXd next = p + t * d;
    while (objective(next) < f0 + 1e-4L * t * decrement && t > 1e-12) {
      t *= 0.5;
      next = p + t * d;
    }
    p = next;
    if (t <= 1e-12) break;
  }
  return std::vector<double>(p.data(), p.data() + n);
}

/// Strictly positive random distribution with a wide spread of magnitudes.
inline std::vector<double> random_positive_distribution(Rng& rng, std::size_t n, double spread = 4.0) {
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) s += (x = std::exp(uniform(rng, -spread, spread)));
  for (auto& x : w) x /= s;
  return w;
}

using Big = boost::multiprecision::cpp_bin_float_50;

struct IdealGas {
  double log_partition;  // k ln Z
  double energy;
  double entropy;
  double pressure;
};

/// k ln Z(T, V) = k [N ln V + (3N/2) ln(2 pi m k T / h^2)] - k ln N! (optional),
/// with E = k T^2 d ln Z / dT and P = k T d ln Z / dV taken by central
/// differences in 50-digit arithmetic.
inline IdealGas ideal_gas(double N_, double V_, double m_, double h_, double k_, double T_, bool gibbs) {
  const Big N(N_), V(V_), m(m_), h(h_), k(k_), T(T_);
  const Big pi = boost::math::constants::pi<Big>();
  auto lnZ = [&](const Big& t, const Big& v) {
    Big r = N * log(v) + Big(1.5) * N * log(2 * pi * m * k * t / (h * h));
    if (gibbs) r -= boost::math::lgamma(Big(N + 1));
    return r;
  };
  const Big dT = T * Big("1e-20"), dV = V * Big("1e-20");
  const Big dlnZ_dT = (lnZ(T + dT, V) - lnZ(T - dT, V)) / (2 * dT);
  const Big dlnZ_dV = (lnZ(T, V + dV) - lnZ(T, V - dV)) / (2 * dV);
  const Big E = k * T * T * dlnZ_dT;
  IdealGas out;
  out.log_partition = static_cast<double>(k * lnZ(T, V));
  out.energy = static_cast<double>(E);
  out.entropy = static_cast<double>(k * lnZ(T, V) + E / T);
  out.pressure = static_cast<double>(k * T * dlnZ_dV);
  return out;
}

}  // namespace oracle
