// Statistical entropy, partition function and the maximum-entropy
// (Boltzmann) distribution under mean-value constraints.
//
// Sign convention: weights are exp(sum_i lambda_i F_i(m) / k) and
// lambda_i = -dS/dF_i, so a canonical system has lambda_energy = -1/T.
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mphs/labeled.hpp"
#include "mphs/microstate.hpp"

namespace mphs {

inline constexpr double kBoltzmann = 1.380649e-23;  // J/K, exact SI value
inline constexpr double kPlanck = 6.62607015e-34;   // J s, exact SI value

/// Entropy unit constant k > 0; equivalent to the question base b = exp(1/k).
class InfoConstant {
 public:
  explicit InfoConstant(double k = 1.0);
  /// k = 1 / ln(b), b > 1. Base 2 measures entropy in bits.
  static InfoConstant from_base(double base);

  double k() const noexcept { return k_; }
  double base() const;

 private:
  double k_;
};

/// Probability vector aligned with an accessible set. Log-probabilities are
/// kept alongside so tiny probabilities keep their precision.
class Distribution {
 public:
  /// Throws InvalidArgument on negative entries or a sum off 1 by > 1e-12.
  static Distribution from_probabilities(std::vector<double> probs);
  /// Normalizes exp(log_weights) with a max shift.
  static Distribution from_log_weights(std::span<const double> log_weights);
  static Distribution uniform(std::size_t size);

  std::size_t size() const noexcept { return probs_.size(); }
  double probability(std::size_t i) const { return probs_.at(i); }
  double log_probability(std::size_t i) const { return log_probs_.at(i); }
  std::span<const double> probabilities() const noexcept { return probs_; }
  std::span<const double> log_probabilities() const noexcept { return log_probs_; }

  double expectation(std::span<const double> values) const;

 private:
  std::vector<double> probs_;
  std::vector<double> log_probs_;
};

/// Deterministic tree summation; bit-stable for a given input order.
double pairwise_sum(std::span<const double> values);
/// ln sum exp(x) with max shift; -inf for an empty span.
double log_sum_exp(std::span<const double> values);

/// k ln(1/p(m)). Throws ZeroProbability when p(m) = 0.
double surprisal(const Distribution& p, std::size_t index, InfoConstant k);

/// -k sum p ln p with 0 ln 0 = 0.
double statistical_entropy(const Distribution& p, InfoConstant k);

/// k ln sum_m exp(sum_i lambda_i F_i(m) / k); lambdas are keyed by function label.
double log_partition(const AccessibleSet& set, const LabeledVector& lambdas, InfoConstant k);

Distribution boltzmann_distribution(const AccessibleSet& set, const LabeledVector& lambdas, InfoConstant k);

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 200;
  /// Warm start for the multipliers (missing labels start at 0).
  std::optional<LabeledVector> initial;
};

/// One solver iteration, recorded for diagnostics.
struct SolverIterate {
  double objective = 0.0;        // dual objective in natural units
  double max_residual = 0.0;     // scaled residual before the step
  double decrement = 0.0;        // Newton decrement squared; 0 for bisection sweeps
  double min_eigenvalue = 0.0;   // of the scaled covariance (Hessian)
  double step = 0.0;             // accepted damping factor
  bool bisection = false;
};

struct EquilibriumSolution {
  AccessibleSetPtr set;
  InfoConstant k;
  LabeledVector targets;
  LabeledVector lambdas;
  double log_partition = 0.0;  // k ln Z
  Distribution distribution = Distribution::uniform(1);
  double entropy = 0.0;
  LabeledVector expectations;
  LabeledVector residuals;  // |E[F_i] - target_i|
  int iterations = 0;
  std::vector<SolverIterate> trace;
};

/// Multipliers reproducing the target means, by damped Newton on the convex
/// dual k ln Z(lambda) - lambda . targets, falling back to coordinate-wise
/// bisection when the covariance Hessian is numerically singular.
///
/// Throws TargetOutOfRange when a target is at or beyond the attainable
/// extremes, SingularCovariance when free functions are affinely dependent on
/// the set, NoConvergence when max_iter is exhausted.
EquilibriumSolution solve_multipliers(AccessibleSetPtr set, const LabeledVector& targets, InfoConstant k,
                                      const SolverOptions& options = {});

/// The equilibrium for given multipliers; its targets are the resulting means.
EquilibriumSolution solution_from_multipliers(AccessibleSetPtr set, const LabeledVector& lambdas, InfoConstant k);

/// k ln Z - sum_i lambda_i target_i.
double thermodynamic_entropy(const EquilibriumSolution& sol);

using EntropyOfTargets = std::function<double(const LabeledVector&)>;

/// Entropy as a function of the targets, re-solving at every call.
EntropyOfTargets entropy_function(AccessibleSetPtr set, InfoConstant k, SolverOptions options = {});

struct GradientCheckEntry {
  std::string label;
  double finite_difference = 0.0;
  double minus_lambda = 0.0;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradientCheckReport {
  bool passed = true;
  std::vector<GradientCheckEntry> entries;
};

/// Central differences of the entropy w.r.t. each target, compared with
/// -lambda_i to 1e-4 relative. The step is h times the larger of |target| and
/// the half-range of the function on the set. Functions constant on the set
/// are skipped.
GradientCheckReport multiplier_gradient_check(const EntropyOfTargets& entropy, const EquilibriumSolution& sol,
                                              double h = 1e-5);

/// Which free labels play the energy, particle-count and volume roles.
struct IntensiveLabels {
  std::string energy = "energy";
  std::string count = "count";
  std::string volume = "volume";
};

/// {T, mu, P} from the multipliers: T = -1/lambda_e, mu = lambda_n T,
/// P = -lambda_v T. Other free labels appear as "T*lambda[<label>]".
/// Throws UndefinedTemperature when lambda_e is zero or absent.
std::map<std::string, double> intensive_quantities(const EquilibriumSolution& sol,
                                                   const IntensiveLabels& labels = {});

}  // namespace mphs
