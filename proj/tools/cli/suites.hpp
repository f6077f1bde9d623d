// Invariant suites run by `verify`: builtin randomized instances or the
// instance described by a scenario.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cli/scenario.hpp"

namespace mphs::cli {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;  // worst case or first failure
};

/// legendre, gradient, skew, maximality, ideal-gas-law
const std::vector<std::string>& builtin_suites();
bool is_builtin_suite(const std::string& name);

/// Randomized builtin suite; throws InvalidArgument for an unknown name.
CheckResult run_builtin(const std::string& name, std::uint64_t seed);

/// Suites named in the scenario's verify block (or all applicable ones).
std::vector<CheckResult> run_scenario_suites(const Scenario& s);

/// Skew check of an arbitrary square matrix: max |S + S^T| with its location
/// and the quadratic form on random vectors.
CheckResult check_skew_matrix(const Eigen::MatrixXd& S, const std::string& name, std::uint64_t seed);

}  // namespace mphs::cli
