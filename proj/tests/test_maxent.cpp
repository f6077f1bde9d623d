#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mphs/error.hpp"
#include "mphs/maxent.hpp"
#include "oracles.hpp"

using namespace mphs;

namespace {

struct SpinSystem {
  AccessibleSetPtr set;
  Eigen::MatrixXd J;
  double h;
  Eigen::MatrixXd F;  // energy, magnetization recomputed from the words
};

SpinSystem spin_system(oracle::Rng& rng, int L) {
  SpinSystem s;
  s.J = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j) s.J(i, j) = s.J(j, i) = oracle::uniform(rng, -1, 1);
  s.h = oracle::uniform(rng, -1, 1);
  const auto coupling = functions::quadratic_coupling("coupling", s.J);
  const auto mag = functions::symbol_value_sum("magnetization");
  s.set = std::make_shared<const AccessibleSet>(accessible_set(
      make_alphabet(Alphabet::spins()), {functions::linear_combination("energy", {coupling, mag}, {1.0, -s.h}), mag}, {},
      {std::size_t(L), std::size_t(L)}));
  s.F.resize(Eigen::Index(s.set->size()), 2);
  for (std::size_t i = 0; i < s.set->size(); ++i) {
    const auto v = s.set->microstate(i).values();
    double m = 0;
    for (double x : v) m += x;
    s.F(Eigen::Index(i), 0) = oracle::spin_energy(v, s.J, s.h);
    s.F(Eigen::Index(i), 1) = m;
  }
  return s;
}

std::vector<double> probs(const Distribution& d) { return {d.probabilities().begin(), d.probabilities().end()}; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an exception");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("information constant and base") {
  const auto bits = InfoConstant::from_base(2.0);
  CHECK(bits.k() == doctest::Approx(1.0 / std::numbers::ln2).epsilon(1e-15));
  CHECK(bits.base() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(kind_of([] { InfoConstant(0.0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { InfoConstant::from_base(1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("coin toss entropies in bits") {
  const auto bits = InfoConstant::from_base(2.0);
  CHECK(std::abs(statistical_entropy(Distribution::uniform(4), bits) - 2.0) <= 1e-12);
  const auto skewed = Distribution::from_probabilities({0.5, 0.25, 0.125, 0.125});
  CHECK(std::abs(statistical_entropy(skewed, bits) - 1.75) <= 1e-12);
  CHECK(surprisal(skewed, 0, bits) == doctest::Approx(1.0));
  CHECK(surprisal(skewed, 3, bits) == doctest::Approx(3.0));
}

TEST_CASE("distribution validation and zero-probability handling") {
  CHECK(kind_of([] { Distribution::from_probabilities({0.5, 0.6}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { Distribution::from_probabilities({1.5, -0.5}); }) == ErrorKind::InvalidArgument);
  const auto d = Distribution::from_probabilities({1.0, 0.0});
  CHECK(statistical_entropy(d, InfoConstant(1.0)) == 0.0);
  CHECK(kind_of([&] { surprisal(d, 1, InfoConstant(1.0)); }) == ErrorKind::ZeroProbability);
}

TEST_CASE("log-sum-exp and normalization survive extreme exponents") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small{-1e5, -1e5 - std::log(3.0)};
  CHECK(log_sum_exp(small) == doctest::Approx(-1e5 + std::log(4.0 / 3.0)));
  const auto d = Distribution::from_log_weights(std::vector<double>{-800.0, -800.0 + std::log(3.0)});
  CHECK(d.probability(0) == doctest::Approx(0.25));
  CHECK(std::isinf(log_sum_exp(std::vector<double>{})));
}

TEST_CASE("pairwise summation is exact on representable partial sums") {
  std::vector<double> v(1 << 12, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(409.6).epsilon(1e-15));
}

TEST_CASE("canonical spin ring recovers the bath multiplier") {
  oracle::Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = spin_system(rng, oracle::uniform_int(rng, 2, 8));
    const double T = oracle::uniform(rng, 0.3, 4.0);
    const auto p = oracle::boltzmann(s.F.leftCols(1), {-1.0 / T}, 1.0);
    double E = 0;
    for (std::size_t i = 0; i < p.size(); ++i) E += p[i] * s.F(Eigen::Index(i), 0);
    const auto sol = solve_multipliers(s.set, LabeledVector{{"energy", E}}, InfoConstant(1.0));
    CHECK(sol.lambdas.at("energy") == doctest::Approx(-1.0 / T).epsilon(1e-8));
    CHECK(oracle::total_variation(probs(sol.distribution), p) < 1e-10);
    CHECK(sol.entropy == doctest::Approx(oracle::entropy(p, 1.0)).epsilon(1e-10));
    CHECK(intensive_quantities(sol).at("T") == doctest::Approx(T).epsilon(1e-8));
  }
}

TEST_CASE("solver agrees with the primal projected-gradient oracle") {
  oracle::Rng rng(12);
  for (int trial = 0; trial < 6; ++trial) {
    const auto s = spin_system(rng, oracle::uniform_int(rng, 3, 9));
    const auto q = oracle::random_positive_distribution(rng, s.set->size());
    const Eigen::MatrixXd A = s.F.transpose();
    const Eigen::VectorXd b = A * Eigen::Map<const Eigen::VectorXd>(q.data(), Eigen::Index(q.size()));
    const auto expected = oracle::projected_gradient_maxent(A, q);
    const auto sol = solve_multipliers(s.set, LabeledVector{{"energy", b(0)}, {"magnetization", b(1)}}, InfoConstant(1.0));
    CHECK(oracle::total_variation(probs(sol.distribution), expected) < 1e-7);
  }
}

TEST_CASE("solver iterates stay convex and the decrement shrinks") {
  oracle::Rng rng(13);
  const auto s = spin_system(rng, 8);
  const auto q = oracle::random_positive_distribution(rng, s.set->size(), 6.0);
  const Eigen::VectorXd b = s.F.transpose() * Eigen::Map<const Eigen::VectorXd>(q.data(), Eigen::Index(q.size()));
  const auto sol = solve_multipliers(s.set, LabeledVector{{"energy", b(0)}, {"magnetization", b(1)}}, InfoConstant(1.0));
  REQUIRE_FALSE(sol.trace.empty());
  for (const auto& it : sol.trace) CHECK(it.min_eigenvalue >= -1e-12);
  for (std::size_t i = 1; i < sol.trace.size(); ++i)
    if (!sol.trace[i].bisection && !sol.trace[i - 1].bisection && sol.trace[i - 1].step == 1.0)
      CHECK(sol.trace[i].decrement <= sol.trace[i - 1].decrement * (1 + 1e-9) + 1e-30);
  for (double r : sol.residuals.values()) CHECK(r <= 1e-10 * std::max(1.0, std::abs(b(0)) + std::abs(b(1))));
}

TEST_CASE("Legendre identity and multiplier gradient on random instances") {
  oracle::Rng rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = spin_system(rng, oracle::uniform_int(rng, 3, 7));
    const double k = trial % 2 ? 1.0 : 1.0 / std::numbers::ln2;
    const auto q = oracle::random_positive_distribution(rng, s.set->size(), 2.0);
    const Eigen::VectorXd b = s.F.transpose() * Eigen::Map<const Eigen::VectorXd>(q.data(), Eigen::Index(q.size()));
    const auto sol = solve_multipliers(s.set, LabeledVector{{"energy", b(0)}, {"magnetization", b(1)}}, InfoConstant(k));
    const double S = oracle::entropy(probs(sol.distribution), k);
    const double legendre = sol.log_partition - sol.lambdas.at("energy") * b(0) - sol.lambdas.at("magnetization") * b(1);
    CHECK(std::abs(S - legendre) <= 1e-10 * S);
    CHECK(thermodynamic_entropy(sol) == doctest::Approx(S).epsilon(1e-10));
    const auto report = multiplier_gradient_check(entropy_function(s.set, InfoConstant(k)), sol);
    CHECK(report.passed);
    CHECK(report.entries.size() == 2);
  }
}

TEST_CASE("solution_from_multipliers round-trips through solve_multipliers") {
  oracle::Rng rng(15);
  const auto s = spin_system(rng, 6);
  const LabeledVector lambdas{{"energy", -0.7}, {"magnetization", 0.3}};
  const auto forward = solution_from_multipliers(s.set, lambdas, InfoConstant(1.0));
  const auto back = solve_multipliers(s.set, forward.targets, InfoConstant(1.0));
  CHECK(back.lambdas.at("energy") == doctest::Approx(-0.7).epsilon(1e-9));
  CHECK(back.lambdas.at("magnetization") == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(log_partition(*s.set, lambdas, InfoConstant(1.0)) == doctest::Approx(forward.log_partition));
}

TEST_CASE("solver failure modes") {
  oracle::Rng rng(16);
  const auto s = spin_system(rng, 4);
  double emin = s.F.col(0).minCoeff(), emax = s.F.col(0).maxCoeff();
  CHECK(kind_of([&] { solve_multipliers(s.set, LabeledVector{{"energy", emax}}, InfoConstant(1.0)); }) ==
        ErrorKind::TargetOutOfRange);
  CHECK(kind_of([&] { solve_multipliers(s.set, LabeledVector{{"energy", emin - 1}}, InfoConstant(1.0)); }) ==
        ErrorKind::TargetOutOfRange);

  auto dup = std::make_shared<const AccessibleSet>(accessible_set(
      make_alphabet(Alphabet::spins()), {functions::symbol_value_sum("a"), functions::linear_combination("b", {functions::symbol_value_sum("a")}, {2.0})},
      {}, {3, 3}));
  CHECK(kind_of([&] { solve_multipliers(dup, LabeledVector{{"a", 0.5}, {"b", 1.0}}, InfoConstant(1.0)); }) ==
        ErrorKind::SingularCovariance);

  auto constant = std::make_shared<const AccessibleSet>(
      accessible_set(make_alphabet(Alphabet::spins()), {functions::word_length("n")}, {}, {3, 3}));
  const auto sol = solve_multipliers(constant, LabeledVector{{"n", 3.0}}, InfoConstant(1.0));
  CHECK(sol.lambdas.at("n") == 0.0);
  CHECK(sol.entropy == doctest::Approx(std::log(8.0)));
  CHECK(kind_of([&] { solve_multipliers(constant, LabeledVector{{"n", 2.0}}, InfoConstant(1.0)); }) ==
        ErrorKind::TargetOutOfRange);
  CHECK(kind_of([&] { intensive_quantities(sol); }) == ErrorKind::UndefinedTemperature);
}

TEST_CASE("uniform distribution is the maximum without constraints") {
  oracle::Rng rng(17);
  const std::size_t n = 37;
  const double S_uniform = statistical_entropy(Distribution::uniform(n), InfoConstant(1.0));
  CHECK(S_uniform == doctest::Approx(std::log(double(n))));
  for (int i = 0; i < 200; ++i) {
    const auto q = oracle::random_positive_distribution(rng, n, 1.0);
    CHECK(statistical_entropy(Distribution::from_probabilities(q), InfoConstant(1.0)) <= S_uniform + 1e-12);
  }
}
