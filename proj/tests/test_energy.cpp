#include <doctest.h>

#include <cmath>

#include "mphs/energy.hpp"
#include "mphs/error.hpp"
#include "oracles.hpp"

using namespace mphs;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an exception");
  return ErrorKind::InvalidArgument;
}

IdealGasModel unit_gas(bool gibbs = false) {
  IdealGasModel m;
  m.N = 3;
  m.V = 2;
  m.m_atom = 1;
  m.h = 1;
  m.k = InfoConstant(1.0);
  m.gibbs_correction = gibbs;
  return m;
}

AccessibleSetPtr two_level() {
  const auto a = make_alphabet(Alphabet("level", {{"ground", 0}, {"excited", 1}}));
  return std::make_shared<const AccessibleSet>(accessible_set(a, {functions::weighted_sum("energy", {0, 1})}, {}, {1, 1}));
}

// Two-level system: E = 1 / (1 + exp(1/T)), S = ln(1 + exp(-1/T)) + E / T.
double two_level_entropy(double T) { return std::log1p(std::exp(-1 / T)) + 1 / (1 + std::exp(1 / T)) / T; }
double two_level_energy(double T) { return 1 / (1 + std::exp(1 / T)); }

}  // namespace

TEST_CASE("ideal gas energy function inverts the entropy") {
  auto model = std::make_shared<IdealGasEntropyModel>(unit_gas(), std::vector<std::string>{"volume"});
  const EnergyFunction fn(model);
  for (double T : {0.1, 1.0, 7.5, 300.0}) {
    const auto ref = oracle::ideal_gas(3, 2, 1, 1, 1, T, false);
    const LabeledVector extras{{"volume", 2.0}};
    CHECK(entropy_of_energy(*model, ref.energy, extras) == doctest::Approx(ref.entropy).epsilon(1e-12));
    const double E = fn.energy_of_entropy(ref.entropy, extras);
    CHECK(E == doctest::Approx(ref.energy).epsilon(1e-10));
    const auto ev = fn.evaluate(MacroState{ref.entropy, extras});
    CHECK(ev.temperature == doctest::Approx(T).epsilon(1e-10));
    REQUIRE(ev.efforts.size() == 2);
    CHECK(ev.efforts(0) == doctest::Approx(T).epsilon(1e-10));
    CHECK(ev.efforts(1) == doctest::Approx(-ref.pressure).epsilon(1e-10));
  }
}

TEST_CASE("ideal gas efforts equal finite differences of E(S, V)") {
  auto model = std::make_shared<IdealGasEntropyModel>(unit_gas(true), std::vector<std::string>{"count", "volume"});
  const EnergyFunction fn(model);
  const MacroState x{5.0, LabeledVector{{"count", 3.0}, {"volume", 2.0}}};
  const auto e = effort_vector(fn, x);
  const double h = 1e-5;
  auto E = [&](double dS, double dN, double dV) {
    return fn(MacroState{x.entropy + dS, LabeledVector{{"count", 3.0 + dN}, {"volume", 2.0 + dV}}});
  };
  CHECK(e(0) == doctest::Approx((E(h, 0, 0) - E(-h, 0, 0)) / (2 * h)).epsilon(1e-7));
  CHECK(e(1) == doctest::Approx((E(0, h, 0) - E(0, -h, 0)) / (2 * h)).epsilon(1e-6));
  CHECK(e(2) == doctest::Approx((E(0, 0, h) - E(0, 0, -h)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("homogeneity of the energy") {
  // one mole of argon; with the k ln N! term the energy is homogeneous up to
  // the Stirling remainder, which is negligible at this size
  IdealGasModel argon;
  argon.N = 6.02214076e23;
  argon.V = 0.0224;
  argon.m_atom = 6.6335209e-26;
  argon.gibbs_correction = true;
  const double S = ideal_gas_state(argon, 300.0).S;
  const MacroState x{S, LabeledVector{{"count", argon.N}, {"volume", argon.V}}};
  auto gibbs = std::make_shared<IdealGasEntropyModel>(argon, std::vector<std::string>{"count", "volume"});
  for (double gamma : {0.5, 2.0, 10.0}) {
    const auto r = homogeneity_check(EnergyFunction(gibbs), x, gamma);
    CHECK(r.declared_homogeneous);
    CHECK(r.passed);
    CHECK(r.deviation <= 1e-8);
  }
  argon.gibbs_correction = false;
  const MacroState y{ideal_gas_state(argon, 300.0).S, x.extras};
  auto plain = std::make_shared<IdealGasEntropyModel>(argon, std::vector<std::string>{"count", "volume"});
  const auto r = homogeneity_check(EnergyFunction(plain), y, 2.0);
  CHECK_FALSE(r.declared_homogeneous);
  CHECK_FALSE(r.passed);
  CHECK(r.deviation > 1e-3);

  // a small system shows the finite-size defect of ln N!
  auto small = std::make_shared<IdealGasEntropyModel>(unit_gas(true), std::vector<std::string>{"count", "volume"});
  const auto s = homogeneity_check(EnergyFunction(small), MacroState{5.0, LabeledVector{{"count", 3.0}, {"volume", 2.0}}}, 2.0);
  CHECK(s.deviation > 1e-3);
}

TEST_CASE("enumerated two-level energy function") {
  auto model = std::make_shared<EnumeratedEntropyModel>(two_level(), "energy", std::vector<std::string>{}, InfoConstant(1.0));
  const EnergyFunction fn(model);
  for (double T : {0.2, 1.0, 3.0, 20.0}) {
    const double S = two_level_entropy(T);
    CHECK(fn.energy_of_entropy(S, {}) == doctest::Approx(two_level_energy(T)).epsilon(1e-9));
    CHECK(fn.evaluate(MacroState{S, {}}).temperature == doctest::Approx(T).epsilon(1e-7));
  }
  CHECK(model->entropy_peak({}).has_value());
  CHECK(model->entropy_peak({})->second == doctest::Approx(std::log(2.0)));
  CHECK(kind_of([&] { fn.energy_of_entropy(std::log(2.0) + 1e-3, {}); }) == ErrorKind::EntropyOutOfRange);
  CHECK(kind_of([&] { fn.evaluate(MacroState{std::log(2.0), {}}); }) == ErrorKind::UndefinedTemperature);
  CHECK(kind_of([&] { fn.energy_of_entropy(-0.1, {}); }) == ErrorKind::EntropyOutOfRange);

  const EnergyFunction ambiguous(model, Branch::unspecified);
  CHECK(kind_of([&] { ambiguous.energy_of_entropy(0.5, {}); }) == ErrorKind::BranchAmbiguity);
}

TEST_CASE("enumerated model with an extra state quantity") {
  // spins on 4 sites: energy = -sum of neighbour products, magnetization kept as an extra
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 3; ++i) J(i, i + 1) = J(i + 1, i) = 1.0;
  auto set = std::make_shared<const AccessibleSet>(accessible_set(
      make_alphabet(Alphabet::spins()), {functions::quadratic_coupling("energy", J), functions::symbol_value_sum("M")}, {},
      {4, 4}));
  auto model = std::make_shared<EnumeratedEntropyModel>(set, "energy", std::vector<std::string>{"M"}, InfoConstant(1.0));
  const EnergyFunction fn(model);
  const LabeledVector extras{{"M", 0.5}};
  const auto point = model->evaluate(-1.0, extras);
  const double E = fn.energy_of_entropy(point.entropy, extras);
  CHECK(E == doctest::Approx(-1.0).epsilon(1e-9));
  const auto ev = fn.evaluate(MacroState{point.entropy, extras});
  CHECK(ev.efforts(0) == doctest::Approx(-1 / point.lambda_energy).epsilon(1e-8));
  CHECK(ev.efforts(1) == doctest::Approx(-point.lambda_extra.at("M") / point.lambda_energy).epsilon(1e-7));
}
