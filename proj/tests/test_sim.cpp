#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mphs/error.hpp"
#include "mphs/sim.hpp"
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

std::shared_ptr<const EnergyFunction> two_state_energy() {
  const auto a = make_alphabet(Alphabet("level", {{"ground", 0}, {"excited", 1}}));
  auto set = std::make_shared<const AccessibleSet>(accessible_set(a, {functions::weighted_sum("energy", {0, 1})}, {}, {1, 1}));
  return std::make_shared<const EnergyFunction>(
      std::make_shared<EnumeratedEntropyModel>(set, "energy", std::vector<std::string>{}, InfoConstant(1.0)));
}

double two_state_entropy(double T) { return std::log1p(std::exp(-1 / T)) + 1 / (1 + std::exp(1 / T)) / T; }

PhsModel two_state_model() { return PhsModel(build_reversible({"S"}), Hamiltonian(two_state_energy())); }

PhsModel piston() {
  IdealGasModel m;
  m.N = 1;
  m.V = 1;
  m.m_atom = 1;
  m.h = 1;
  m.k = InfoConstant(1.0);
  auto fn = std::make_shared<const EnergyFunction>(
      std::make_shared<IdealGasEntropyModel>(m, std::vector<std::string>{"volume"}));
  return PhsModel(build_reversible({"S", "volume"}), Hamiltonian(fn));
}

Eigen::VectorXd piston_state(const PhsModel& model, double T) {
  IdealGasModel m;
  m.N = 1;
  m.V = 1;
  m.m_atom = 1;
  m.h = 1;
  m.k = InfoConstant(1.0);
  Eigen::VectorXd x(2);
  x << ideal_gas_state(m, T).S, 1.0;
  CHECK(model.hamiltonian().evaluate(x).temperature == doctest::Approx(T).epsilon(1e-10));
  return x;
}

PhsModel resistor_circuit() {
  InterconnectionBlocks b;
  b.K = Eigen::MatrixXd::Ones(1, 1);
  return PhsModel(build_irreversible(b, laws::linear_resistor({1.0}), {{"q"}, {"i"}, {}}),
                  Hamiltonian(two_state_energy(), {"q"}, Eigen::MatrixXd::Ones(1, 1)));
}

InputSignal expansion() {
  InputSignal s;
  s.set_constant("ext:volume", -1.0);
  return s;
}

}  // namespace

TEST_CASE("input signals") {
  InputSignal s;
  s.set_samples("a", {0.0, 1.0, 2.0}, {0.0, 2.0, 0.0});
  s.set_constant("b", 3.0);
  const std::vector<std::string> ports{"a", "b", "c"};
  const auto u = s.at(ports, 0.5);
  CHECK(u(0) == 1.0);
  CHECK(u(1) == 3.0);
  CHECK(u(2) == 0.0);
  CHECK(s.at(ports, 5.0)(0) == 0.0);
  CHECK_NOTHROW(s.validate(ports, 2.0));
  CHECK(kind_of([&] { s.validate(ports, 3.0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { s.validate({"a"}, 1.0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { s.set_samples("d", {0.0, 0.0}, {1.0, 1.0}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { s.set_constant("d", NAN); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("run rejects bad horizons") {
  const auto model = two_state_model();
  Eigen::VectorXd x0(1);
  x0 << two_state_entropy(1.0);
  CHECK(kind_of([&] { run(model, {}, x0, 1.0, 0.0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { run(model, {}, x0, -1.0, 0.1); }) == ErrorKind::InvalidArgument);
  const auto ledger = run(model, {}, x0, 0.25, 0.1);
  REQUIRE(ledger.rows.size() == 4);
  CHECK(ledger.rows.back().time == 0.25);
}

TEST_CASE("adiabatic expansion keeps T V^(2/3) and the energy defect is second order") {
  const auto model = piston();
  const auto x0 = piston_state(model, 2.0);
  std::vector<double> defects;
  for (double dt : {0.02, 0.01, 0.005}) {
    const auto ledger = run(model, expansion(), x0, 1.0, dt);
    const double c0 = ledger.rows.front().efforts(0) * std::pow(ledger.rows.front().state(1), 2.0 / 3.0);
    for (const auto& r : ledger.rows) {
      CHECK(std::abs(r.efforts(0) * std::pow(r.state(1), 2.0 / 3.0) / c0 - 1) <= 1e-4);
      CHECK(r.state(0) == x0(0));
      CHECK(std::abs(r.balance_defect) <= 1e-14 * std::max(1.0, r.power_scale));
    }
    CHECK(ledger.rows.back().state(1) == doctest::Approx(2.0).epsilon(1e-12));
    // the gas does work -P dV on the piston: E drops as V grows
    CHECK(ledger.rows.back().energy < ledger.rows.front().energy);
    defects.push_back(ledger.energy_balance_defect());
  }
  for (std::size_t i = 1; i < defects.size(); ++i) {
    const double order = std::log2(defects[i - 1] / defects[i]);
    CHECK(order >= 1.0);
    CHECK(order == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("resistor heating: entropy rises, energy is kept") {
  const auto model = resistor_circuit();
  Eigen::VectorXd x0(2);
  x0 << two_state_entropy(0.5), 0.6;
  const auto ledger = run(model, {}, x0, 2.0, 0.002);
  CHECK(ledger.min_sigma_i() >= -1e-14);
  for (std::size_t i = 1; i < ledger.rows.size(); ++i) CHECK(ledger.rows[i].state(0) >= ledger.rows[i - 1].state(0));
  CHECK(ledger.rows.back().state(1) == doctest::Approx(0.6 * std::exp(-2.0)).epsilon(1e-4));
  const double E0 = ledger.rows.front().energy;
  CHECK(std::abs(ledger.rows.back().energy - E0) <= 5e-6 * std::abs(E0));
  CHECK(ledger.max_relative_power_defect() <= 1e-9);
  CHECK(ledger.entropy_production == doctest::Approx(ledger.rows.back().state(0) - x0(0)).epsilon(1e-6));
}

TEST_CASE("thermal coupling drives two systems to a common temperature") {
  const auto a = two_state_model(), b = two_state_model();
  Eigen::VectorXd xa(1), xb(1);
  xa << two_state_entropy(1.0);
  xb << two_state_entropy(3.0);
  const auto r = couple_and_equilibrate(a, xa, b, xb, 1.0, 0.5, 1e-3);
  CHECK(r.min_flow_gap_product >= 0.0);
  CHECK(r.entropy_nondecreasing);
  CHECK(r.energy_drift <= 1e-4);
  for (double q : r.heat_flow) CHECK(q <= 0.0);  // B is hotter
  CHECK(r.final_gap < 2.0);
  CHECK(r.a.rows.back().efforts(0) > 1.0);
  CHECK(r.b.rows.back().efforts(0) < 3.0);

  CHECK(kind_of([&] { couple_and_equilibrate(a, xa, b, xb, -1.0, 1.0, 0.1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("a step that cannot stay in the domain is rejected after the halvings") {
  const auto model = two_state_model();
  Eigen::VectorXd x0(1);
  x0 << two_state_entropy(3.0);
  // entropy inflow pushes S past its maximum ln 2
  Eigen::VectorXd u(1);
  u << -1.0;
  try {
    step(model, x0, u, 0.1);
    FAIL("expected StateOutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StateOutOfDomain);
    CHECK(std::string(e.what()).find("halvings") != std::string::npos);
  }
  const auto ok = step(model, x0, u, 1e-4);
  CHECK(ok.x(0) == doctest::Approx(x0(0) + 1e-4));
}

TEST_CASE("ledger CSV is deterministic") {
  const auto model = piston();
  const auto x0 = piston_state(model, 1.5);
  std::ostringstream a, b;
  run(model, expansion(), x0, 0.1, 0.01).write_csv(a);
  run(model, expansion(), x0, 0.1, 0.01).write_csv(b);
  CHECK(a.str() == b.str());
  const auto text = a.str();
  CHECK(text.rfind("time,S,volume,e[S],e[volume],P_s,P_d,P_ext,sigma_i,sigma_ext,balance_defect\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 12);
}
