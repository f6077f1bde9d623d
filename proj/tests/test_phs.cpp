#include <doctest.h>

#include <cmath>

#include "mphs/error.hpp"
#include "mphs/phs.hpp"
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

Eigen::MatrixXd random_matrix(oracle::Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = oracle::uniform(rng, -3, 3);
  return m;
}

Eigen::VectorXd random_vector(oracle::Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = oracle::uniform(rng, -1, 1) * std::pow(10.0, oracle::uniform(rng, -3, 3));
  return v;
}

std::shared_ptr<const EnergyFunction> unit_gas_energy(std::vector<std::string> extras) {
  IdealGasModel m;
  m.N = 1;
  m.V = 1;
  m.m_atom = 1;
  m.h = 1;
  m.k = InfoConstant(1.0);
  return std::make_shared<const EnergyFunction>(std::make_shared<IdealGasEntropyModel>(m, std::move(extras)));
}

}  // namespace

TEST_CASE("reversible matrix over (S, N, V) is [[0, -I], [I, 0]]") {
  const auto s = build_reversible({"S", "N", "V"});
  const auto& M = s.interconnection.matrix();
  REQUIRE(M.rows() == 6);
  REQUIRE(M.cols() == 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double expected = 0.0;
      if (i < 3 && j == i + 3) expected = -1.0;
      if (i >= 3 && j == i - 3) expected = 1.0;
      CHECK(M(i, j) == expected);
    }
  const auto& l = s.interconnection.layout();
  CHECK(l.storage == std::vector<std::string>{"S", "N", "V"});
  CHECK(l.external == std::vector<std::string>{"sigma_ext", "ext:N", "ext:V"});
  CHECK(kind_of([] { build_reversible({"V", "S"}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("assembly rejects non-skew and mis-sized matrices") {
  BlockLayout l;
  l.storage = {"a"};
  l.external = {"b"};
  Eigen::MatrixXd S(2, 2);
  S << 0, 1, -1, 0;
  CHECK_NOTHROW(InterconnectionMatrix::assemble(S, l));
  S(1, 0) = -0.9;
  try {
    InterconnectionMatrix::assemble(S, l);
    FAIL("expected NotSkewSymmetric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotSkewSymmetric);
    CHECK(std::string(e.what()).find("max |S + S^T| entry 0.09") != std::string::npos);
  }
  CHECK(kind_of([&] { InterconnectionMatrix::assemble(Eigen::MatrixXd::Zero(3, 3), l); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("power balance vanishes for every effort vector") {
  oracle::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index nx = oracle::uniform_int(rng, 0, 4), nw = oracle::uniform_int(rng, 1, 3), nu = oracle::uniform_int(rng, 0, 3);
    InterconnectionBlocks b;
    const Eigen::MatrixXd jx = random_matrix(rng, nx, nx), jy = random_matrix(rng, nu, nu);
    b.J_x = jx - jx.transpose();
    b.J_y = jy - jy.transpose();
    b.K = random_matrix(rng, nx, nw);
    b.G_x = random_matrix(rng, nx, nu);
    b.G_w = random_matrix(rng, nw, nu);
    for (const auto& s : {build_irreversible(b, laws::linear_resistor(std::vector<double>(nw, 1.0)), {}),
                          build_dissipative(b, laws::linear_resistor(std::vector<double>(nw, 1.0)), {})}) {
      CHECK(skew_defect(s.interconnection.matrix()) == 0.0);
      for (int i = 0; i < 200; ++i) {
        const Eigen::VectorXd e = random_vector(rng, s.interconnection.dim());
        const auto p = power_balance(s.interconnection, e);
        CHECK(std::abs(p.total) <= 1e-12 * e.squaredNorm());
        CHECK(std::abs(p.P_s + p.P_d + p.P_ext) <= 1e-12 * e.squaredNorm());
      }
    }
  }
}

TEST_CASE("irreversible layout routes dissipated power into the entropy row") {
  InterconnectionBlocks b;
  b.K = Eigen::MatrixXd::Ones(1, 1);
  const auto s = build_irreversible(b, laws::linear_resistor({2.0}), {{"q"}, {"i"}, {}});
  const auto& l = s.interconnection.layout();
  CHECK(l.storage == std::vector<std::string>{"S", "q"});
  CHECK(l.dissipative == std::vector<std::string>{"T_d", "i"});
  CHECK(l.external == std::vector<std::string>{"sigma_ext"});
  const auto& M = s.interconnection.matrix();
  // rows/cols: S q T_d i sigma_ext
  CHECK(M(0, 2) == -1.0);
  CHECK(M(0, 4) == -1.0);
  CHECK(M(2, 0) == 1.0);
  CHECK(M(1, 3) == -1.0);
  CHECK(M(3, 1) == 1.0);
  REQUIRE(s.converter.has_value());
}

TEST_CASE("converter law is lossless and produces entropy") {
  const auto conv = make_converter(laws::linear(Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.0}}));
  oracle::Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd w(3);
    w << oracle::uniform(rng, 0.1, 10), oracle::uniform(rng, -2, 2), oracle::uniform(rng, -2, 2);
    const auto out = conv(w);
    CHECK(std::abs(out.effort.dot(w)) <= 1e-12 * (1 + out.dissipated));
    CHECK(out.sigma_i >= 0.0);
    CHECK(out.sigma_i == doctest::Approx(out.dissipated / w(0)));
    CHECK(out.effort(0) == -out.sigma_i);
  }
  CHECK(kind_of([&] { conv(Eigen::Vector3d(0.0, 1.0, 1.0)); }) == ErrorKind::NonpositiveTemperature);
  CHECK(kind_of([&] { conv(Eigen::Vector2d(1.0, 1.0)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("dissipative law catalog") {
  CHECK(kind_of([] { laws::linear_resistor({-1.0}); }) == ErrorKind::PassivityViolation);
  CHECK(kind_of([] { laws::linear(Eigen::Matrix2d{{1.0, 0.0}, {0.0, -1.0}}); }) == ErrorKind::PassivityViolation);
  CHECK(kind_of([] { laws::linear(Eigen::Matrix2d{{1.0, 0.3}, {0.0, 1.0}}); }) == ErrorKind::InvalidArgument);
  const auto cubic = laws::polynomial(2, {0.0, 1.0, 0.0, 2.0});
  const Eigen::VectorXd z = cubic.z(Eigen::Vector2d(1.0, -2.0));
  CHECK(z(0) == 3.0);
  CHECK(z(1) == -18.0);
  // z(f) = -f is active: the converter refuses it
  const auto active = make_converter(laws::polynomial(1, {0.0, -1.0}));
  CHECK(kind_of([&] { active(Eigen::Vector2d(1.0, 0.5)); }) == ErrorKind::PassivityViolation);
}

TEST_CASE("algebraic loops through the dissipative ports are rejected") {
  InterconnectionBlocks b;
  b.K = Eigen::MatrixXd::Ones(1, 2);
  b.J_w = Eigen::Matrix2d{{0.0, 1.0}, {-1.0, 0.0}};
  auto s = build_irreversible(b, laws::linear_resistor({1.0, 1.0}), {{"q"}, {}, {}});
  Hamiltonian H(unit_gas_energy({}), {"q"}, Eigen::MatrixXd::Ones(1, 1));
  CHECK(kind_of([&] { PhsModel(std::move(s), std::move(H)); }) == ErrorKind::AlgebraicLoop);
}

TEST_CASE("storage labels must match the Hamiltonian") {
  auto s = build_reversible({"S", "volume"});
  Hamiltonian H(unit_gas_energy({}));
  CHECK(kind_of([&] { PhsModel(std::move(s), std::move(H)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("Hamiltonian gradient equals finite differences") {
  Eigen::Matrix2d Q{{2.0, 0.5}, {0.5, 1.0}};
  Hamiltonian H(unit_gas_energy({"volume"}), {"q", "p"}, Q);
  CHECK(H.labels() == std::vector<std::string>{"S", "volume", "q", "p"});
  Eigen::VectorXd x(4);
  x << 3.0, 1.5, 0.3, -0.7;
  const auto ev = H.evaluate(x);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    CHECK(ev.gradient(i) == doctest::Approx((H.evaluate(a).energy - H.evaluate(b).energy) / (2 * h)).epsilon(1e-7));
  }
  CHECK(ev.temperature == ev.gradient(0));
}

TEST_CASE("model evaluation closes the converter and satisfies the balance") {
  InterconnectionBlocks b;
  b.K = Eigen::MatrixXd::Ones(1, 1);
  auto s = build_irreversible(b, laws::linear_resistor({1.0}), {{"q"}, {"i"}, {}});
  PhsModel model(std::move(s), Hamiltonian(unit_gas_energy({}), {"q"}, Eigen::MatrixXd::Ones(1, 1)));
  Eigen::VectorXd x(2);
  x << 2.0, 0.8;
  const auto ev = model.evaluate(x, Eigen::VectorXd::Zero(1));
  CHECK(ev.sigma_i == doctest::Approx(0.8 * 0.8 / ev.temperature));
  CHECK(ev.x_dot(0) == doctest::Approx(ev.sigma_i));  // insulated: dS/dt = sigma_i
  CHECK(ev.x_dot(1) == doctest::Approx(-0.8));        // dq/dt = -r q
  CHECK(std::abs(ev.power.total) <= 1e-14);
  CHECK(std::abs(ev.power.P_s) <= 1e-14);  // stored energy is conserved
  CHECK(ev.power.P_d == doctest::Approx(0.0).epsilon(1e-14));

  model.set_converter_temperature(2 * ev.temperature);
  const auto off = model.evaluate(x, Eigen::VectorXd::Zero(1));
  CHECK(off.sigma_i == doctest::Approx(ev.sigma_i / 2));
}
