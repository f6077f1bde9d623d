#include "cli/suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "mphs/error.hpp"

namespace mphs::cli {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void record(CheckResult& r, double deviation, const std::string& detail) {
  ++r.instances;
  if (deviation > r.max_deviation || !std::isfinite(deviation)) {
    r.max_deviation = std::isfinite(deviation) ? deviation : std::numeric_limits<double>::infinity();
    if (r.passed) r.detail = detail;
  }
  if (!(deviation <= r.tolerance)) {
    if (r.passed) r.detail = detail;
    r.passed = false;
  }
}

// Random spin chain with couplings J_ij, a field h and free energy (and
// optionally magnetization) targets taken from random multipliers.
struct SpinInstance {
  AccessibleSetPtr set;
  LabeledVector targets;
  InfoConstant k;
  std::string description;
};

SpinInstance random_spin_system(Rng& rng, bool with_magnetization) {
  const auto L = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(3, 8)(rng));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(L, L);
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = i + 1; j < L; ++j) J(i, j) = J(j, i) = uniform(rng, -1.0, 1.0);
  const double h = uniform(rng, -1.0, 1.0);
  const auto coupling = functions::quadratic_coupling("coupling", J);
  const auto magnetization = functions::symbol_value_sum("magnetization");
  std::vector<CharFunction> fns{functions::linear_combination("energy", {coupling, magnetization}, {1.0, -h}),
                                magnetization};
  auto set = std::make_shared<const AccessibleSet>(accessible_set(make_alphabet(Alphabet::spins()), std::move(fns),
                                                                  ConstraintSpec{}, LengthRange{std::size_t(L), std::size_t(L)}));
  const InfoConstant k = std::bernoulli_distribution(0.5)(rng) ? InfoConstant(1.0) : InfoConstant::from_base(2.0);
  const double T = uniform(rng, 0.5, 5.0);
  LabeledVector lambdas{{"energy", -1.0 / T}};
  if (with_magnetization) lambdas.set("magnetization", uniform(rng, -1.0, 1.0) / T);
  const auto reference = solution_from_multipliers(set, lambdas, k);
  LabeledVector targets;
  for (std::size_t i = 0; i < lambdas.size(); ++i) targets.set(lambdas.label(i), reference.expectations.at(lambdas.label(i)));
  return {set, targets, k, "L=" + std::to_string(L) + " T=" + fmt(T) + " h=" + fmt(h)};
}

double legendre_deviation(const EquilibriumSolution& sol) {
  const double S = statistical_entropy(sol.distribution, sol.k);
  const double legendre = thermodynamic_entropy(sol);
  return std::abs(S - legendre) / std::max(std::abs(S), std::numeric_limits<double>::min());
}

double gradient_deviation(const EquilibriumSolution& sol, std::string& detail) {
  const auto report = multiplier_gradient_check(entropy_function(sol.set, sol.k), sol);
  double worst = 0.0;
  for (const auto& e : report.entries) {
    const double rel = e.error / (e.tolerance / 1e-4);
    if (rel >= worst) {
      worst = rel;
      detail = e.label + ": dS/dF=" + fmt(e.finite_difference) + " -lambda=" + fmt(e.minus_lambda);
    }
  }
  return worst;
}

// Largest S(p') - S(p*) over random perturbations inside the constraint set.
double maximality_excess(const EquilibriumSolution& sol, Rng& rng, int perturbations) {
  const auto& set = *sol.set;
  const auto n = static_cast<Eigen::Index>(set.size());
  const auto m = static_cast<Eigen::Index>(sol.targets.size()) + 1;
  Eigen::MatrixXd A(m, n);
  A.row(0).setOnes();
  for (Eigen::Index r = 1; r < m; ++r) {
    const auto v = set.values(sol.targets.label(static_cast<std::size_t>(r - 1)));
    for (Eigen::Index c = 0; c < n; ++c) A(r, c) = v[static_cast<std::size_t>(c)];
  }
  const Eigen::MatrixXd gram = A * A.transpose();
  const auto solver = gram.completeOrthogonalDecomposition();
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = sol.distribution.probability(static_cast<std::size_t>(i));
  const double S_star = statistical_entropy(sol.distribution, sol.k);

  std::normal_distribution<double> normal;
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < perturbations; ++t) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r(i) = normal(rng);
    const Eigen::VectorXd delta = r - A.transpose() * solver.solve(A * r);
    double t_max = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      if (delta(i) < 0.0) t_max = std::min(t_max, p(i) / -delta(i));
    if (!std::isfinite(t_max)) continue;
    const double scale = t_max * std::pow(10.0, -uniform(rng, 0.0, 6.0));
    const Eigen::VectorXd q = (p + scale * delta).cwiseMax(0.0);
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < n; ++i)
      if (q(i) > 0.0) terms.push_back(-q(i) * std::log(q(i)));
    worst = std::max(worst, sol.k.k() * pairwise_sum(terms) - S_star);
  }
  return worst;
}

CheckResult legendre_suite(std::uint64_t seed) {
  CheckResult r{"legendre", true, 0, 0.0, 1e-10, ""};
  Rng rng(seed);
  for (int i = 0; i < 200; ++i) {
    const auto inst = random_spin_system(rng, i % 2 == 1);
    const auto sol = solve_multipliers(inst.set, inst.targets, inst.k);
    record(r, legendre_deviation(sol), inst.description);
  }
  return r;
}

CheckResult gradient_suite(std::uint64_t seed) {
  CheckResult r{"gradient", true, 0, 0.0, 1e-4, ""};
  Rng rng(seed + 1);
  for (int i = 0; i < 24; ++i) {
    const auto inst = random_spin_system(rng, i % 2 == 1);
    const auto sol = solve_multipliers(inst.set, inst.targets, inst.k);
    std::string detail;
    const double dev = gradient_deviation(sol, detail);
    record(r, dev, inst.description + " " + detail);
  }
  return r;
}

CheckResult maximality_suite(std::uint64_t seed) {
  CheckResult r{"maximality", true, 0, 0.0, 1e-9, ""};
  Rng rng(seed + 2);
  for (int i = 0; i < 10; ++i) {
    const auto inst = random_spin_system(rng, i % 2 == 1);
    const auto sol = solve_multipliers(inst.set, inst.targets, inst.k);
    const double excess = maximality_excess(sol, rng, 1000);
    record(r, std::max(excess, 0.0), inst.description + " max S(p')-S*=" + fmt(excess));
  }
  r.detail += " (1000 perturbations per instance)";
  return r;
}

double quadratic_form_worst(const Eigen::MatrixXd& S, Rng& rng, int samples) {
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int t = 0; t < samples; ++t) {
    Eigen::VectorXd e(S.rows());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng) * std::pow(10.0, uniform(rng, -3.0, 3.0));
    worst = std::max(worst, std::abs(e.dot(S * e)) / e.squaredNorm());
  }
  return worst;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, -2.0, 2.0);
  return m;
}

Eigen::MatrixXd random_skew(Rng& rng, Eigen::Index n) {
  const Eigen::MatrixXd m = random_matrix(rng, n, n);
  return m - m.transpose();
}

CheckResult skew_suite(std::uint64_t seed) {
  CheckResult r{"skew", true, 0, 0.0, 1e-12, ""};
  Rng rng(seed + 3);

  // literal reversible matrix over (S, N, V)
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
  expected.topRightCorner(3, 3) = -Eigen::MatrixXd::Identity(3, 3);
  expected.bottomLeftCorner(3, 3) = Eigen::MatrixXd::Identity(3, 3);
  const auto reversible = build_reversible({"S", "N", "V"});
  const double literal = (reversible.interconnection.matrix() - expected).cwiseAbs().maxCoeff();
  record(r, literal, "reversible (S, N, V) literal entries");

  for (int i = 0; i < 10; ++i) {
    const auto nx = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(0, 4)(rng));
    const auto nw = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(1, 3)(rng));
    const auto nu = static_cast<Eigen::Index>(std::uniform_int_distribution<int>(0, 3)(rng));
    InterconnectionBlocks b;
    b.J_x = random_skew(rng, nx);
    b.K = random_matrix(rng, nx, nw);
    b.G_x = random_matrix(rng, nx, nu);
    b.G_w = random_matrix(rng, nw, nu);
    b.J_y = random_skew(rng, nu);
    PortLabels labels;
    for (Eigen::Index j = 0; j < nx; ++j) labels.storage.push_back("x" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < nw; ++j) labels.dissipative.push_back("w" + std::to_string(j + 1));
    for (Eigen::Index j = 0; j < nu; ++j) labels.external.push_back("u" + std::to_string(j + 1));
    const auto irr = build_irreversible(b, laws::linear_resistor(std::vector<double>(std::size_t(nw), 1.0)), labels);
    std::vector<std::string> rev_labels{"S"};
    for (Eigen::Index j = 0; j < nx; ++j) rev_labels.push_back("x" + std::to_string(j + 1));
    const auto rev = build_reversible(rev_labels);
    record(r, quadratic_form_worst(irr.interconnection.matrix(), rng, 1000),
           "irreversible nx=" + std::to_string(nx) + " nw=" + std::to_string(nw) + " nu=" + std::to_string(nu));
    record(r, quadratic_form_worst(rev.interconnection.matrix(), rng, 1000),
           "reversible n=" + std::to_string(rev_labels.size()));
  }
  r.detail = "max |e^T S e| / |e|^2 over 1e4 vectors per kind; worst: " + r.detail;
  return r;
}

CheckResult ideal_gas_check(const std::vector<IdealGasModel>& models, const std::vector<double>& temperatures) {
  CheckResult r{"ideal-gas-law", true, 0, 0.0, 1e-12, ""};
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    const double T = temperatures[i];
    const auto st = ideal_gas_state(m, T);
    const double NkT = m.N * m.k.k() * T;
    const double law = std::abs(st.P * m.V / NkT - 1.0);
    const double energy = std::abs(st.E_bar / (1.5 * NkT) - 1.0);
    record(r, std::max(law, energy),
           "N=" + fmt(m.N) + " V=" + fmt(m.V) + " T=" + fmt(T) + " |PV/NkT-1|=" + fmt(law) + " |E/(1.5NkT)-1|=" + fmt(energy));
  }
  return r;
}

CheckResult ideal_gas_suite(std::uint64_t seed) {
  Rng rng(seed + 4);
  std::vector<IdealGasModel> models;
  std::vector<double> temperatures;
  for (int i = 0; i < 100; ++i) {
    IdealGasModel m;
    m.N = static_cast<double>(std::uniform_int_distribution<int>(1, 10000)(rng));
    m.V = std::pow(10.0, uniform(rng, -6.0, 1.0));
    m.m_atom = 6.6335209e-27 * uniform(rng, 0.5, 50.0);
    m.gibbs_correction = i % 2 == 1;
    models.push_back(m);
    temperatures.push_back(std::pow(10.0, uniform(rng, 0.0, 4.0)));
  }
  return ideal_gas_check(models, temperatures);
}

}  // namespace

const std::vector<std::string>& builtin_suites() {
  static const std::vector<std::string> names{"legendre", "gradient", "skew", "maximality", "ideal-gas-law"};
  return names;
}

bool is_builtin_suite(const std::string& name) {
  const auto& n = builtin_suites();
  return name == "all" || std::find(n.begin(), n.end(), name) != n.end();
}

CheckResult run_builtin(const std::string& name, std::uint64_t seed) {
  if (name == "legendre") return legendre_suite(seed);
  if (name == "gradient") return gradient_suite(seed);
  if (name == "skew") return skew_suite(seed);
  if (name == "maximality") return maximality_suite(seed);
  if (name == "ideal-gas-law") return ideal_gas_suite(seed);
  throw Error(ErrorKind::InvalidArgument, "unknown verify suite '" + name + "'");
}

CheckResult check_skew_matrix(const Eigen::MatrixXd& S, const std::string& name, std::uint64_t seed) {
  CheckResult r{name, true, 0, 0.0, 1e-12, ""};
  Eigen::Index bi = 0, bj = 0;
  const Eigen::MatrixXd sym = (S + S.transpose()).cwiseAbs();
  const double defect = sym.maxCoeff(&bi, &bj);
  Rng rng(seed);
  const double form = quadratic_form_worst(S, rng, 10000);
  r.instances = 1;
  r.max_deviation = std::max(defect, form);
  r.passed = defect <= 1e-14 && form <= r.tolerance;
  r.detail = "max |S + S^T| = " + fmt(defect) + " at (" + std::to_string(bi) + ", " + std::to_string(bj) + "): S(" +
             std::to_string(bi) + "," + std::to_string(bj) + ") = " + fmt(S(bi, bj)) + ", S(" + std::to_string(bj) +
             "," + std::to_string(bi) + ") = " + fmt(S(bj, bi)) + "; max |e^T S e|/|e|^2 = " + fmt(form);
  return r;
}

std::vector<CheckResult> run_scenario_suites(const Scenario& s) {
  const Node root = s.root();
  std::vector<std::string> suites;
  if (auto v = root.find("verify")) {
    v->only({"suites", "matrix"});
    if (auto list = v->find("suites")) {
      suites = list->strings();
      for (std::size_t i = 0; i < suites.size(); ++i)
        if (!is_builtin_suite(suites[i]) || suites[i] == "all") (*list)[i].fail("unknown suite '" + suites[i] + "'");
    }
  }
  const bool enumerated = s.set && s.free;
  if (suites.empty()) {
    if (enumerated) suites = {"legendre", "gradient", "maximality"};
    if (s.ideal_gas) suites.push_back("ideal-gas-law");
    if (root.has("phs") || injected_matrix(s)) suites.push_back("skew");
  }
  if (suites.empty()) root.fail("nothing to verify: add constraints.free, system.ideal_gas, phs or verify.matrix");

  std::vector<CheckResult> out;
  std::optional<EquilibriumSolution> sol;
  auto solved = [&]() -> const EquilibriumSolution& {
    if (!enumerated) root.fail("this suite needs an enumerated system with constraints.free");
    if (!sol) sol = solve_multipliers(s.set, *s.free, s.k);
    return *sol;
  };
  for (const auto& name : suites) {
    if (name == "legendre") {
      CheckResult r{name, true, 0, 0.0, 1e-10, ""};
      record(r, legendre_deviation(solved()), "scenario instance");
      out.push_back(r);
    } else if (name == "gradient") {
      CheckResult r{name, true, 0, 0.0, 1e-4, ""};
      std::string detail;
      const double dev = gradient_deviation(solved(), detail);
      record(r, dev, detail);
      out.push_back(r);
    } else if (name == "maximality") {
      CheckResult r{name, true, 0, 0.0, 1e-9, ""};
      Rng rng(s.seed);
      const double excess = maximality_excess(solved(), rng, 1000);
      record(r, std::max(excess, 0.0), "max S(p')-S*=" + fmt(excess) + " over 1000 perturbations");
      out.push_back(r);
    } else if (name == "ideal-gas-law") {
      if (!s.ideal_gas) root.fail("ideal-gas-law needs system.ideal_gas");
      std::vector<double> Ts = s.sweep_T;
      if (s.ensemble && s.ensemble->intensives.T) Ts.push_back(*s.ensemble->intensives.T);
      if (Ts.empty()) root.fail("ideal-gas-law needs sweep.T or ensemble.T");
      out.push_back(ideal_gas_check(std::vector<IdealGasModel>(Ts.size(), *s.ideal_gas), Ts));
    } else if (name == "skew") {
      bool any = false;
      if (auto m = injected_matrix(s)) {
        out.push_back(check_skew_matrix(*m, "skew", s.seed));
        any = true;
      }
      if (root.has("phs")) {
        out.push_back(check_skew_matrix(phs_model(s)->structure().interconnection.matrix(), "skew (phs)", s.seed));
        any = true;
      }
      if (!any) root.fail("skew needs a phs block or verify.matrix");
    }
  }
  return out;
}

}  // namespace mphs::cli
