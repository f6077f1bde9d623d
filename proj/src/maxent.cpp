#include "mphs/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "mphs/error.hpp"

namespace mphs {

InfoConstant::InfoConstant(double k) : k_(k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorKind::InvalidArgument, "entropy constant k must be positive");
}

InfoConstant InfoConstant::from_base(double base) {
  if (!(base > 1.0)) throw Error(ErrorKind::InvalidArgument, "information base must exceed 1");
  return InfoConstant(1.0 / std::log(base));
}

double InfoConstant::base() const { return std::exp(1.0 / k_); }

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  std::vector<double> shifted(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) shifted[i] = std::exp(values[i] - top);
  return top + std::log(pairwise_sum(shifted));
}

Distribution Distribution::from_probabilities(std::vector<double> probs) {
  if (probs.empty()) throw Error(ErrorKind::InvalidArgument, "empty distribution");
  for (double p : probs)
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorKind::InvalidArgument, "probabilities must be finite and nonnegative");
  const double total = pairwise_sum(probs);
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "probabilities sum to " << total;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  Distribution d;
  d.log_probs_.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    d.log_probs_[i] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  d.probs_ = std::move(probs);
  return d;
}

Distribution Distribution::from_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty()) throw Error(ErrorKind::InvalidArgument, "empty distribution");
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw Error(ErrorKind::InvalidArgument, "log-weights do not normalize");
  Distribution d;
  d.log_probs_.resize(log_weights.size());
  d.probs_.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    d.log_probs_[i] = log_weights[i] - lse;
    d.probs_[i] = std::exp(d.log_probs_[i]);
  }
  return d;
}

Distribution Distribution::uniform(std::size_t size) {
  if (size == 0) throw Error(ErrorKind::InvalidArgument, "empty distribution");
  Distribution d;
  d.probs_.assign(size, 1.0 / static_cast<double>(size));
  d.log_probs_.assign(size, -std::log(static_cast<double>(size)));
  return d;
}

double Distribution::expectation(std::span<const double> values) const {
  if (values.size() != probs_.size()) throw Error(ErrorKind::DimensionMismatch, "expectation over a different support");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) terms[i] = probs_[i] * values[i];
  return pairwise_sum(terms);
}

double surprisal(const Distribution& p, std::size_t index, InfoConstant k) {
  if (p.probability(index) <= 0.0)
    throw Error(ErrorKind::ZeroProbability, "surprisal of a zero-probability microstate");
  return -k.k() * p.log_probability(index);
}

double statistical_entropy(const Distribution& p, InfoConstant k) {
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probability(i);
    terms[i] = pi > 0.0 ? -pi * p.log_probability(i) : 0.0;
  }
  return k.k() * pairwise_sum(terms);
}

namespace {

// Exponents sum_i lambda_i F_i(m) / k over the set.
std::vector<double> exponents(const AccessibleSet& set, const LabeledVector& lambdas, InfoConstant k) {
  std::vector<double> a(set.size(), 0.0);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double lam = lambdas.value(i);
    if (!std::isfinite(lam)) throw Error(ErrorKind::InvalidArgument, "multiplier for '" + lambdas.label(i) + "' is not finite");
    if (lam == 0.0) continue;
    auto v = set.values(lambdas.label(i));
    for (std::size_t m = 0; m < a.size(); ++m) a[m] += lam * v[m] / k.k();
  }
  return a;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Free functions mapped affinely onto [-1, 1]: G = (F - center) / scale.
struct ScaledProblem {
  std::vector<std::string> labels;
  std::vector<std::span<const double>> raw;
  std::vector<double> center, scale, target;  // target is scaled
  std::vector<bool> active;                   // false: constant on the set
  std::vector<std::size_t> act;               // indices of active functions
};

struct Evaluation {
  double lse = 0.0;                // ln sum exp(nu . G)
  std::vector<double> log_weight;  // nu . G per microstate
  Eigen::VectorXd mean;            // E[G] over active functions
  Eigen::MatrixXd cov;
};

class DualProblem {
 public:
  DualProblem(const AccessibleSet& set, const ScaledProblem& sp) : set_(set), sp_(sp) {
    const std::size_t n = sp_.act.size();
    g_.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t i = sp_.act[a];
      g_[a].resize(set.size());
      for (std::size_t m = 0; m < set.size(); ++m) g_[a][m] = (sp_.raw[i][m] - sp_.center[i]) / sp_.scale[i];
    }
    target_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a) target_(static_cast<Eigen::Index>(a)) = sp_.target[sp_.act[a]];
  }

  std::size_t dim() const { return g_.size(); }
  const Eigen::VectorXd& target() const { return target_; }

  std::vector<double> log_weights(const Eigen::VectorXd& nu) const {
    std::vector<double> w(set_.size(), 0.0);
    for (std::size_t a = 0; a < g_.size(); ++a) {
      const double c = nu(static_cast<Eigen::Index>(a));
      for (std::size_t m = 0; m < w.size(); ++m) w[m] += c * g_[a][m];
    }
    return w;
  }

  double objective(const Eigen::VectorXd& nu) const {
    auto w = log_weights(nu);
    return log_sum_exp(w) - nu.dot(target_);
  }

  Evaluation evaluate(const Eigen::VectorXd& nu, bool with_cov) const {
    Evaluation e;
    e.log_weight = log_weights(nu);
    e.lse = log_sum_exp(e.log_weight);
    const std::size_t n = g_.size(), om = set_.size();
    std::vector<double> p(om), terms(om);
    for (std::size_t m = 0; m < om; ++m) p[m] = std::exp(e.log_weight[m] - e.lse);
    e.mean.resize(static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t m = 0; m < om; ++m) terms[m] = p[m] * g_[a][m];
      e.mean(static_cast<Eigen::Index>(a)) = pairwise_sum(terms);
    }
    if (with_cov) {
      e.cov.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
          const double ma = e.mean(static_cast<Eigen::Index>(a)), mb = e.mean(static_cast<Eigen::Index>(b));
          for (std::size_t m = 0; m < om; ++m) terms[m] = p[m] * (g_[a][m] - ma) * (g_[b][m] - mb);
          const double c = pairwise_sum(terms);
          e.cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = c;
          e.cov(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = c;
        }
    }
    return e;
  }

  // Mean of one scaled function as a function of its own coordinate.
  double coordinate_mean(Eigen::VectorXd nu, std::size_t a, double value) const {
    nu(static_cast<Eigen::Index>(a)) = value;
    auto e = evaluate(nu, false);
    return e.mean(static_cast<Eigen::Index>(a));
  }

 private:
  const AccessibleSet& set_;
  const ScaledProblem& sp_;
  std::vector<std::vector<double>> g_;
  Eigen::VectorXd target_;
};

constexpr double kDivergenceBound = 1e6;  // |nu| beyond this means an unattainable target

[[noreturn]] void throw_out_of_hull(const ScaledProblem& sp) {
  std::string labels;
  for (std::size_t a : sp.act) labels += (labels.empty() ? "" : ", ") + sp.labels[a];
  throw Error(ErrorKind::TargetOutOfRange,
              "targets for (" + labels + ") lie outside the attainable set; the multipliers diverge");
}

// One pass of 1-D bisection on every coordinate.
void bisection_sweep(const DualProblem& dual, const ScaledProblem& sp, Eigen::VectorXd& nu) {
  for (std::size_t a = 0; a < dual.dim(); ++a) {
    const double goal = dual.target()(static_cast<Eigen::Index>(a));
    const double x0 = nu(static_cast<Eigen::Index>(a));
    double lo = x0 - 1.0, hi = x0 + 1.0;
    while (dual.coordinate_mean(nu, a, lo) > goal) {
      lo = x0 - 2.0 * (x0 - lo);
      if (std::abs(lo) > kDivergenceBound) throw_out_of_hull(sp);
    }
    while (dual.coordinate_mean(nu, a, hi) < goal) {
      hi = x0 + 2.0 * (hi - x0);
      if (std::abs(hi) > kDivergenceBound) throw_out_of_hull(sp);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (dual.coordinate_mean(nu, a, mid) < goal ? lo : hi) = mid;
    }
    nu(static_cast<Eigen::Index>(a)) = 0.5 * (lo + hi);
  }
}

ScaledProblem scale_problem(const AccessibleSet& set, const LabeledVector& targets, double tol) {
  ScaledProblem sp;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string& label = targets.label(i);
    auto v = set.values(label);
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it, t = targets.value(i);
    if (!std::isfinite(t)) throw Error(ErrorKind::InvalidArgument, "target for '" + label + "' is not finite");
    sp.labels.push_back(label);
    sp.raw.push_back(v);
    const bool constant = hi - lo <= 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    if (constant) {
      if (std::abs(t - lo) > tol * std::max(1.0, std::abs(lo)))
        throw Error(ErrorKind::TargetOutOfRange, "function '" + label + "' is constant (" + format_double(lo) +
                                                     ") on the accessible set but the target is " + format_double(t));
      sp.center.push_back(lo);
      sp.scale.push_back(1.0);
      sp.target.push_back(0.0);
      sp.active.push_back(false);
      continue;
    }
    if (t <= lo || t >= hi)
      throw Error(ErrorKind::TargetOutOfRange, "target " + format_double(t) + " for '" + label +
                                                   "' is not strictly inside the attainable range [" +
                                                   format_double(lo) + ", " + format_double(hi) + "]");
    const double center = 0.5 * (lo + hi), scale = 0.5 * (hi - lo);
    sp.center.push_back(center);
    sp.scale.push_back(scale);
    sp.target.push_back((t - center) / scale);
    sp.active.push_back(true);
    sp.act.push_back(i);
  }
  return sp;
}

void check_rank(const DualProblem& dual, const ScaledProblem& sp) {
  if (dual.dim() < 2) return;
  auto e = dual.evaluate(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dual.dim())), true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e.cov);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (bottom <= 1e-11 * top) {
    std::ostringstream os;
    os << "free functions are affinely dependent on the accessible set; null combination:";
    const Eigen::VectorXd v = eig.eigenvectors().col(0);
    for (std::size_t a = 0; a < dual.dim(); ++a) {
      const std::size_t i = sp.act[a];
      os << " " << v(static_cast<Eigen::Index>(a)) / sp.scale[i] << "*" << sp.labels[i];
    }
    throw Error(ErrorKind::SingularCovariance, os.str());
  }
}

EquilibriumSolution assemble_solution(AccessibleSetPtr set, const LabeledVector& targets, const ScaledProblem& sp,
                                      const Eigen::VectorXd& nu, const Evaluation& ev, InfoConstant k) {
  const double kk = k.k();
  EquilibriumSolution sol;
  sol.set = std::move(set);
  sol.k = k;
  sol.targets = targets;
  double offset = 0.0;  // sum nu_i c_i / s_i
  for (std::size_t i = 0; i < sp.labels.size(); ++i) sol.lambdas.set(sp.labels[i], 0.0);
  for (std::size_t a = 0; a < sp.act.size(); ++a) {
    const std::size_t i = sp.act[a];
    const double n = nu(static_cast<Eigen::Index>(a));
    sol.lambdas.set(sp.labels[i], n * kk / sp.scale[i]);
    offset += n * sp.center[i] / sp.scale[i];
  }
  sol.log_partition = kk * (ev.lse + offset);
  sol.distribution = Distribution::from_log_weights(ev.log_weight);
  // k (lse - nu . target) avoids the cancellation in k ln Z - lambda . F
  double dot = 0.0;
  for (std::size_t a = 0; a < sp.act.size(); ++a) dot += nu(static_cast<Eigen::Index>(a)) * sp.target[sp.act[a]];
  sol.entropy = kk * (ev.lse - dot);
  for (std::size_t i = 0; i < sp.labels.size(); ++i) {
    const double mean = sol.distribution.expectation(sp.raw[i]);
    sol.expectations.set(sp.labels[i], mean);
    sol.residuals.set(sp.labels[i], std::abs(mean - targets.value(i)));
  }
  return sol;
}

}  // namespace

double log_partition(const AccessibleSet& set, const LabeledVector& lambdas, InfoConstant k) {
  auto a = exponents(set, lambdas, k);
  return k.k() * log_sum_exp(a);
}

Distribution boltzmann_distribution(const AccessibleSet& set, const LabeledVector& lambdas, InfoConstant k) {
  auto a = exponents(set, lambdas, k);
  return Distribution::from_log_weights(a);
}

EquilibriumSolution solve_multipliers(AccessibleSetPtr set, const LabeledVector& targets, InfoConstant k,
                                      const SolverOptions& options) {
  if (!set) throw Error(ErrorKind::InvalidArgument, "solver without accessible set");
  if (!(options.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "solver tolerance must be positive");
  const ScaledProblem sp = scale_problem(*set, targets, options.tol);
  const DualProblem dual(*set, sp);
  check_rank(dual, sp);

  const auto n = static_cast<Eigen::Index>(dual.dim());
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(n);
  if (options.initial)
    for (std::size_t a = 0; a < sp.act.size(); ++a) {
      const std::size_t i = sp.act[a];
      if (auto lam = options.initial->find(sp.labels[i]); lam && std::isfinite(*lam))
        nu(static_cast<Eigen::Index>(a)) = *lam * sp.scale[i] / k.k();
    }

  // Converged when both the scaled residual and the residual in the
  // function's own units are within tolerance.
  auto converged = [&](const Eigen::VectorXd& resid) {
    for (std::size_t a = 0; a < sp.act.size(); ++a) {
      const std::size_t i = sp.act[a];
      const double r = std::abs(resid(static_cast<Eigen::Index>(a)));
      if (r > options.tol) return false;
      if (r * sp.scale[i] > options.tol * std::max(1.0, std::abs(targets.value(i)))) return false;
    }
    return true;
  };

  std::vector<SolverIterate> trace;
  int polish = 0;
  double previous_residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    Evaluation ev = dual.evaluate(nu, true);
    const Eigen::VectorXd resid = ev.mean - dual.target();
    const double max_resid = n ? resid.cwiseAbs().maxCoeff() : 0.0;
    if (n == 0 || (converged(resid) && (polish >= 2 || max_resid >= previous_residual || max_resid < 1e-15))) {
      auto sol = assemble_solution(set, targets, sp, nu, ev, k);
      sol.iterations = iter;
      sol.trace = std::move(trace);
      return sol;
    }
    if (converged(resid)) ++polish;
    previous_residual = max_resid;
    if (iter == options.max_iter) break;

    SolverIterate it;
    it.objective = ev.lse - nu.dot(dual.target());
    it.max_residual = max_resid;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ev.cov, Eigen::EigenvaluesOnly);
    it.min_eigenvalue = eig.eigenvalues().minCoeff();
    const double top = eig.eigenvalues().maxCoeff();

    bool newton_ok = it.min_eigenvalue > 1e-14 * std::max(top, 1e-300) && it.min_eigenvalue > 1e-300;
    if (newton_ok) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.cov);
      const Eigen::VectorXd delta = -ldlt.solve(resid);
      it.decrement = -resid.dot(delta);
      const double slope = resid.dot(delta);
      double t = 1.0;
      newton_ok = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Eigen::VectorXd trial = nu + t * delta;
        const double f = dual.objective(trial);
        if (std::isfinite(f) && f <= it.objective + 0.25 * t * slope + 1e-15 * std::abs(it.objective)) {
          nu = trial;
          it.step = t;
          newton_ok = true;
          break;
        }
      }
    }
    if (!newton_ok) {
      it.bisection = true;
      it.decrement = 0.0;
      bisection_sweep(dual, sp, nu);
    }
    if (nu.size() && nu.cwiseAbs().maxCoeff() > kDivergenceBound) throw_out_of_hull(sp);
    trace.push_back(it);
  }
  std::ostringstream os;
  os << "multiplier solve did not converge in " << options.max_iter << " iterations";
  if (!trace.empty()) os << " (last scaled residual " << trace.back().max_residual << ")";
  throw Error(ErrorKind::NoConvergence, os.str());
}

EquilibriumSolution solution_from_multipliers(AccessibleSetPtr set, const LabeledVector& lambdas, InfoConstant k) {
  if (!set) throw Error(ErrorKind::InvalidArgument, "no accessible set");
  auto a = exponents(*set, lambdas, k);
  EquilibriumSolution sol;
  sol.set = set;
  sol.k = k;
  sol.lambdas = lambdas;
  sol.log_partition = k.k() * log_sum_exp(a);
  sol.distribution = Distribution::from_log_weights(a);
  double dot = 0.0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double mean = sol.distribution.expectation(set->values(lambdas.label(i)));
    sol.targets.set(lambdas.label(i), mean);
    sol.expectations.set(lambdas.label(i), mean);
    sol.residuals.set(lambdas.label(i), 0.0);
    dot += lambdas.value(i) * mean;
  }
  sol.entropy = sol.log_partition - dot;
  return sol;
}

double thermodynamic_entropy(const EquilibriumSolution& sol) {
  double s = sol.log_partition;
  for (std::size_t i = 0; i < sol.lambdas.size(); ++i) s -= sol.lambdas.value(i) * sol.targets.at(sol.lambdas.label(i));
  return s;
}

EntropyOfTargets entropy_function(AccessibleSetPtr set, InfoConstant k, SolverOptions options) {
  return [set = std::move(set), k, options](const LabeledVector& targets) {
    return solve_multipliers(set, targets, k, options).entropy;
  };
}

GradientCheckReport multiplier_gradient_check(const EntropyOfTargets& entropy, const EquilibriumSolution& sol,
                                              double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be positive");
  GradientCheckReport report;
  for (std::size_t i = 0; i < sol.targets.size(); ++i) {
    const std::string& label = sol.targets.label(i);
    auto v = sol.set->values(label);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double half_range = 0.5 * (*hi - *lo);
    if (half_range <= 1e-12 * std::max({1.0, std::abs(*lo), std::abs(*hi)})) continue;
    const double target = sol.targets.value(i);
    const double step = h * std::max(std::abs(target), half_range);
    LabeledVector plus = sol.targets, minus = sol.targets;
    plus.values()[i] += step;
    minus.values()[i] -= step;
    GradientCheckEntry e;
    e.label = label;
    e.finite_difference = (entropy(plus) - entropy(minus)) / (2.0 * step);
    e.minus_lambda = -sol.lambdas.at(label);
    e.error = std::abs(e.finite_difference - e.minus_lambda);
    e.tolerance = 1e-4 * std::max(std::abs(e.minus_lambda), sol.k.k() / half_range);
    e.passed = e.error <= e.tolerance;
    report.passed = report.passed && e.passed;
    report.entries.push_back(e);
  }
  return report;
}

std::map<std::string, double> intensive_quantities(const EquilibriumSolution& sol, const IntensiveLabels& labels) {
  auto lambda_e = sol.lambdas.find(labels.energy);
  if (!lambda_e) throw Error(ErrorKind::UndefinedTemperature, "energy '" + labels.energy + "' is not a free function");
  if (*lambda_e == 0.0) throw Error(ErrorKind::UndefinedTemperature, "energy multiplier is zero (infinite temperature)");
  std::map<std::string, double> out;
  const double T = -1.0 / *lambda_e;
  out["T"] = T;
  for (std::size_t i = 0; i < sol.lambdas.size(); ++i) {
    const std::string& label = sol.lambdas.label(i);
    const double lam = sol.lambdas.value(i);
    if (label == labels.energy) continue;
    if (label == labels.count)
      out["mu"] = lam * T;
    else if (label == labels.volume)
      out["P"] = -lam * T;
    else
      out["T*lambda[" + label + "]"] = lam * T;
  }
  return out;
}

}  // namespace mphs
