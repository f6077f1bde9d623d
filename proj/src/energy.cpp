#include "mphs/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "mphs/error.hpp"

namespace mphs {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<double> key_of(const std::vector<std::string>& labels, const LabeledVector& extras) {
  std::vector<double> key;
  key.reserve(labels.size());
  for (const auto& l : labels) key.push_back(extras.at(l));
  return key;
}

bool domain_error(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::TargetOutOfRange:
    case ErrorKind::NoConvergence:
    case ErrorKind::SingularCovariance:
      return true;
    default:
      return false;
  }
}

}  // namespace

EnumeratedEntropyModel::EnumeratedEntropyModel(AccessibleSetPtr set, std::string energy_label,
                                               std::vector<std::string> extra_labels, InfoConstant k,
                                               SolverOptions options, bool homogeneous)
    : set_(std::move(set)),
      energy_label_(std::move(energy_label)),
      extra_labels_(std::move(extra_labels)),
      k_(k),
      options_(std::move(options)),
      homogeneous_(homogeneous) {
  if (!set_) throw Error(ErrorKind::InvalidArgument, "entropy model without accessible set");
  auto energies = set_->values(energy_label_);
  for (const auto& l : extra_labels_) {
    if (l == energy_label_) throw Error(ErrorKind::InvalidArgument, "energy label repeated among extras");
    set_->function_index(l);
  }
  const auto [lo, hi] = std::minmax_element(energies.begin(), energies.end());
  energy_min_ = *lo;
  energy_max_ = *hi;
  options_.initial.reset();
}

LabeledVector EnumeratedEntropyModel::targets(double energy, const LabeledVector& extras) const {
  LabeledVector t;
  t.set(energy_label_, energy);
  for (const auto& l : extra_labels_) t.set(l, extras.at(l));
  return t;
}

EquilibriumSolution EnumeratedEntropyModel::solve(double energy, const LabeledVector& extras) const {
  SolverOptions opts = options_;
  {
    std::lock_guard lock(mutex_);
    opts.initial = warm_;
  }
  const LabeledVector t = targets(energy, extras);
  EquilibriumSolution sol = [&] {
    try {
      return solve_multipliers(set_, t, k_, opts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoConvergence || !opts.initial) throw;
      opts.initial.reset();
      return solve_multipliers(set_, t, k_, opts);
    }
  }();
  std::lock_guard lock(mutex_);
  warm_ = sol.lambdas;
  return sol;
}

EntropyPoint EnumeratedEntropyModel::evaluate(double energy, const LabeledVector& extras) const {
  const EquilibriumSolution sol = solve(energy, extras);
  EntropyPoint p;
  p.entropy = sol.entropy;
  p.lambda_energy = sol.lambdas.at(energy_label_);
  for (const auto& l : extra_labels_) p.lambda_extra.set(l, sol.lambdas.at(l));
  return p;
}

std::pair<double, double> EnumeratedEntropyModel::energy_range(const LabeledVector&) const {
  return {energy_min_, energy_max_};
}

std::optional<std::pair<double, double>> EnumeratedEntropyModel::entropy_peak(const LabeledVector& extras) const {
  const auto key = key_of(extra_labels_, extras);
  {
    std::lock_guard lock(mutex_);
    if (auto it = peaks_.find(key); it != peaks_.end()) return it->second;
  }
  std::pair<double, double> peak;
  if (extra_labels_.empty()) {
    const Distribution u = Distribution::uniform(set_->size());
    peak = {u.expectation(set_->values(energy_label_)), k_.k() * std::log(static_cast<double>(set_->size()))};
  } else {
    LabeledVector t;
    for (const auto& l : extra_labels_) t.set(l, extras.at(l));
    const EquilibriumSolution sol = solve_multipliers(set_, t, k_, options_);
    peak = {sol.distribution.expectation(set_->values(energy_label_)), sol.entropy};
  }
  std::lock_guard lock(mutex_);
  if (peaks_.size() > 256) peaks_.clear();
  peaks_[key] = peak;
  return peak;
}

IdealGasEntropyModel::IdealGasEntropyModel(IdealGasModel model, std::vector<std::string> extra_labels)
    : model_(model), extra_labels_(std::move(extra_labels)) {
  model_.validate();
  for (const auto& l : extra_labels_)
    if (l != "count" && l != "volume")
      throw Error(ErrorKind::InvalidArgument, "ideal gas state quantity '" + l + "' is not count or volume");
  if (extra_labels_.size() == 2 && extra_labels_[0] == extra_labels_[1])
    throw Error(ErrorKind::InvalidArgument, "repeated ideal gas state quantity");
}

IdealGasModel IdealGasEntropyModel::at(const LabeledVector& extras) const {
  IdealGasModel m = model_;
  for (const auto& l : extra_labels_) {
    const double v = extras.at(l);
    if (!std::isfinite(v)) throw Error(ErrorKind::TargetOutOfRange, "non-finite " + l);
    (l == "count" ? m.N : m.V) = v;
  }
  if (!(m.N >= 1.0)) throw Error(ErrorKind::TargetOutOfRange, "ideal gas count below 1: " + format_double(m.N));
  if (!(m.V > 0.0)) throw Error(ErrorKind::TargetOutOfRange, "ideal gas volume not positive: " + format_double(m.V));
  return m;
}

EntropyPoint IdealGasEntropyModel::evaluate(double energy, const LabeledVector& extras) const {
  const IdealGasModel m = at(extras);
  if (!(energy > 0.0) || !std::isfinite(energy))
    throw Error(ErrorKind::TargetOutOfRange, "ideal gas energy must be positive, got " + format_double(energy));
  const double k = m.k.k();
  const double T = energy / (1.5 * m.N * k);
  const IdealGasState s = ideal_gas_state(m, T);
  EntropyPoint p;
  p.entropy = s.S;
  p.lambda_energy = -1.0 / T;
  for (const auto& l : extra_labels_) {
    if (l == "volume") {
      p.lambda_extra.set(l, -m.N * k / m.V);
    } else {
      // -dS/dN at fixed E and V
      double dsdn = ideal_gas_log_partition(IdealGasModel{1.0, m.V, m.m_atom, m.h, m.k, false}, T);
      if (m.gibbs_correction) dsdn -= k * boost::math::digamma(m.N + 1.0);
      p.lambda_extra.set(l, -dsdn);
    }
  }
  return p;
}

std::pair<double, double> IdealGasEntropyModel::energy_range(const LabeledVector&) const {
  return {0.0, std::numeric_limits<double>::infinity()};
}

std::optional<double> IdealGasEntropyModel::closed_form_energy(double entropy, const LabeledVector& extras) const {
  const IdealGasModel m = at(extras);
  const double k = m.k.k();
  // S/k = N ln V + 1.5 N ln(c T) + 1.5 N - [ln N!],  c = 2 pi m k / h^2
  double rest = entropy / k - m.N * std::log(m.V) - 1.5 * m.N;
  if (m.gibbs_correction) rest += std::lgamma(m.N + 1.0);
  const double ln_c = std::log(2.0 * std::numbers::pi) + std::log(m.m_atom) + std::log(k) - 2.0 * std::log(m.h);
  const double ln_T = rest / (1.5 * m.N) - ln_c;
  const double E = 1.5 * m.N * k * std::exp(ln_T);
  if (!(E > 0.0) || !std::isfinite(E))
    throw Error(ErrorKind::EntropyOutOfRange, "entropy " + format_double(entropy) + " gives no finite positive energy");
  return E;
}

EnergyFunction::EnergyFunction(EntropyModelPtr model, Branch branch) : model_(std::move(model)), branch_(branch) {
  if (!model_) throw Error(ErrorKind::InvalidArgument, "energy function without entropy model");
}

double EnergyFunction::energy_of_entropy(double entropy, const LabeledVector& extras) const {
  if (!std::isfinite(entropy)) throw Error(ErrorKind::InvalidArgument, "entropy is not finite");
  if (auto e = model_->closed_form_energy(entropy, extras)) return *e;

  const double k = model_->k().k();
  const double tol = 1e-10 * std::max(std::abs(entropy), k);
  auto [lo, hi] = model_->energy_range(extras);
  const double floor = lo;

  auto peak = model_->entropy_peak(extras);
  if (peak) {
    if (branch_ == Branch::unspecified)
      throw Error(ErrorKind::BranchAmbiguity, "S(E) is not monotone on this model and no branch was selected");
    const double s_max = peak->second;
    const double edge = 1e-12 * std::max(std::abs(s_max), k);
    if (entropy > s_max + edge)
      throw Error(ErrorKind::EntropyOutOfRange,
                  "entropy " + format_double(entropy) + " exceeds the maximum " + format_double(s_max));
    if (entropy >= s_max - edge) return peak->first;
    hi = peak->first;
  } else if (!std::isfinite(hi)) {
    double step = std::max(1.0, std::abs(lo));
    double probe = lo + step;
    for (int i = 0;; ++i) {
      try {
        if (model_->evaluate(probe, extras).entropy > entropy) break;
      } catch (const Error& e) {
        if (!domain_error(e)) throw;
      }
      if (i == 200) throw Error(ErrorKind::EntropyOutOfRange, "no energy reaches entropy " + format_double(entropy));
      step *= 2.0;
      probe = lo + step;
    }
    hi = probe;
  }
  const double scale = hi - lo;

  // Entropy minus target; nullopt when the point is not attainable (this
  // only happens next to the lower energy bound).
  auto residual = [&](double E, double& slope) -> std::optional<double> {
    try {
      const EntropyPoint p = model_->evaluate(E, extras);
      slope = -p.lambda_energy;
      return p.entropy - entropy;
    } catch (const Error& e) {
      if (!domain_error(e)) throw;
      return std::nullopt;
    }
  };

  const auto key = key_of(model_->extra_labels(), extras);
  std::optional<double> guess;
  {
    std::lock_guard lock(mutex_);
    if (auto it = last_.find(key); it != last_.end() && it->second.second > lo && it->second.second < hi)
      guess = it->second.second;
  }

  double x;
  double slope = 0.0;
  if (guess) {
    x = *guess;
  } else {
    while (hi - lo > 1e-6 * scale) {
      const double mid = 0.5 * (lo + hi);
      auto f = residual(mid, slope);
      if (!f || *f < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    x = 0.5 * (lo + hi);
  }

  bool met = false;
  for (int iter = 0; iter < 100; ++iter) {
    auto f = residual(x, slope);
    if (!f) {
      lo = x;
      x = 0.5 * (lo + hi);
      continue;
    }
    if (*f == 0.0) {
      met = true;
      break;
    }
    (*f < 0.0 ? lo : hi) = x;
    double next = slope > 0.0 ? x - *f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool small_step = std::abs(next - x) <= 1e-13 * std::max(std::abs(x), scale);
    if (std::abs(*f) <= tol) {
      // one polishing step past the tolerance, then stop
      if (met || small_step) {
        met = true;
        break;
      }
      met = true;
    }
    x = next;
    if (hi - lo <= 1e-15 * scale) break;
  }
  if (!met) {
    double s;
    auto f = residual(x, s);
    met = f && std::abs(*f) <= tol;
  }
  if (!met) {
    if (x - floor <= 1e-6 * scale)
      throw Error(ErrorKind::EntropyOutOfRange,
                  "entropy " + format_double(entropy) + " is below the attainable range at these extras");
    throw Error(ErrorKind::NoConvergence, "energy inversion did not converge for entropy " + format_double(entropy));
  }
  std::lock_guard lock(mutex_);
  if (last_.size() > 256) last_.clear();
  last_[key] = {entropy, x};
  return x;
}

EnergyEvaluation EnergyFunction::evaluate(const MacroState& x) const {
  EnergyEvaluation out;
  out.energy = energy_of_entropy(x.entropy, x.extras);
  if (auto peak = model_->entropy_peak(x.extras);
      peak && x.entropy >= peak->second - 1e-12 * std::max(std::abs(peak->second), model_->k().k()))
    throw Error(ErrorKind::UndefinedTemperature, "temperature is undefined at the entropy maximum");
  out.point = model_->evaluate(out.energy, x.extras);
  if (out.point.lambda_energy == 0.0 || !std::isfinite(out.point.lambda_energy))
    throw Error(ErrorKind::UndefinedTemperature, "energy multiplier vanishes at the entropy maximum");
  out.temperature = -1.0 / out.point.lambda_energy;
  const auto& labels = model_->extra_labels();
  out.efforts.resize(static_cast<Eigen::Index>(labels.size() + 1));
  out.efforts(0) = out.temperature;
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.efforts(static_cast<Eigen::Index>(i + 1)) = out.temperature * out.point.lambda_extra.at(labels[i]);
  return out;
}

double entropy_of_energy(const EntropyModel& model, double energy, const LabeledVector& extras) {
  return model.evaluate(energy, extras).entropy;
}

double energy_of_entropy(const EnergyFunction& fn, double entropy, const LabeledVector& extras) {
  return fn.energy_of_entropy(entropy, extras);
}

Eigen::VectorXd effort_vector(const EnergyFunction& fn, const MacroState& x) { return fn.evaluate(x).efforts; }

HomogeneityReport homogeneity_check(const EnergyFunction& fn, const MacroState& x, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "scaling factor must be positive");
  HomogeneityReport r;
  r.gamma = gamma;
  r.declared_homogeneous = fn.model().homogeneous();
  r.energy = fn(x);
  MacroState scaled{gamma * x.entropy, x.extras};
  for (double& v : scaled.extras.values()) v *= gamma;
  r.scaled_energy = fn(scaled);
  const double reference = gamma * r.energy;
  r.deviation = reference == 0.0 ? std::abs(r.scaled_energy) : std::abs(r.scaled_energy - reference) / std::abs(reference);
  r.passed = r.deviation <= 1e-8;
  return r;
}

}  // namespace mphs
