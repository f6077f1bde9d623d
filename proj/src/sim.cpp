#include "mphs/sim.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mphs/error.hpp"

namespace mphs {

using Eigen::VectorXd;

void InputSignal::set(const std::string& label, Function f) {
  if (!f) throw Error(ErrorKind::InvalidArgument, "empty signal for '" + label + "'");
  samples_.erase(label);
  functions_[label] = std::move(f);
}

void InputSignal::set_constant(const std::string& label, double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::InvalidArgument, "signal '" + label + "' is not finite");
  set(label, [value](double) { return value; });
}

void InputSignal::set_samples(const std::string& label, std::vector<double> times, std::vector<double> values) {
  if (times.size() != values.size() || times.empty())
    throw Error(ErrorKind::InvalidArgument, "signal '" + label + "' needs matching non-empty times and values");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
      throw Error(ErrorKind::InvalidArgument, "signal '" + label + "' has non-finite samples");
    if (i && !(times[i] > times[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "signal '" + label + "' times must be strictly increasing");
  }
  functions_.erase(label);
  samples_[label] = Samples{std::move(times), std::move(values)};
}

void InputSignal::validate(const std::vector<std::string>& ports, double t_end) const {
  auto known = [&](const std::string& l) { return std::find(ports.begin(), ports.end(), l) != ports.end(); };
  for (const auto& [label, f] : functions_)
    if (!known(label)) throw Error(ErrorKind::InvalidArgument, "signal for unknown port '" + label + "'");
  for (const auto& [label, s] : samples_) {
    if (!known(label)) throw Error(ErrorKind::InvalidArgument, "signal for unknown port '" + label + "'");
    if (s.times.front() > 0.0 || s.times.back() < t_end)
      throw Error(ErrorKind::InvalidArgument, "samples of '" + label + "' do not cover the simulation horizon");
  }
}

VectorXd InputSignal::at(const std::vector<std::string>& ports, double t) const {
  VectorXd u = VectorXd::Zero(static_cast<Eigen::Index>(ports.size()));
  for (std::size_t i = 0; i < ports.size(); ++i) {
    double v = 0.0;
    if (auto f = functions_.find(ports[i]); f != functions_.end()) {
      v = f->second(t);
    } else if (auto s = samples_.find(ports[i]); s != samples_.end()) {
      const auto& ts = s->second.times;
      const auto& vs = s->second.values;
      if (t <= ts.front()) {
        v = vs.front();
      } else if (t >= ts.back()) {
        v = vs.back();
      } else {
        const auto j = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
        const double a = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
        v = vs[j - 1] + a * (vs[j] - vs[j - 1]);
      }
    }
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "signal '" + ports[i] + "' is not finite");
    u(static_cast<Eigen::Index>(i)) = v;
  }
  return u;
}

double TrajectoryLedger::energy_balance_defect() const {
  if (rows.empty()) return 0.0;
  return std::abs(rows.back().energy - rows.front().energy - stored_work);
}

double TrajectoryLedger::max_relative_power_defect() const {
  double worst = 0.0;
  for (const auto& r : rows)
    worst = std::max(worst, std::abs(r.balance_defect) / std::max(r.power_scale, std::numeric_limits<double>::min()));
  return worst;
}

double TrajectoryLedger::min_sigma_i() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) m = std::min(m, r.sigma_i);
  return rows.empty() ? 0.0 : m;
}

namespace {

void put(std::ostream& os, double v, bool first = false) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  if (!first) os << ',';
  os << buf;
}

}  // namespace

void TrajectoryLedger::write_csv(std::ostream& os) const {
  os << "time";
  for (const auto& l : state_labels) os << ',' << l;
  for (const auto& l : state_labels) os << ",e[" << l << ']';
  os << ",P_s,P_d,P_ext,sigma_i,sigma_ext,balance_defect\n";
  for (const auto& r : rows) {
    put(os, r.time, true);
    for (Eigen::Index i = 0; i < r.state.size(); ++i) put(os, r.state(i));
    for (Eigen::Index i = 0; i < r.efforts.size(); ++i) put(os, r.efforts(i));
    put(os, r.P_s);
    put(os, r.P_d);
    put(os, r.P_ext);
    put(os, r.sigma_i);
    put(os, r.sigma_ext);
    put(os, r.balance_defect);
    os << '\n';
  }
}

namespace {

LedgerRow make_row(const PortEvaluation& p, const VectorXd& x, Eigen::Index ns, double t) {
  LedgerRow r;
  r.time = t;
  r.state = x;
  r.efforts = p.efforts.head(ns);
  r.energy = p.energy;
  r.P_s = p.power.P_s;
  r.P_d = p.power.P_d;
  r.P_ext = p.power.P_ext;
  r.sigma_i = p.sigma_i;
  r.sigma_ext = p.sigma_ext;
  r.balance_defect = p.power.total;
  r.power_scale = p.efforts.cwiseProduct(p.flows).cwiseAbs().sum();
  return r;
}

// Everything known after one evaluation of the right-hand side.
struct Rates {
  VectorXd x_dot;
  double P_s = 0.0;
  double sigma_i = 0.0;
  double sigma_ext = 0.0;
  std::vector<LedgerRow> rows;  // snapshot per subsystem
  double flow = 0.0, gap = 0.0; // coupling only
};

using RateFunction = std::function<Rates(const VectorXd&, double)>;

bool out_of_domain(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::TargetOutOfRange:
    case ErrorKind::EntropyOutOfRange:
    case ErrorKind::StateOutOfDomain:
    case ErrorKind::UndefinedTemperature:
    case ErrorKind::NonpositiveTemperature:
      return true;
    default:
      return false;
  }
}

// Explicit midpoint from (x, t) with the rates k1 already evaluated there.
// Returns the rates at the end point, which the next step reuses.
Rates midpoint(const RateFunction& rates, const VectorXd& x, const Rates& k1, double t, double dt, int depth,
               StepResult& out) {
  try {
    const VectorXd half = x + 0.5 * dt * k1.x_dot;
    const Rates k2 = rates(half, t + 0.5 * dt);
    const VectorXd next = x + dt * k2.x_dot;
    if (!next.allFinite()) throw Error(ErrorKind::StateOutOfDomain, "state became non-finite");
    Rates end = rates(next, t + dt);  // the end point must be attainable too
    out.x = next;
    out.stored_work += dt * k2.P_s;
    out.entropy_production += dt * k2.sigma_i;
    out.entropy_outflow += dt * k2.sigma_ext;
    return end;
  } catch (const Error& e) {
    if (!out_of_domain(e)) throw;
    if (depth >= kMaxHalvings)
      throw Error(ErrorKind::StateOutOfDomain, std::string("step rejected after ") + std::to_string(kMaxHalvings) +
                                                   " halvings at t = " + std::to_string(t) + ": " + e.what());
    ++out.halvings;
    const Rates mid = midpoint(rates, x, k1, t, 0.5 * dt, depth + 1, out);
    const VectorXd x_mid = out.x;
    return midpoint(rates, x_mid, mid, t + 0.5 * dt, 0.5 * dt, depth + 1, out);
  }
}

RateFunction model_rates(const PhsModel& model, const InputFunction& u) {
  return [&model, &u](const VectorXd& x, double t) {
    const PortEvaluation p = model.evaluate(x, u(t));
    Rates r{p.x_dot, p.power.P_s, p.sigma_i, p.sigma_ext, {}, 0.0, 0.0};
    r.rows.push_back(make_row(p, x, model.layout().n_storage(), t));
    return r;
  };
}

}  // namespace

StepResult step(const PhsModel& model, const VectorXd& x, const InputFunction& u, double t, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  StepResult out;
  out.x = x;
  const RateFunction rates = model_rates(model, u);
  midpoint(rates, x, rates(x, t), t, dt, 0, out);
  return out;
}

StepResult step(const PhsModel& model, const VectorXd& x, const VectorXd& u, double dt) {
  const InputFunction constant = [u](double) { return u; };
  return step(model, x, constant, 0.0, dt);
}

LedgerRow ledger_row(const PhsModel& model, const VectorXd& x, const VectorXd& u, double t) {
  return make_row(model.evaluate(x, u), x, model.layout().n_storage(), t);
}

namespace {

// Step count and the time of step i, landing exactly on t_end.
std::int64_t step_count(double t_end, double dt) {
  const double n = t_end / dt;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) <= 1e-9 * std::max(1.0, n)) return static_cast<std::int64_t>(rounded);
  return static_cast<std::int64_t>(std::ceil(n));
}

void check_horizon(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw Error(ErrorKind::InvalidArgument, "end time must be positive");
  if (t_end / dt > 1e9) throw Error(ErrorKind::InvalidArgument, "more than 1e9 steps requested");
}

}  // namespace

TrajectoryLedger run(const PhsModel& model, const InputSignal& signal, const VectorXd& x0, double t_end, double dt) {
  check_horizon(t_end, dt);
  const auto& ports = model.layout().external;
  signal.validate(ports, t_end);
  const InputFunction u = [&](double t) { return signal.at(ports, t); };

  const RateFunction rates = model_rates(model, u);

  TrajectoryLedger ledger;
  ledger.state_labels = model.layout().storage;
  Rates current = rates(x0, 0.0);
  ledger.rows.push_back(current.rows.front());
  VectorXd x = x0;
  const std::int64_t n = step_count(t_end, dt);
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double t_next = i + 1 == n ? t_end : static_cast<double>(i + 1) * dt;
    StepResult s;
    current = midpoint(rates, x, current, t, t_next - t, 0, s);
    x = s.x;
    ledger.stored_work += s.stored_work;
    ledger.entropy_production += s.entropy_production;
    ledger.entropy_outflow += s.entropy_outflow;
    ledger.halvings += s.halvings;
    ledger.rows.push_back(current.rows.front());
  }
  return ledger;
}

CoupledResult couple_and_equilibrate(const PhsModel& a, const VectorXd& xa, const PhsModel& b, const VectorXd& xb,
                                     double conductance, double t_end, double dt) {
  check_horizon(t_end, dt);
  if (!(conductance >= 0.0) || !std::isfinite(conductance))
    throw Error(ErrorKind::InvalidArgument, "conductance must be nonnegative");
  for (const PhsModel* m : {&a, &b})
    if (m->layout().external.empty() || m->layout().external.front() != kEntropyFlowLabel)
      throw Error(ErrorKind::InvalidArgument, "coupled models need an entropy port");
  const Eigen::Index na = xa.size(), nb = xb.size();
  const Eigen::Index ua_size = a.layout().n_external(), ub_size = b.layout().n_external();

  const RateFunction rates = [&](const VectorXd& x, double t) {
    const VectorXd sa = x.head(na), sb = x.tail(nb);
    const Hamiltonian::Evaluation ha = a.hamiltonian().evaluate(sa), hb = b.hamiltonian().evaluate(sb);
    Rates r;
    r.gap = ha.temperature - hb.temperature;
    r.flow = conductance * r.gap;
    VectorXd ua = VectorXd::Zero(ua_size), ub = VectorXd::Zero(ub_size);
    ua(0) = r.flow / ha.temperature;
    ub(0) = -r.flow / hb.temperature;
    const PortEvaluation pa = a.evaluate(sa, ua, ha), pb = b.evaluate(sb, ub, hb);
    r.x_dot.resize(na + nb);
    r.x_dot << pa.x_dot, pb.x_dot;
    r.P_s = pa.power.P_s + pb.power.P_s;
    r.sigma_i = pa.sigma_i + pb.sigma_i;
    r.sigma_ext = pa.sigma_ext + pb.sigma_ext;
    r.rows.push_back(make_row(pa, sa, a.layout().n_storage(), t));
    r.rows.push_back(make_row(pb, sb, b.layout().n_storage(), t));
    return r;
  };

  CoupledResult out;
  out.a.state_labels = a.layout().storage;
  out.b.state_labels = b.layout().storage;
  out.min_flow_gap_product = std::numeric_limits<double>::infinity();
  auto record = [&](const Rates& r) {
    out.a.rows.push_back(r.rows[0]);
    out.b.rows.push_back(r.rows[1]);
    out.heat_flow.push_back(r.flow);
    out.min_flow_gap_product = std::min(out.min_flow_gap_product, r.flow * r.gap);
    out.final_gap = std::abs(r.gap);
    return r.rows[0].energy + r.rows[1].energy;
  };

  VectorXd x(na + nb);
  x << xa, xb;
  Rates current = rates(x, 0.0);
  out.initial_energy = record(current);
  out.final_energy = out.initial_energy;
  double entropy = xa(0) + xb(0);
  const std::int64_t n = step_count(t_end, dt);
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double t_next = i + 1 == n ? t_end : static_cast<double>(i + 1) * dt;
    StepResult s;
    current = midpoint(rates, x, current, t, t_next - t, 0, s);
    x = s.x;
    out.a.stored_work += s.stored_work;
    out.a.halvings += s.halvings;
    out.final_energy = record(current);
    const double total = x(0) + x(na);
    if (total < entropy - 1e-14 * std::max(1.0, std::abs(entropy))) out.entropy_nondecreasing = false;
    entropy = total;
  }
  out.energy_drift = std::abs(out.final_energy - out.initial_energy) /
                     std::max(std::abs(out.initial_energy), std::numeric_limits<double>::min());
  const double Ta = out.a.rows.back().efforts(0), Tb = out.b.rows.back().efforts(0);
  out.equilibrated = out.final_gap <= 1e-6 * std::max(Ta, Tb);
  return out;
}

}  // namespace mphs
