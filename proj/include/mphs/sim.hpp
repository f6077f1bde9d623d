// Quasi-static trajectories: explicit midpoint integration of a PHS whose
// efforts come from a full re-equilibration at every evaluation, with energy
// and entropy ledgers.
#pragma once

#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mphs/phs.hpp"

namespace mphs {

/// External port flows as functions of time. Ports without a signal are 0.
class InputSignal {
 public:
  using Function = std::function<double(double)>;

  void set(const std::string& label, Function f);
  void set_constant(const std::string& label, double value);
  /// Piecewise-linear through (times, values); times strictly increasing.
  void set_samples(const std::string& label, std::vector<double> times, std::vector<double> values);

  /// Throws InvalidArgument when a signal names an unknown port or a sampled
  /// signal does not cover [0, t_end].
  void validate(const std::vector<std::string>& ports, double t_end) const;

  Eigen::VectorXd at(const std::vector<std::string>& ports, double t) const;

 private:
  struct Samples {
    std::vector<double> times, values;
  };
  std::map<std::string, Function> functions_;
  std::map<std::string, Samples> samples_;
};

struct LedgerRow {
  double time = 0.0;
  Eigen::VectorXd state;
  Eigen::VectorXd efforts;  // storage efforts grad E
  double energy = 0.0;
  double P_s = 0.0, P_d = 0.0, P_ext = 0.0;
  double sigma_i = 0.0;
  double sigma_ext = 0.0;
  double balance_defect = 0.0;  // P_s + P_d + P_ext
  double power_scale = 0.0;     // sum of |e_j f_j|
};

struct TrajectoryLedger {
  std::vector<std::string> state_labels;
  std::vector<LedgerRow> rows;
  double stored_work = 0.0;         // integral of P_s dt at the midpoint stages
  double entropy_production = 0.0;  // integral of sigma_i dt
  double entropy_outflow = 0.0;     // integral of sigma_ext dt
  int halvings = 0;                 // step halvings over the run

  /// |E(end) - E(0) - integral P_s dt|.
  double energy_balance_defect() const;
  /// max over rows of |balance_defect| / max(power_scale, tiny).
  double max_relative_power_defect() const;
  double min_sigma_i() const;

  /// One row per entry; columns time, state, efforts, P_s, P_d, P_ext,
  /// sigma_i, sigma_ext, balance_defect in %.16e.
  void write_csv(std::ostream& os) const;
};

struct StepResult {
  Eigen::VectorXd x;
  double stored_work = 0.0;
  double entropy_production = 0.0;
  double entropy_outflow = 0.0;
  int halvings = 0;
};

using InputFunction = std::function<Eigen::VectorXd(double)>;

inline constexpr int kMaxHalvings = 20;

/// One explicit midpoint step from (x, t). A step whose evaluations leave the
/// attainable domain is split in halves, up to kMaxHalvings times, before
/// StateOutOfDomain is thrown.
StepResult step(const PhsModel& model, const Eigen::VectorXd& x, const InputFunction& u, double t, double dt);
StepResult step(const PhsModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt);

LedgerRow ledger_row(const PhsModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t);

/// Steps of dt (the last one shortened to land on t_end); one ledger row per
/// step plus the initial row.
TrajectoryLedger run(const PhsModel& model, const InputSignal& signal, const Eigen::VectorXd& x0, double t_end,
                     double dt);

struct CoupledResult {
  TrajectoryLedger a, b;
  std::vector<double> heat_flow;  // G (T_A - T_B) at each row, from A to B
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double energy_drift = 0.0;           // |E_end - E_0| / |E_0|
  double min_flow_gap_product = 0.0;   // min of flow (T_A - T_B)
  bool entropy_nondecreasing = true;
  double final_gap = 0.0;              // |T_A - T_B|
  bool equilibrated = false;           // final_gap <= 1e-6 max(T_A, T_B)
};

/// Two systems exchanging heat Q = G (T_A - T_B) through their entropy ports:
/// sigma_ext,A = Q / T_A, sigma_ext,B = -Q / T_B. Other ports stay at 0.
CoupledResult couple_and_equilibrate(const PhsModel& a, const Eigen::VectorXd& xa, const PhsModel& b,
                                     const Eigen::VectorXd& xb, double conductance, double t_end, double dt);

}  // namespace mphs
