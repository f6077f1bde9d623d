// Energy representation: inversion of the entropy S(E, theta_x) into
// E(S, theta_x), the effort vector grad E = [T, T lambda_i] and homogeneity.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mphs/ensembles.hpp"
#include "mphs/labeled.hpp"
#include "mphs/maxent.hpp"

namespace mphs {

/// Entropy and multipliers at one (E, theta_x) point.
struct EntropyPoint {
  double entropy = 0.0;
  double lambda_energy = 0.0;
  LabeledVector lambda_extra;  // aligned with the model's extra labels
};

/// Entropy representation of a system, enumerated or analytic.
class EntropyModel {
 public:
  virtual ~EntropyModel() = default;

  virtual InfoConstant k() const = 0;
  /// Labels of theta_x, the free quantities other than the energy.
  virtual const std::vector<std::string>& extra_labels() const = 0;

  /// Throws TargetOutOfRange when (E, extras) is not interior-attainable.
  virtual EntropyPoint evaluate(double energy, const LabeledVector& extras) const = 0;

  /// Open interval of attainable mean energies (bounds may be infinite).
  virtual std::pair<double, double> energy_range(const LabeledVector& extras) const = 0;

  /// (E, S) where S is maximal over E at fixed extras; nullopt when S grows
  /// without bound.
  virtual std::optional<std::pair<double, double>> entropy_peak(const LabeledVector& extras) const = 0;

  /// Declared degree-1 homogeneity of E(x).
  virtual bool homogeneous() const = 0;

  /// Closed-form E(S, extras) when one exists.
  virtual std::optional<double> closed_form_energy(double /*entropy*/, const LabeledVector& /*extras*/) const {
    return std::nullopt;
  }
};

using EntropyModelPtr = std::shared_ptr<const EntropyModel>;

/// Maximum-entropy model over an accessible set. The energy and every extra
/// label must be free functions of the set. Multiplier solves are warm-started
/// from the previous solve (mutex guarded).
class EnumeratedEntropyModel final : public EntropyModel {
 public:
  EnumeratedEntropyModel(AccessibleSetPtr set, std::string energy_label, std::vector<std::string> extra_labels,
                         InfoConstant k, SolverOptions options = {}, bool homogeneous = false);

  InfoConstant k() const override { return k_; }
  const std::vector<std::string>& extra_labels() const override { return extra_labels_; }
  EntropyPoint evaluate(double energy, const LabeledVector& extras) const override;
  std::pair<double, double> energy_range(const LabeledVector& extras) const override;
  std::optional<std::pair<double, double>> entropy_peak(const LabeledVector& extras) const override;
  bool homogeneous() const override { return homogeneous_; }

  const AccessibleSetPtr& set() const noexcept { return set_; }
  const std::string& energy_label() const noexcept { return energy_label_; }
  /// Full solution at (E, extras).
  EquilibriumSolution solve(double energy, const LabeledVector& extras) const;

 private:
  LabeledVector targets(double energy, const LabeledVector& extras) const;

  AccessibleSetPtr set_;
  std::string energy_label_;
  std::vector<std::string> extra_labels_;
  InfoConstant k_;
  SolverOptions options_;
  bool homogeneous_;
  double energy_min_, energy_max_;

  mutable std::mutex mutex_;
  mutable std::optional<LabeledVector> warm_;
  mutable std::map<std::vector<double>, std::pair<double, double>> peaks_;
};

/// Analytic ideal gas S(E, N, V). `extra_labels` is a subset of
/// {"count", "volume"}; quantities not in the state are held at the model's
/// N and V.
class IdealGasEntropyModel final : public EntropyModel {
 public:
  IdealGasEntropyModel(IdealGasModel model, std::vector<std::string> extra_labels);

  InfoConstant k() const override { return model_.k; }
  const std::vector<std::string>& extra_labels() const override { return extra_labels_; }
  EntropyPoint evaluate(double energy, const LabeledVector& extras) const override;
  std::pair<double, double> energy_range(const LabeledVector&) const override;
  std::optional<std::pair<double, double>> entropy_peak(const LabeledVector&) const override { return std::nullopt; }
  bool homogeneous() const override { return model_.gibbs_correction; }
  std::optional<double> closed_form_energy(double entropy, const LabeledVector& extras) const override;

  const IdealGasModel& model() const noexcept { return model_; }
  /// The model with N and V taken from the extras.
  IdealGasModel at(const LabeledVector& extras) const;

 private:
  IdealGasModel model_;
  std::vector<std::string> extra_labels_;
};

/// x = [S, theta_x].
struct MacroState {
  double entropy = 0.0;
  LabeledVector extras;
};

/// Which side of the entropy maximum the inversion works on. Bounded spectra
/// have S(E) increasing then decreasing.
enum class Branch { positive_temperature, unspecified };

struct EnergyEvaluation {
  double energy = 0.0;
  double temperature = 0.0;
  /// [T, T lambda_i] in state order.
  Eigen::VectorXd efforts;
  EntropyPoint point;
};

class EnergyFunction {
 public:
  explicit EnergyFunction(EntropyModelPtr model, Branch branch = Branch::positive_temperature);

  const EntropyModel& model() const noexcept { return *model_; }
  const EntropyModelPtr& model_ptr() const noexcept { return model_; }
  Branch branch() const noexcept { return branch_; }

  /// Inverse of S(., extras) on the T > 0 branch, to 1e-10 relative in S.
  /// Throws EntropyOutOfRange, BranchAmbiguity.
  double energy_of_entropy(double entropy, const LabeledVector& extras) const;

  /// Energy, temperature and efforts at x. Throws UndefinedTemperature at
  /// the entropy maximum.
  EnergyEvaluation evaluate(const MacroState& x) const;

  double operator()(const MacroState& x) const { return energy_of_entropy(x.entropy, x.extras); }

 private:
  EntropyModelPtr model_;
  Branch branch_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<double>, std::pair<double, double>> last_;  // extras -> (S, E)
};

double entropy_of_energy(const EntropyModel& model, double energy, const LabeledVector& extras);
double energy_of_entropy(const EnergyFunction& fn, double entropy, const LabeledVector& extras);
/// [T, (T lambda_i)] in state order.
Eigen::VectorXd effort_vector(const EnergyFunction& fn, const MacroState& x);

struct HomogeneityReport {
  double gamma = 1.0;
  double energy = 0.0;         // E(x)
  double scaled_energy = 0.0;  // E(gamma x)
  double deviation = 0.0;      // |E(gamma x) - gamma E(x)| / |gamma E(x)|
  bool declared_homogeneous = false;
  bool passed = false;         // deviation <= 1e-8
};

HomogeneityReport homogeneity_check(const EnergyFunction& fn, const MacroState& x, double gamma);

}  // namespace mphs
