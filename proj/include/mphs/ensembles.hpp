// Closed-form ensemble models: the standard experimental conditions, the
// analytic ideal gas and the Ising energy.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mphs/maxent.hpp"
#include "mphs/microstate.hpp"

namespace mphs {

enum class EnsembleTag {
  microcanonical,         // fixed E, N, V, S
  isoenthalpic_isobaric,  // fixed N, S; free E, V
  adiabatic_porous,       // fixed V, S; free E, N
  adiabatic_open,         // fixed S; free E, N, V
  canonical,              // fixed N, V; free E
  isothermal_isobaric,    // fixed N; free E, V
  grand_canonical,        // fixed V; free E, N
  unnamed_TPmu,           // free E, N, V
};

/// Roles of the characterizing functions named in an ensemble row.
enum class Quantity { energy, count, volume, surprisal };

const char* to_string(Quantity q) noexcept;

struct EnsembleKind {
  EnsembleTag tag;
  std::vector<Quantity> fixed;
  std::vector<Quantity> free;
  /// False for the insulated rows: surprisal fixed, uniform distribution.
  bool thermal_contact;

  static EnsembleKind of(EnsembleTag tag);
  static std::vector<EnsembleKind> all();

  std::string_view name() const noexcept;
  bool is_free(Quantity q) const noexcept;
};

/// Throws InvalidArgument for an unknown name.
EnsembleTag ensemble_tag_from_name(std::string_view name);
std::string_view ensemble_name(EnsembleTag tag) noexcept;

/// k ln(omega), omega >= 1.
double microcanonical_entropy(std::uint64_t omega, InfoConstant k);

struct IdealGasModel {
  double N = 1.0;
  double V = 1.0;       // m^3
  double m_atom = 1.0;  // kg
  double h = kPlanck;
  InfoConstant k{kBoltzmann};
  /// Subtract k ln(N!) from k ln Z (indistinguishable particles).
  bool gibbs_correction = false;

  /// Throws InvalidArgument unless N >= 1 and V, m_atom, h > 0.
  void validate() const;
};

/// k [N ln V + (3N/2) ln(2 pi m k T / h^2)], evaluated in log space.
double ideal_gas_log_partition(const IdealGasModel& model, double T);

struct IdealGasState {
  double E_bar;
  double S;
  double P;
};

/// E = (3/2) N k T, S = k ln Z + E/T, P = N k T / V.
IdealGasState ideal_gas_state(const IdealGasModel& model, double T);

struct IsingModel {
  Eigen::MatrixXd J;

  /// Throws InvalidArgument unless J is square, symmetric with zero diagonal.
  void validate() const;
};

/// -1/2 m^T J m. Throws DimensionMismatch unless the word length is dim(J).
double ising_energy(const Microstate& m, const IsingModel& model);

struct Intensives {
  std::optional<double> T;
  std::optional<double> P;
  std::optional<double> mu;
};

struct EnsembleValues {
  double F_e = 0.0;
  double F_n = 0.0;
  double F_v = 0.0;
};

/// Unnormalized log-weight of a microstate: canonical -F_e/(kT),
/// isothermal-isobaric -(F_e + P F_v)/(kT), grand-canonical -(F_e - mu F_n)/(kT),
/// unnamed_TPmu -(F_e + P F_v - mu F_n)/(kT); 0 for insulated rows.
/// Throws MissingIntensive or NonpositiveTemperature.
double ensemble_exponent(const EnsembleKind& kind, const Intensives& intensives, const EnsembleValues& values,
                         InfoConstant k);

/// Multipliers matching an ensemble row: lambda_e = -1/T, lambda_n = mu/T,
/// lambda_v = -P/T, keyed by `labels`. Empty for insulated rows.
LabeledVector ensemble_multipliers(const EnsembleKind& kind, const Intensives& intensives,
                                   const IntensiveLabels& labels = {});

/// Normalized ensemble_exponent weights over the set. Labels absent from the
/// set are only allowed for quantities the row does not use.
Distribution ensemble_distribution(const AccessibleSet& set, const EnsembleKind& kind, const Intensives& intensives,
                                   InfoConstant k, const IntensiveLabels& labels = {});

}  // namespace mphs
