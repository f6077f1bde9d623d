// Port-Hamiltonian structure: skew-symmetric interconnection over
// (storage | dissipative | external) ports, the power balance, the reversible
// thermodynamic matrix and the irreversible construction with a converter.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mphs/energy.hpp"

namespace mphs {

enum class Segment { storage, dissipative, external };

struct BlockLayout {
  std::vector<std::string> storage;
  std::vector<std::string> dissipative;
  std::vector<std::string> external;

  Eigen::Index n_storage() const noexcept { return static_cast<Eigen::Index>(storage.size()); }
  Eigen::Index n_dissipative() const noexcept { return static_cast<Eigen::Index>(dissipative.size()); }
  Eigen::Index n_external() const noexcept { return static_cast<Eigen::Index>(external.size()); }
  Eigen::Index dim() const noexcept { return n_storage() + n_dissipative() + n_external(); }
  Eigen::Index offset(Segment s) const noexcept;
  Eigen::Index size(Segment s) const noexcept;
};

/// max |S + S^T| over all entries.
double skew_defect(const Eigen::MatrixXd& m);

class InterconnectionMatrix {
 public:
  /// Throws DimensionMismatch when S is not square of the layout's dimension,
  /// NotSkewSymmetric when skew_defect(S) > tol.
  static InterconnectionMatrix assemble(Eigen::MatrixXd S, BlockLayout layout, double tol = 1e-14);

  const Eigen::MatrixXd& matrix() const noexcept { return S_; }
  const BlockLayout& layout() const noexcept { return layout_; }
  Eigen::Index dim() const noexcept { return S_.rows(); }
  Eigen::MatrixXd block(Segment rows, Segment cols) const;

 private:
  InterconnectionMatrix(Eigen::MatrixXd S, BlockLayout layout) : S_(std::move(S)), layout_(std::move(layout)) {}

  Eigen::MatrixXd S_;
  BlockLayout layout_;
};

struct PowerBalance {
  double P_s = 0.0;
  double P_d = 0.0;
  double P_ext = 0.0;
  double total = 0.0;
};

/// f = S e split into storage, dissipative and external powers e_j^T f_j.
PowerBalance power_balance(const InterconnectionMatrix& S, const Eigen::VectorXd& e);

/// Flow-to-effort law of memoryless dissipative components.
struct DissipativeLaw {
  std::string name;
  Eigen::Index dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> z;
  bool passivity_declared = true;
};

namespace laws {

/// z(f) = R f; R must be symmetric positive semidefinite.
DissipativeLaw linear(Eigen::MatrixXd R);
/// z(f) = diag(r) f, r >= 0.
DissipativeLaw linear_resistor(std::vector<double> r);
/// Componentwise z(f)_i = sum_j c_j f_i^j.
DissipativeLaw polynomial(Eigen::Index dim, std::vector<double> coefficients);

}  // namespace laws

struct ConverterOutput {
  Eigen::VectorXd effort;  // [-sigma_i, z_d(f_d)]
  double sigma_i = 0.0;    // entropy production z_d(f_d)^T f_d / T_d
  double dissipated = 0.0; // z_d(f_d)^T f_d
};

/// Conservative augmentation of a dissipative law. The input flow is ordered
/// temperature first: w = [T_d, f_d] maps to [-sigma_i, z_d(f_d)], so that
/// z(w)^T w = 0 exactly.
class ConverterLaw {
 public:
  explicit ConverterLaw(DissipativeLaw law);

  const DissipativeLaw& law() const noexcept { return law_; }
  Eigen::Index dim() const noexcept { return law_.dim + 1; }

  /// Throws NonpositiveTemperature, PassivityViolation, DimensionMismatch.
  ConverterOutput operator()(const Eigen::VectorXd& w) const;

 private:
  DissipativeLaw law_;
};

ConverterLaw make_converter(DissipativeLaw law);

/// Blocks of the dissipative interconnection. Sizes: J_x (n_x0 x n_x0),
/// K (n_x0 x n_w0), G_x (n_x0 x n_u0), J_w (n_w0 x n_w0), G_w (n_w0 x n_u0),
/// J_y (n_u0 x n_u0). Empty matrices stand for zero blocks.
struct InterconnectionBlocks {
  Eigen::MatrixXd J_x, K, G_x, J_w, G_w, J_y;
};

/// Port labels of the non-thermal parts (x0, w0, u0).
struct PortLabels {
  std::vector<std::string> storage;
  std::vector<std::string> dissipative;
  std::vector<std::string> external;
};

/// Interconnection plus the law closing its dissipative ports.
struct PhsStructure {
  InterconnectionMatrix interconnection;
  /// Law for every dissipative port, converter form when present.
  std::optional<ConverterLaw> converter;
  std::optional<DissipativeLaw> plain_law;
  /// Optional state-dependent replacement of the matrix, revalidated at 1e-12.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> state_dependent;
};

inline const std::string kEntropyLabel = "S";
inline const std::string kConverterTemperatureLabel = "T_d";
inline const std::string kEntropyFlowLabel = "sigma_ext";

/// [[0, -I], [I, 0]] over (storage | external): x' = -u, y = grad E.
/// Entropy must come first.
PhsStructure build_reversible(const std::vector<std::string>& labels);

/// Dissipative matrix with storage [S, x0], dissipative w0, external
/// [sigma_ext, u0]; the law acts directly on w0.
PhsStructure build_dissipative(const InterconnectionBlocks& blocks, DissipativeLaw law, const PortLabels& labels);

/// Irreversible conservative matrix: storage [S, x0], dissipative [T_d, w0],
/// external [sigma_ext, u0]; the dissipated power is converted to entropy.
PhsStructure build_irreversible(const InterconnectionBlocks& blocks, DissipativeLaw law, const PortLabels& labels);

/// E(x) = E_thermo(S, theta_x) + 1/2 q^T Q q over state [S, theta_x, q].
class Hamiltonian {
 public:
  explicit Hamiltonian(std::shared_ptr<const EnergyFunction> thermal, std::vector<std::string> mechanical = {},
                       Eigen::MatrixXd Q = {});

  std::vector<std::string> labels() const;
  Eigen::Index dim() const noexcept;
  const EnergyFunction& thermal() const noexcept { return *thermal_; }

  MacroState macro_state(const Eigen::VectorXd& x) const;
  Eigen::VectorXd state(const MacroState& m, const Eigen::VectorXd& q = {}) const;

  struct Evaluation {
    double energy = 0.0;
    double temperature = 0.0;
    Eigen::VectorXd gradient;
  };
  Evaluation evaluate(const Eigen::VectorXd& x) const;

 private:
  std::shared_ptr<const EnergyFunction> thermal_;
  std::vector<std::string> mechanical_;
  Eigen::MatrixXd Q_;
};

struct PortEvaluation {
  double energy = 0.0;
  double temperature = 0.0;
  Eigen::VectorXd efforts;  // full e
  Eigen::VectorXd flows;    // full f = S e
  Eigen::VectorXd x_dot;
  Eigen::VectorXd y;
  PowerBalance power;
  double sigma_i = 0.0;
  double sigma_ext = 0.0;
};

class PhsModel {
 public:
  /// Storage labels must equal the Hamiltonian's labels. Throws
  /// AlgebraicLoop when dissipative ports feed back on themselves.
  PhsModel(PhsStructure structure, Hamiltonian hamiltonian);

  const PhsStructure& structure() const noexcept { return structure_; }
  const Hamiltonian& hamiltonian() const noexcept { return hamiltonian_; }
  const BlockLayout& layout() const noexcept { return structure_.interconnection.layout(); }

  /// Replaces T_d := T by a fixed converter temperature. This breaks the
  /// energy balance unless it equals T.
  void set_converter_temperature(std::optional<double> T_d) { converter_temperature_ = T_d; }

  PortEvaluation evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  /// Same, reusing an evaluation of the Hamiltonian at x.
  PortEvaluation evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Hamiltonian::Evaluation& h) const;

 private:
  PhsStructure structure_;
  Hamiltonian hamiltonian_;
  std::optional<double> converter_temperature_;
};

}  // namespace mphs
