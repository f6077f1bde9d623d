// Scenario files: a versioned JSON document describing the system, its
// constraints and optionally a port-Hamiltonian model and a simulation.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mphs/ensembles.hpp"
#include "mphs/maxent.hpp"
#include "mphs/microstate.hpp"
#include "mphs/phs.hpp"
#include "mphs/sim.hpp"

namespace mphs::cli {

using Json = nlohmann::ordered_json;

/// Command-line overrides applied while loading.
struct Overrides {
  std::optional<double> k;
  std::optional<std::uint64_t> budget;
  unsigned threads = 1;
};

/// Read-only view of a JSON node that knows its path for diagnostics.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const Json& json() const noexcept { return *j_; }
  const std::string& path() const noexcept { return path_; }
  bool has(std::string_view key) const;
  Node at(std::string_view key) const;  // required member
  std::optional<Node> find(std::string_view key) const;
  Node operator[](std::size_t i) const;
  std::size_t size() const;

  double number() const;
  double positive() const;
  std::uint64_t count() const;
  bool boolean() const;
  std::string string() const;
  std::vector<double> numbers() const;
  std::vector<std::string> strings() const;
  Eigen::MatrixXd matrix() const;

  bool is_object() const { return j_->is_object(); }
  bool is_array() const { return j_->is_array(); }
  bool is_string() const { return j_->is_string(); }
  bool is_number() const { return j_->is_number(); }

  /// Throws ScenarioError naming this node.
  [[noreturn]] void fail(const std::string& message) const;
  /// Rejects members outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const;

 private:
  const Json* j_;
  std::string path_;
};

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::of(EnsembleTag::canonical);
  Intensives intensives;
  IntensiveLabels labels;
};

struct Scenario {
  std::string origin;
  Json doc;

  InfoConstant k{1.0};
  std::uint64_t seed = 1;

  // Exactly one system kind.
  AccessibleSetPtr set;
  std::optional<IdealGasModel> ideal_gas;

  std::optional<LabeledVector> free;  // free targets
  std::optional<EnsembleSpec> ensemble;
  std::optional<std::vector<double>> probabilities;
  std::vector<double> sweep_T;  // ideal gas temperatures

  Node root() const { return Node(doc, ""); }
};

/// Throws Error(ScenarioError) with "<origin>:<line>:<column>" for syntax
/// errors and the JSON path for schema errors.
Scenario parse_scenario(std::string_view text, const std::string& origin, const Overrides& overrides = {});
Scenario load_scenario(const std::string& path, const Overrides& overrides = {});

/// Thermal part of the Hamiltonian for the scenario's system, with the given
/// extra (non-energy) state labels.
EntropyModelPtr entropy_model(const Scenario& s, const std::vector<std::string>& extras,
                              const std::string& energy_label);

struct SimulationSetup {
  std::shared_ptr<PhsModel> model;
  Eigen::VectorXd x0;
  InputSignal signal;
  std::vector<std::string> driven_ports;
  double dt = 0.0;
  double t_end = 0.0;
  bool irreversible = false;
  // coupling experiment with an identical copy
  std::shared_ptr<PhsModel> partner;
  Eigen::VectorXd x0_partner;
  double conductance = 0.0;
  // tolerances of the ledger checks
  double power_tolerance = 1e-9;
  double energy_tolerance = 1e-6;
  double drift_tolerance = 1e-8;
  double gap_tolerance = 1e-6;  // relative to the larger final temperature
};

SimulationSetup simulation_setup(const Scenario& s);

/// The model of the scenario's phs block alone.
std::shared_ptr<PhsModel> phs_model(const Scenario& s);

/// Skew-check input from the scenario: the phs structure's matrix and an
/// optional explicit "verify.matrix".
std::optional<Eigen::MatrixXd> injected_matrix(const Scenario& s);

}  // namespace mphs::cli
