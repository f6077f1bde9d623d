#include <algorithm>

#include "mphs/error.hpp"
#include "mphs/labeled.hpp"

namespace mphs {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::AlphabetMismatch: return "AlphabetMismatch";
    case ErrorKind::EmptyAccessibleSet: return "EmptyAccessibleSet";
    case ErrorKind::ZeroProbability: return "ZeroProbability";
    case ErrorKind::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::UndefinedTemperature: return "UndefinedTemperature";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingIntensive: return "MissingIntensive";
    case ErrorKind::EntropyOutOfRange: return "EntropyOutOfRange";
    case ErrorKind::BranchAmbiguity: return "BranchAmbiguity";
    case ErrorKind::NotSkewSymmetric: return "NotSkewSymmetric";
    case ErrorKind::NonpositiveTemperature: return "NonpositiveTemperature";
    case ErrorKind::PassivityViolation: return "PassivityViolation";
    case ErrorKind::AlgebraicLoop: return "AlgebraicLoop";
    case ErrorKind::StateOutOfDomain: return "StateOutOfDomain";
    case ErrorKind::ScenarioError: return "ScenarioError";
  }
  return "Unknown";
}

LabeledVector::LabeledVector(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  if (labels_.size() != values_.size())
    throw Error(ErrorKind::DimensionMismatch, "label and value counts differ");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    for (std::size_t j = i + 1; j < labels_.size(); ++j)
      if (labels_[i] == labels_[j]) throw Error(ErrorKind::InvalidArgument, "duplicate label '" + labels_[i] + "'");
}

LabeledVector::LabeledVector(std::initializer_list<std::pair<std::string, double>> items) {
  for (const auto& [label, value] : items) set(label, value);
}

std::optional<std::size_t> LabeledVector::index_of(const std::string& label) const noexcept {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

double LabeledVector::at(const std::string& label) const {
  if (auto i = index_of(label)) return values_[*i];
  throw Error(ErrorKind::InvalidArgument, "no entry labeled '" + label + "'");
}

std::optional<double> LabeledVector::find(const std::string& label) const noexcept {
  if (auto i = index_of(label)) return values_[*i];
  return std::nullopt;
}

void LabeledVector::set(const std::string& label, double value) {
  if (auto i = index_of(label)) {
    values_[*i] = value;
    return;
  }
  labels_.push_back(label);
  values_.push_back(value);
}

}  // namespace mphs
