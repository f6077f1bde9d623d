#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mphs {

/// Ordered (label, value) list. Order is significant: it fixes the layout of
/// multiplier vectors, state vectors and effort vectors.
class LabeledVector {
 public:
  LabeledVector() = default;
  LabeledVector(std::vector<std::string> labels, std::vector<double> values);
  LabeledVector(std::initializer_list<std::pair<std::string, double>> items);

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  const std::string& label(std::size_t i) const { return labels_.at(i); }
  double value(std::size_t i) const { return values_.at(i); }

  std::optional<std::size_t> index_of(const std::string& label) const noexcept;
  bool contains(const std::string& label) const noexcept { return index_of(label).has_value(); }

  /// Throws InvalidArgument when the label is absent.
  double at(const std::string& label) const;
  std::optional<double> find(const std::string& label) const noexcept;

  /// Appends, or overwrites an existing entry in place.
  void set(const std::string& label, double value);

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

}  // namespace mphs
