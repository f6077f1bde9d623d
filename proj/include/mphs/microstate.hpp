// Particle alphabets, words over them (microstates), characterizing functions
// and the filtering of enumerated words into the accessible set.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mphs/labeled.hpp"

namespace mphs {

/// One particle-state value: an opaque token with a numeric payload
/// (spin value, occupation, height, ...).
struct Symbol {
  std::string name;
  double value = 0.0;

  bool operator==(const Symbol&) const = default;
};

class Alphabet {
 public:
  /// Throws InvalidArgument when symbols is empty or a token repeats.
  Alphabet(std::string name, std::vector<Symbol> symbols);

  /// {down = -1, up = +1}
  static Alphabet spins();

  const std::string& name() const noexcept { return name_; }
  std::span<const Symbol> symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  const Symbol& symbol(std::size_t i) const { return symbols_.at(i); }
  std::optional<std::size_t> index_of(std::string_view token) const noexcept;

  bool operator==(const Alphabet&) const = default;

 private:
  std::string name_;
  std::vector<Symbol> symbols_;
};

using AlphabetPtr = std::shared_ptr<const Alphabet>;
using Letter = std::uint16_t;

inline AlphabetPtr make_alphabet(Alphabet a) { return std::make_shared<const Alphabet>(std::move(a)); }

/// A word over an alphabet. The empty word is the monoid identity.
class Microstate {
 public:
  explicit Microstate(AlphabetPtr alphabet, std::vector<Letter> letters = {});

  /// Builds the word whose i-th symbol has payload values[i]; throws
  /// InvalidArgument when a value matches no symbol.
  static Microstate from_values(AlphabetPtr alphabet, std::span<const double> values);

  const AlphabetPtr& alphabet() const noexcept { return alphabet_; }
  std::span<const Letter> letters() const noexcept { return letters_; }
  std::size_t length() const noexcept { return letters_.size(); }
  bool empty() const noexcept { return letters_.empty(); }

  /// Payload of the symbol at a position.
  double value(std::size_t position) const { return alphabet_->symbol(letters_.at(position)).value; }
  std::vector<double> values() const;

  std::string to_string() const;

  friend bool operator==(const Microstate& a, const Microstate& b);

 private:
  AlphabetPtr alphabet_;
  std::vector<Letter> letters_;
};

/// Throws AlphabetMismatch when the words use different alphabets.
Microstate concat(const Microstate& a, const Microstate& b);

inline constexpr std::uint64_t kDefaultEnumerationBudget = std::uint64_t{1} << 26;

/// |alphabet|^length, or nullopt when it overflows 64 bits.
std::optional<std::uint64_t> word_count(std::size_t alphabet_size, std::size_t length) noexcept;

/// Lexicographic (by symbol index) enumeration of all words of one length.
class WordStream {
 public:
  /// Throws BudgetExceeded when |alphabet|^length > budget.
  WordStream(AlphabetPtr alphabet, std::size_t length,
             std::uint64_t budget = kDefaultEnumerationBudget);

  std::uint64_t count() const noexcept { return count_; }

  /// Next word, or nullptr once exhausted. The pointer is valid until the
  /// following call.
  const Microstate* next();

 private:
  AlphabetPtr alphabet_;
  std::vector<Letter> letters_;
  std::optional<Microstate> current_;
  std::uint64_t count_;
  std::uint64_t emitted_ = 0;
};

std::vector<Microstate> enumerate_words(AlphabetPtr alphabet, std::size_t length,
                                        std::uint64_t budget = kDefaultEnumerationBudget);

using Evaluator = std::function<double(const Microstate&)>;

/// Map from microstates to a real observable.
struct CharFunction {
  std::string label;
  Evaluator evaluate;
  bool declared_extensive = false;

  double operator()(const Microstate& m) const { return evaluate(m); }
};

/// Catalog of characterizing functions available to scenario files.
namespace functions {

/// Number of particles in the word. Extensive.
CharFunction word_length(std::string label = "count");

/// Sum of per-symbol weights (indexed like the alphabet). Extensive.
CharFunction weighted_sum(std::string label, std::vector<double> weights);

/// Sum of the symbol payloads. Extensive.
CharFunction symbol_value_sum(std::string label);

/// -1/2 s^T J s over the symbol payloads s. A word of length L < dim(J) sits on
/// the first L sites; longer words throw DimensionMismatch. Not extensive when J
/// has off-diagonal entries.
CharFunction quadratic_coupling(std::string label, Eigen::MatrixXd coupling);

/// area * max height over the word (0 for the empty word), heights indexed like
/// the alphabet. Not extensive.
CharFunction cylinder_volume(std::string label, double area, std::vector<double> heights);

/// sum_i c_i f_i(m). Extensive when every term with c_i != 0 is.
CharFunction linear_combination(std::string label, std::vector<CharFunction> terms, std::vector<double> coefficients);

}  // namespace functions

/// Admissible values of a fixed characterizing function.
class AdmissibleSet {
 public:
  /// Closed interval [lo, hi].
  static AdmissibleSet interval(double lo, double hi);
  static AdmissibleSet finite(std::vector<double> values);
  static AdmissibleSet singleton(double value) { return finite({value}); }
  static AdmissibleSet predicate(std::function<bool(double)> membership, std::string description);

  bool contains(double v) const;
  std::string describe() const;

 private:
  enum class Kind { Interval, Finite, Predicate };
  Kind kind_ = Kind::Finite;
  double lo_ = 0.0, hi_ = 0.0;
  std::vector<double> values_;
  std::function<bool(double)> membership_;
  std::string description_;
};

/// Constraint on a non-scalar property of the word (e.g. all particle
/// positions inside a region). Usable only as a fixed constraint.
using WordPredicate = std::function<bool(const Microstate&)>;

struct ConstraintSpec {
  std::map<std::string, AdmissibleSet> fixed;
  std::map<std::string, WordPredicate> word_constraints;
  /// Target means of the fluctuating functions, in declaration order.
  LabeledVector free;

  /// Throws InvalidArgument on overlapping or undeclared labels or non-finite
  /// targets.
  void validate(std::span<const CharFunction> functions) const;
};

struct LengthRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct EnumerationOptions {
  std::uint64_t budget = kDefaultEnumerationBudget;
  /// Worker threads for filtering; output order does not depend on it.
  unsigned threads = 1;
};

/// Materialized accessible microstates with cached function values. Immutable
/// after construction.
class AccessibleSet {
 public:
  std::size_t size() const noexcept { return offsets_.size() - 1; }
  const AlphabetPtr& alphabet() const noexcept { return alphabet_; }
  std::span<const CharFunction> functions() const noexcept { return functions_; }
  const ConstraintSpec& spec() const noexcept { return spec_; }

  /// Throws InvalidArgument for an undeclared label.
  std::size_t function_index(std::string_view label) const;
  bool has_function(std::string_view label) const noexcept;

  std::span<const double> values(std::size_t function) const { return values_.at(function); }
  std::span<const double> values(std::string_view label) const { return values(function_index(label)); }

  std::span<const Letter> letters(std::size_t i) const;
  Microstate microstate(std::size_t i) const;

 private:
  friend AccessibleSet accessible_set(AlphabetPtr, std::vector<CharFunction>, const ConstraintSpec&,
                                      LengthRange, const EnumerationOptions&);
  AccessibleSet() = default;

  AlphabetPtr alphabet_;
  std::vector<CharFunction> functions_;
  ConstraintSpec spec_;
  std::vector<Letter> letters_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::vector<double>> values_;
};

using AccessibleSetPtr = std::shared_ptr<const AccessibleSet>;

/// Words with lengths in `lengths` whose fixed functions take admissible
/// values. Throws EmptyAccessibleSet, BudgetExceeded or InvalidArgument.
AccessibleSet accessible_set(AlphabetPtr alphabet, std::vector<CharFunction> functions,
                             const ConstraintSpec& spec, LengthRange lengths,
                             const EnumerationOptions& options = {});

struct ExtensivityCounterexample {
  Microstate first;
  Microstate second;
  double value_joined;
  double value_first;
  double value_second;
};

struct ExtensivityReport {
  bool passed = true;
  std::size_t pairs_checked = 0;
  std::optional<ExtensivityCounterexample> counterexample;
};

/// Samples random word pairs with total length <= max_total_length and checks
/// f(m1.m2) == f(m1) + f(m2) to 1e-12 relative.
ExtensivityReport check_extensivity(const CharFunction& f, const AlphabetPtr& alphabet,
                                    std::size_t samples, std::uint64_t seed,
                                    std::size_t max_total_length = 6);

}  // namespace mphs
