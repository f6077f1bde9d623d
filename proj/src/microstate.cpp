#include "mphs/microstate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "mphs/error.hpp"

namespace mphs {

Alphabet::Alphabet(std::string name, std::vector<Symbol> symbols)
    : name_(std::move(name)), symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw Error(ErrorKind::InvalidArgument, "alphabet '" + name_ + "' has no symbols");
  if (symbols_.size() > std::numeric_limits<Letter>::max())
    throw Error(ErrorKind::InvalidArgument, "alphabet '" + name_ + "' is too large");
  std::set<std::string> seen;
  for (const auto& s : symbols_)
    if (!seen.insert(s.name).second)
      throw Error(ErrorKind::InvalidArgument, "alphabet '" + name_ + "' repeats token '" + s.name + "'");
}

Alphabet Alphabet::spins() { return Alphabet("spin", {{"down", -1.0}, {"up", 1.0}}); }

std::optional<std::size_t> Alphabet::index_of(std::string_view token) const noexcept {
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i].name == token) return i;
  return std::nullopt;
}

Microstate::Microstate(AlphabetPtr alphabet, std::vector<Letter> letters)
    : alphabet_(std::move(alphabet)), letters_(std::move(letters)) {
  if (!alphabet_) throw Error(ErrorKind::InvalidArgument, "microstate without alphabet");
  for (Letter l : letters_)
    if (l >= alphabet_->size())
      throw Error(ErrorKind::InvalidArgument, "letter index outside alphabet '" + alphabet_->name() + "'");
}

Microstate Microstate::from_values(AlphabetPtr alphabet, std::span<const double> values) {
  std::vector<Letter> letters;
  letters.reserve(values.size());
  for (double v : values) {
    auto syms = alphabet->symbols();
    auto it = std::find_if(syms.begin(), syms.end(), [v](const Symbol& s) { return s.value == v; });
    if (it == syms.end()) {
      std::ostringstream os;
      os << "value " << v << " matches no symbol of '" << alphabet->name() << "'";
      throw Error(ErrorKind::InvalidArgument, os.str());
    }
    letters.push_back(static_cast<Letter>(it - syms.begin()));
  }
  return Microstate(std::move(alphabet), std::move(letters));
}

std::vector<double> Microstate::values() const {
  std::vector<double> out(letters_.size());
  for (std::size_t i = 0; i < letters_.size(); ++i) out[i] = alphabet_->symbol(letters_[i]).value;
  return out;
}

std::string Microstate::to_string() const {
  if (letters_.empty()) return "()";
  std::string out = "(";
  for (std::size_t i = 0; i < letters_.size(); ++i) {
    if (i) out += ',';
    out += alphabet_->symbol(letters_[i]).name;
  }
  return out + ")";
}

bool operator==(const Microstate& a, const Microstate& b) {
  if (a.alphabet_ != b.alphabet_ && *a.alphabet_ != *b.alphabet_) return false;
  return a.letters_ == b.letters_;
}

Microstate concat(const Microstate& a, const Microstate& b) {
  if (a.alphabet() != b.alphabet() && *a.alphabet() != *b.alphabet())
    throw Error(ErrorKind::AlphabetMismatch,
                "cannot concatenate words over '" + a.alphabet()->name() + "' and '" + b.alphabet()->name() + "'");
  std::vector<Letter> letters(a.letters().begin(), a.letters().end());
  letters.insert(letters.end(), b.letters().begin(), b.letters().end());
  return Microstate(a.alphabet(), std::move(letters));
}

std::optional<std::uint64_t> word_count(std::size_t alphabet_size, std::size_t length) noexcept {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < length; ++i) {
    if (alphabet_size != 0 && n > std::numeric_limits<std::uint64_t>::max() / alphabet_size) return std::nullopt;
    n *= alphabet_size;
  }
  return n;
}

namespace {

std::uint64_t checked_count(const Alphabet& alphabet, std::size_t length, std::uint64_t budget) {
  auto n = word_count(alphabet.size(), length);
  if (!n || *n > budget) {
    std::ostringstream os;
    os << alphabet.size() << "^" << length << " words exceed the enumeration budget of " << budget;
    throw Error(ErrorKind::BudgetExceeded, os.str());
  }
  return *n;
}

// Word number `index` in lexicographic order: base-|P| digits, most
// significant first.
void decode_word(std::uint64_t index, std::size_t base, std::span<Letter> out) {
  for (std::size_t pos = out.size(); pos-- > 0;) {
    out[pos] = static_cast<Letter>(index % base);
    index /= base;
  }
}

}  // namespace

WordStream::WordStream(AlphabetPtr alphabet, std::size_t length, std::uint64_t budget)
    : alphabet_(std::move(alphabet)), letters_(length, 0), count_(checked_count(*alphabet_, length, budget)) {}

const Microstate* WordStream::next() {
  if (emitted_ == count_) return nullptr;
  if (emitted_ > 0) {
    // odometer: bump the last position, carrying leftwards
    for (std::size_t pos = letters_.size(); pos-- > 0;) {
      if (++letters_[pos] < alphabet_->size()) break;
      letters_[pos] = 0;
    }
  }
  ++emitted_;
  current_.emplace(alphabet_, letters_);
  return &*current_;
}

std::vector<Microstate> enumerate_words(AlphabetPtr alphabet, std::size_t length, std::uint64_t budget) {
  WordStream stream(std::move(alphabet), length, budget);
  std::vector<Microstate> out;
  out.reserve(stream.count());
  while (const Microstate* m = stream.next()) out.push_back(*m);
  return out;
}

namespace functions {

CharFunction word_length(std::string label) {
  return {std::move(label), [](const Microstate& m) { return static_cast<double>(m.length()); }, true};
}

CharFunction weighted_sum(std::string label, std::vector<double> weights) {
  return {std::move(label),
          [weights = std::move(weights)](const Microstate& m) {
            if (weights.size() != m.alphabet()->size())
              throw Error(ErrorKind::DimensionMismatch, "weight count differs from alphabet size");
            double sum = 0.0;
            for (Letter l : m.letters()) sum += weights[l];
            return sum;
          },
          true};
}

CharFunction symbol_value_sum(std::string label) {
  return {std::move(label),
          [](const Microstate& m) {
            double sum = 0.0;
            for (std::size_t i = 0; i < m.length(); ++i) sum += m.value(i);
            return sum;
          },
          true};
}

CharFunction quadratic_coupling(std::string label, Eigen::MatrixXd coupling) {
  if (coupling.rows() != coupling.cols())
    throw Error(ErrorKind::DimensionMismatch, "coupling matrix must be square");
  const bool vanishing = coupling.size() == 0 || coupling.cwiseAbs().maxCoeff() == 0.0;
  return {std::move(label),
          [J = std::move(coupling)](const Microstate& m) {
            const auto n = static_cast<Eigen::Index>(m.length());
            if (n > J.rows())
              throw Error(ErrorKind::DimensionMismatch, "word longer than the coupling matrix dimension");
            double e = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
              const double si = m.value(static_cast<std::size_t>(i));
              for (Eigen::Index j = 0; j < n; ++j) e += si * J(i, j) * m.value(static_cast<std::size_t>(j));
            }
            return -0.5 * e;
          },
          vanishing};
}

CharFunction cylinder_volume(std::string label, double area, std::vector<double> heights) {
  if (!(area > 0.0)) throw Error(ErrorKind::InvalidArgument, "cylinder base area must be positive");
  return {std::move(label),
          [area, heights = std::move(heights)](const Microstate& m) {
            if (heights.size() != m.alphabet()->size())
              throw Error(ErrorKind::DimensionMismatch, "height count differs from alphabet size");
            double h = 0.0;
            for (std::size_t i = 0; i < m.length(); ++i) h = i == 0 ? heights[m.letters()[i]] : std::max(h, heights[m.letters()[i]]);
            return area * h;
          },
          false};
}

CharFunction linear_combination(std::string label, std::vector<CharFunction> terms, std::vector<double> coefficients) {
  if (terms.size() != coefficients.size() || terms.empty())
    throw Error(ErrorKind::InvalidArgument, "linear combination needs one coefficient per term");
  bool extensive = true;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!std::isfinite(coefficients[i])) throw Error(ErrorKind::InvalidArgument, "non-finite coefficient");
    extensive = extensive && (terms[i].declared_extensive || coefficients[i] == 0.0);
  }
  return {std::move(label),
          [terms = std::move(terms), c = std::move(coefficients)](const Microstate& m) {
            double v = 0.0;
            for (std::size_t i = 0; i < terms.size(); ++i)
              if (c[i] != 0.0) v += c[i] * terms[i](m);
            return v;
          },
          extensive};
}

}  // namespace functions

AdmissibleSet AdmissibleSet::interval(double lo, double hi) {
  if (!(lo <= hi)) throw Error(ErrorKind::InvalidArgument, "interval bounds out of order");
  AdmissibleSet s;
  s.kind_ = Kind::Interval;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

AdmissibleSet AdmissibleSet::finite(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "empty admissible value set");
  AdmissibleSet s;
  s.kind_ = Kind::Finite;
  s.values_ = std::move(values);
  return s;
}

AdmissibleSet AdmissibleSet::predicate(std::function<bool(double)> membership, std::string description) {
  AdmissibleSet s;
  s.kind_ = Kind::Predicate;
  s.membership_ = std::move(membership);
  s.description_ = std::move(description);
  return s;
}

bool AdmissibleSet::contains(double v) const {
  switch (kind_) {
    case Kind::Interval:
      return v >= lo_ && v <= hi_;
    case Kind::Finite:
      // function values are floating sums; allow rounding noise
      return std::any_of(values_.begin(), values_.end(),
                         [v](double x) { return std::abs(v - x) <= 1e-12 * std::max(1.0, std::abs(x)); });
    case Kind::Predicate:
      return membership_(v);
  }
  return false;
}

std::string AdmissibleSet::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Interval: os << "[" << lo_ << ", " << hi_ << "]"; break;
    case Kind::Finite:
      os << "{";
      for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? ", " : "") << values_[i];
      os << "}";
      break;
    case Kind::Predicate: os << description_; break;
  }
  return os.str();
}

void ConstraintSpec::validate(std::span<const CharFunction> functions) const {
  auto declared = [&](const std::string& label) {
    return std::any_of(functions.begin(), functions.end(), [&](const CharFunction& f) { return f.label == label; });
  };
  for (const auto& [label, set] : fixed) {
    if (!declared(label)) throw Error(ErrorKind::InvalidArgument, "fixed constraint on undeclared function '" + label + "'");
    if (free.contains(label))
      throw Error(ErrorKind::InvalidArgument, "function '" + label + "' is both fixed and free");
  }
  for (std::size_t i = 0; i < free.size(); ++i) {
    const auto& label = free.label(i);
    if (!declared(label)) throw Error(ErrorKind::InvalidArgument, "free target on undeclared function '" + label + "'");
    if (!std::isfinite(free.value(i)))
      throw Error(ErrorKind::InvalidArgument, "free target for '" + label + "' is not finite");
  }
  for (std::size_t i = 0; i < functions.size(); ++i)
    for (std::size_t j = i + 1; j < functions.size(); ++j)
      if (functions[i].label == functions[j].label)
        throw Error(ErrorKind::InvalidArgument, "function label '" + functions[i].label + "' declared twice");
}

std::size_t AccessibleSet::function_index(std::string_view label) const {
  for (std::size_t i = 0; i < functions_.size(); ++i)
    if (functions_[i].label == label) return i;
  throw Error(ErrorKind::InvalidArgument, "no function labeled '" + std::string(label) + "'");
}

bool AccessibleSet::has_function(std::string_view label) const noexcept {
  return std::any_of(functions_.begin(), functions_.end(), [&](const CharFunction& f) { return f.label == label; });
}

std::span<const Letter> AccessibleSet::letters(std::size_t i) const {
  if (i >= size()) throw Error(ErrorKind::InvalidArgument, "microstate index out of range");
  return std::span<const Letter>(letters_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

Microstate AccessibleSet::microstate(std::size_t i) const {
  auto l = letters(i);
  return Microstate(alphabet_, std::vector<Letter>(l.begin(), l.end()));
}

namespace {

struct FilterChunk {
  std::vector<Letter> letters;
  std::vector<std::size_t> lengths;
  std::vector<std::vector<double>> values;
};

// Filters words [first, last) of one length; keeps accepted words in order.
void filter_range(const AlphabetPtr& alphabet, std::size_t length, std::uint64_t first, std::uint64_t last,
                  const std::vector<CharFunction>& functions, const std::vector<std::size_t>& fixed_index,
                  const std::vector<const AdmissibleSet*>& fixed_sets, const ConstraintSpec& spec,
                  FilterChunk& out) {
  std::vector<Letter> buffer(length);
  out.values.resize(functions.size());
  std::vector<double> row(functions.size());
  for (std::uint64_t idx = first; idx < last; ++idx) {
    decode_word(idx, alphabet->size(), buffer);
    Microstate m(alphabet, buffer);
    bool accepted = true;
    for (std::size_t c = 0; c < fixed_index.size() && accepted; ++c)
      accepted = fixed_sets[c]->contains(functions[fixed_index[c]](m));
    for (auto it = spec.word_constraints.begin(); it != spec.word_constraints.end() && accepted; ++it)
      accepted = it->second(m);
    if (!accepted) continue;
    for (std::size_t f = 0; f < functions.size(); ++f) out.values[f].push_back(functions[f](m));
    out.letters.insert(out.letters.end(), buffer.begin(), buffer.end());
    out.lengths.push_back(length);
  }
}

}  // namespace

AccessibleSet accessible_set(AlphabetPtr alphabet, std::vector<CharFunction> functions, const ConstraintSpec& spec,
                             LengthRange lengths, const EnumerationOptions& options) {
  if (!alphabet) throw Error(ErrorKind::InvalidArgument, "accessible set without alphabet");
  if (lengths.min > lengths.max) throw Error(ErrorKind::InvalidArgument, "length range is empty");
  spec.validate(functions);

  std::uint64_t total = 0;
  for (std::size_t len = lengths.min; len <= lengths.max; ++len) {
    auto n = word_count(alphabet->size(), len);
    if (!n || *n > options.budget - total) {
      std::ostringstream os;
      os << "lengths " << lengths.min << ".." << lengths.max << " over " << alphabet->size()
         << " symbols exceed the enumeration budget of " << options.budget;
      throw Error(ErrorKind::BudgetExceeded, os.str());
    }
    total += *n;
  }

  std::vector<std::size_t> fixed_index;
  std::vector<const AdmissibleSet*> fixed_sets;
  for (const auto& [label, set] : spec.fixed) {
    auto it = std::find_if(functions.begin(), functions.end(), [&](const CharFunction& f) { return f.label == label; });
    fixed_index.push_back(static_cast<std::size_t>(it - functions.begin()));
    fixed_sets.push_back(&set);
  }

  AccessibleSet result;
  result.alphabet_ = alphabet;
  result.spec_ = spec;
  result.values_.resize(functions.size());

  const unsigned threads = std::max(1u, options.threads);
  for (std::size_t len = lengths.min; len <= lengths.max; ++len) {
    const std::uint64_t n = *word_count(alphabet->size(), len);
    const std::uint64_t parts = std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, n / 4096));
    std::vector<FilterChunk> chunks(parts);
    auto bounds = [&](std::uint64_t p) { return n * p / parts; };
    if (parts == 1) {
      filter_range(alphabet, len, 0, n, functions, fixed_index, fixed_sets, spec, chunks[0]);
    } else {
      std::vector<std::thread> workers;
      for (std::uint64_t p = 0; p < parts; ++p)
        workers.emplace_back([&, p] {
          filter_range(alphabet, len, bounds(p), bounds(p + 1), functions, fixed_index, fixed_sets, spec, chunks[p]);
        });
      for (auto& w : workers) w.join();
    }
    for (auto& chunk : chunks) {
      result.letters_.insert(result.letters_.end(), chunk.letters.begin(), chunk.letters.end());
      for (std::size_t l : chunk.lengths) result.offsets_.push_back(result.offsets_.back() + l);
      for (std::size_t f = 0; f < functions.size(); ++f)
        result.values_[f].insert(result.values_[f].end(), chunk.values[f].begin(), chunk.values[f].end());
    }
  }

  if (result.size() == 0) {
    std::ostringstream os;
    os << "no word of length " << lengths.min << ".." << lengths.max << " satisfies";
    for (const auto& [label, set] : spec.fixed) os << " " << label << " in " << set.describe();
    throw Error(ErrorKind::EmptyAccessibleSet, os.str());
  }
  result.functions_ = std::move(functions);
  return result;
}

ExtensivityReport check_extensivity(const CharFunction& f, const AlphabetPtr& alphabet, std::size_t samples,
                                    std::uint64_t seed, std::size_t max_total_length) {
  if (samples == 0) throw Error(ErrorKind::InvalidArgument, "extensivity check needs at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> total_len(0, max_total_length);
  std::uniform_int_distribution<Letter> letter(0, static_cast<Letter>(alphabet->size() - 1));

  ExtensivityReport report;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t total = total_len(rng);
    const std::size_t split = std::uniform_int_distribution<std::size_t>(0, total)(rng);
    std::vector<Letter> a(split), b(total - split);
    for (auto& l : a) l = letter(rng);
    for (auto& l : b) l = letter(rng);
    Microstate m1(alphabet, std::move(a)), m2(alphabet, std::move(b));
    const Microstate joined = concat(m1, m2);
    const double f12 = f(joined), f1 = f(m1), f2 = f(m2);
    ++report.pairs_checked;
    if (std::abs(f12 - f1 - f2) > 1e-12 * std::max(1.0, std::abs(f12))) {
      report.passed = false;
      report.counterexample = ExtensivityCounterexample{m1, m2, f12, f1, f2};
      break;
    }
  }
  return report;
}

}  // namespace mphs
