#include <doctest.h>

#include <set>

#include "mphs/error.hpp"
#include "mphs/microstate.hpp"
#include "oracles.hpp"

using namespace mphs;

namespace {

AlphabetPtr dice() {
  return make_alphabet(Alphabet("die", {{"1", 1}, {"2", 2}, {"3", 3}, {"4", 4}, {"5", 5}, {"6", 6}}));
}

Microstate random_word(oracle::Rng& rng, const AlphabetPtr& a, std::size_t max_len) {
  const auto len = static_cast<std::size_t>(oracle::uniform_int(rng, 0, int(max_len)));
  std::vector<Letter> letters(len);
  for (auto& l : letters) l = static_cast<Letter>(oracle::uniform_int(rng, 0, int(a->size()) - 1));
  return Microstate(a, letters);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an exception");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("alphabet validation") {
  CHECK(kind_of([] { Alphabet("a", {}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { Alphabet("a", {{"x", 0}, {"x", 1}}); }) == ErrorKind::InvalidArgument);
  const auto s = Alphabet::spins();
  REQUIRE(s.size() == 2);
  CHECK(s.symbol(0).value == -1.0);
  CHECK(s.symbol(1).value == 1.0);
  CHECK(s.index_of("up").has_value());
  CHECK_FALSE(s.index_of("sideways").has_value());
}

TEST_CASE("concatenation is an associative monoid with the empty word as identity") {
  oracle::Rng rng(7);
  const auto a = dice();
  const Microstate empty(a);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_word(rng, a, 4), y = random_word(rng, a, 4), z = random_word(rng, a, 4);
    CHECK(concat(concat(x, y), z) == concat(x, concat(y, z)));
    CHECK(concat(empty, x) == x);
    CHECK(concat(x, empty) == x);
    CHECK(concat(x, y).length() == x.length() + y.length());
  }
}

TEST_CASE("concatenating words over different alphabets fails") {
  const Microstate x(dice(), {0});
  const Microstate y(make_alphabet(Alphabet::spins()), {1});
  CHECK(kind_of([&] { concat(x, y); }) == ErrorKind::AlphabetMismatch);
}

TEST_CASE("from_values maps payloads back to symbols") {
  const auto a = make_alphabet(Alphabet::spins());
  const std::vector<double> v{1, -1, 1};
  const auto m = Microstate::from_values(a, v);
  CHECK(m.values() == v);
  const std::vector<double> bad{0.5};
  CHECK(kind_of([&] { Microstate::from_values(a, bad); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("word counts and budgets") {
  CHECK(word_count(2, 10) == 1024u);
  CHECK(word_count(6, 0) == 1u);
  CHECK_FALSE(word_count(2, 64).has_value());
  CHECK(kind_of([] { WordStream(dice(), 8, 1000); }) == ErrorKind::BudgetExceeded);
}

TEST_CASE("word stream enumerates every word once in lexicographic order") {
  const auto a = dice();
  const auto words = enumerate_words(a, 3);
  REQUIRE(words.size() == 216);
  for (std::size_t i = 1; i < words.size(); ++i) {
    const auto p = words[i - 1].letters(), q = words[i].letters();
    CHECK(std::lexicographical_compare(p.begin(), p.end(), q.begin(), q.end()));
  }
  const auto empty = enumerate_words(a, 0);
  REQUIRE(empty.size() == 1);
  CHECK(empty.front().empty());
}

TEST_CASE("catalog functions evaluate as defined") {
  const auto s = make_alphabet(Alphabet::spins());
  const auto m = Microstate::from_values(s, std::vector<double>{1, 1, -1});
  CHECK(functions::word_length()(m) == 3.0);
  CHECK(functions::symbol_value_sum("M")(m) == 1.0);
  CHECK(functions::weighted_sum("w", {0.5, 2.0})(m) == doctest::Approx(4.5));

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, 3);
  J(0, 1) = J(1, 0) = 1.0;
  J(1, 2) = J(2, 1) = 2.0;
  // -(1*1*1 + 2*1*(-1))
  CHECK(functions::quadratic_coupling("E", J)(m) == doctest::Approx(1.0));
  const auto longer = Microstate::from_values(s, std::vector<double>{1, 1, 1, 1});
  CHECK(kind_of([&] { functions::quadratic_coupling("E", J)(longer); }) == ErrorKind::DimensionMismatch);

  const auto d = dice();
  const auto cyl = functions::cylinder_volume("V", 2.0, {1, 2, 3, 4, 5, 6});
  CHECK(cyl(Microstate(d, {0, 4, 2})) == 10.0);
  CHECK(cyl(Microstate(d)) == 0.0);

  const auto lc = functions::linear_combination("E", {functions::word_length(), functions::symbol_value_sum("M")}, {2.0, -3.0});
  CHECK(lc(m) == doctest::Approx(3.0));
}

TEST_CASE("extensivity check separates additive and non-additive functions") {
  const auto d = dice();
  CHECK(check_extensivity(functions::word_length(), d, 300, 1).passed);
  CHECK(check_extensivity(functions::weighted_sum("w", {1, 2, 3, 4, 5, 6}), d, 300, 2).passed);
  const auto cyl = check_extensivity(functions::cylinder_volume("V", 1.0, {1, 2, 3, 4, 5, 6}), d, 300, 3);
  CHECK_FALSE(cyl.passed);
  REQUIRE(cyl.counterexample.has_value());
  CHECK(cyl.counterexample->value_joined != doctest::Approx(cyl.counterexample->value_first + cyl.counterexample->value_second));

  Eigen::MatrixXd J = Eigen::MatrixXd::Ones(6, 6);
  J.diagonal().setZero();
  CHECK_FALSE(check_extensivity(functions::quadratic_coupling("E", J), make_alphabet(Alphabet::spins()), 300, 4).passed);
}

TEST_CASE("accessible set matches a brute-force filter") {
  const auto d = dice();
  std::vector<CharFunction> fns{functions::weighted_sum("sum", {1, 2, 3, 4, 5, 6}), functions::word_length("n")};
  ConstraintSpec spec;
  spec.fixed.emplace("sum", AdmissibleSet::interval(7, 9));
  const auto set = accessible_set(d, fns, spec, {0, 3});

  std::size_t expected = 0;
  for (std::size_t len = 0; len <= 3; ++len)
    for (const auto& w : enumerate_words(d, len)) {
      double s = 0;
      for (double v : w.values()) s += v;
      expected += (s >= 7 && s <= 9);
    }
  CHECK(set.size() == expected);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(set.values("sum")[i] >= 7.0);
    CHECK(set.values("sum")[i] <= 9.0);
    CHECK(set.values("n")[i] == double(set.microstate(i).length()));
  }
}

TEST_CASE("finite and predicate admissible sets") {
  const auto s = make_alphabet(Alphabet::spins());
  std::vector<CharFunction> fns{functions::symbol_value_sum("M")};
  ConstraintSpec spec;
  spec.fixed.emplace("M", AdmissibleSet::finite({0.0}));
  CHECK(accessible_set(s, fns, spec, {4, 4}).size() == 6);  // C(4, 2)

  ConstraintSpec pred;
  pred.fixed.emplace("M", AdmissibleSet::predicate([](double v) { return v > 0; }, "positive"));
  CHECK(accessible_set(s, fns, pred, {4, 4}).size() == 5);

  ConstraintSpec words;
  words.word_constraints.emplace("first up", [](const Microstate& m) { return m.value(0) > 0; });
  CHECK(accessible_set(s, fns, words, {3, 3}).size() == 4);
}

TEST_CASE("accessible set order does not depend on the thread count") {
  const auto d = dice();
  std::vector<CharFunction> fns{functions::weighted_sum("sum", {1, 2, 3, 4, 5, 6})};
  ConstraintSpec spec;
  spec.fixed.emplace("sum", AdmissibleSet::interval(10, 20));
  EnumerationOptions one, four;
  four.threads = 4;
  const auto a = accessible_set(d, fns, spec, {4, 5}, one);
  const auto b = accessible_set(d, fns, spec, {4, 5}, four);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.microstate(i) == b.microstate(i));
}

TEST_CASE("accessible set errors") {
  const auto s = make_alphabet(Alphabet::spins());
  std::vector<CharFunction> fns{functions::symbol_value_sum("M")};
  ConstraintSpec none;
  none.fixed.emplace("M", AdmissibleSet::singleton(100.0));
  CHECK(kind_of([&] { accessible_set(s, fns, none, {2, 2}); }) == ErrorKind::EmptyAccessibleSet);

  EnumerationOptions small;
  small.budget = 100;
  CHECK(kind_of([&] { accessible_set(s, fns, {}, {10, 10}, small); }) == ErrorKind::BudgetExceeded);

  ConstraintSpec undeclared;
  undeclared.fixed.emplace("E", AdmissibleSet::singleton(0.0));
  CHECK(kind_of([&] { accessible_set(s, fns, undeclared, {2, 2}); }) == ErrorKind::InvalidArgument);

  ConstraintSpec overlap;
  overlap.fixed.emplace("M", AdmissibleSet::singleton(0.0));
  overlap.free = LabeledVector{{"M", 0.0}};
  CHECK(kind_of([&] { accessible_set(s, fns, overlap, {2, 2}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("labeled vectors keep insertion order") {
  LabeledVector v{{"b", 2.0}, {"a", 1.0}};
  v.set("c", 3.0);
  v.set("b", 5.0);
  CHECK(v.labels() == std::vector<std::string>{"b", "a", "c"});
  CHECK(v.at("b") == 5.0);
  CHECK_FALSE(v.find("z").has_value());
  CHECK(kind_of([&] { v.at("z"); }) == ErrorKind::InvalidArgument);
}
