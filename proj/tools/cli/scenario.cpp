#include "cli/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mphs/error.hpp"

namespace mphs::cli {

namespace {

[[noreturn]] void scenario_error(const std::string& message) { throw Error(ErrorKind::ScenarioError, message); }

std::string child_path(const std::string& parent, std::string_view key) { return parent + "/" + std::string(key); }

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

bool Node::has(std::string_view key) const { return j_->is_object() && j_->contains(key); }

Node Node::at(std::string_view key) const {
  if (!j_->is_object()) fail("expected an object");
  auto it = j_->find(key);
  if (it == j_->end()) fail("missing required field '" + std::string(key) + "'");
  return Node(*it, child_path(path_, key));
}

std::optional<Node> Node::find(std::string_view key) const {
  if (!j_->is_object()) fail("expected an object");
  auto it = j_->find(key);
  if (it == j_->end()) return std::nullopt;
  return Node(*it, child_path(path_, key));
}

Node Node::operator[](std::size_t i) const {
  if (!j_->is_array()) fail("expected an array");
  if (i >= j_->size()) fail("index " + std::to_string(i) + " out of range");
  return Node((*j_)[i], path_ + "/" + std::to_string(i));
}

std::size_t Node::size() const {
  if (!j_->is_array() && !j_->is_object()) fail("expected an array or object");
  return j_->size();
}

double Node::number() const {
  if (!j_->is_number()) fail("expected a number");
  const double v = j_->get<double>();
  if (!std::isfinite(v)) fail("expected a finite number");
  return v;
}

double Node::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("expected a positive number");
  return v;
}

std::uint64_t Node::count() const {
  if (!j_->is_number_integer() || j_->get<long long>() < 0) fail("expected a nonnegative integer");
  return j_->get<std::uint64_t>();
}

bool Node::boolean() const {
  if (!j_->is_boolean()) fail("expected true or false");
  return j_->get<bool>();
}

std::string Node::string() const {
  if (!j_->is_string()) fail("expected a string");
  return j_->get<std::string>();
}

std::vector<double> Node::numbers() const {
  if (!j_->is_array()) fail("expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j_->size(); ++i) out.push_back((*this)[i].number());
  return out;
}

std::vector<std::string> Node::strings() const {
  if (!j_->is_array()) fail("expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j_->size(); ++i) out.push_back((*this)[i].string());
  return out;
}

Eigen::MatrixXd Node::matrix() const {
  if (!j_->is_array()) fail("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j_->size());
  if (rows == 0) return {};
  Eigen::Index cols = -1;
  Eigen::MatrixXd m;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = (*this)[static_cast<std::size_t>(r)].numbers();
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      (*this)[static_cast<std::size_t>(r)].fail("ragged matrix row");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

void Node::fail(const std::string& message) const {
  scenario_error("at " + (path_.empty() ? std::string("/") : path_) + ": " + message);
}

void Node::only(std::initializer_list<std::string_view> allowed) const {
  if (!j_->is_object()) fail("expected an object");
  for (auto it = j_->begin(); it != j_->end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) Node(*it, child_path(path_, it.key())).fail("unknown field '" + it.key() + "'");
  }
}

namespace {

AlphabetPtr parse_alphabet(const Node& n) {
  if (n.is_string()) {
    if (n.string() != "spins") n.fail("unknown alphabet '" + n.string() + "'");
    return make_alphabet(Alphabet::spins());
  }
  n.only({"name", "symbols"});
  const Node symbols = n.at("symbols");
  std::vector<Symbol> out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const Node s = symbols[i];
    if (s.is_string()) {
      out.push_back({s.string(), static_cast<double>(i)});
    } else {
      s.only({"name", "value"});
      out.push_back({s.at("name").string(), s.has("value") ? s.at("value").number() : static_cast<double>(i)});
    }
  }
  try {
    return make_alphabet(Alphabet(n.has("name") ? n.at("name").string() : "custom", std::move(out)));
  } catch (const Error& e) {
    n.fail(e.what());
  }
}

Eigen::MatrixXd chain_coupling(const Node& n) {
  n.only({"sites", "J", "periodic"});
  const auto L = static_cast<Eigen::Index>(n.at("sites").count());
  const double J = n.at("J").number();
  const bool periodic = n.has("periodic") && n.at("periodic").boolean();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(L, L);
  for (Eigen::Index i = 0; i + 1 < L; ++i) m(i, i + 1) = m(i + 1, i) = J;
  if (periodic && L > 2) m(0, L - 1) = m(L - 1, 0) = J;
  return m;
}

CharFunction parse_function(const Node& n, const AlphabetPtr& alphabet, const std::vector<CharFunction>& earlier) {
  const std::string kind = n.at("kind").string();
  const std::string label = n.at("label").string();
  if (kind == "word_length") {
    n.only({"kind", "label"});
    return functions::word_length(label);
  }
  if (kind == "weighted_sum") {
    n.only({"kind", "label", "weights"});
    auto w = n.at("weights").numbers();
    if (w.size() != alphabet->size()) n.at("weights").fail("needs one weight per alphabet symbol");
    return functions::weighted_sum(label, std::move(w));
  }
  if (kind == "symbol_value_sum") {
    n.only({"kind", "label"});
    return functions::symbol_value_sum(label);
  }
  if (kind == "quadratic_coupling") {
    n.only({"kind", "label", "coupling", "chain"});
    if (n.has("coupling") == n.has("chain")) n.fail("give exactly one of 'coupling' or 'chain'");
    Eigen::MatrixXd J = n.has("coupling") ? n.at("coupling").matrix() : chain_coupling(n.at("chain"));
    if (J.rows() != J.cols()) n.fail("coupling matrix must be square");
    return functions::quadratic_coupling(label, std::move(J));
  }
  if (kind == "cylinder_volume") {
    n.only({"kind", "label", "area", "heights"});
    auto h = n.at("heights").numbers();
    if (h.size() != alphabet->size()) n.at("heights").fail("needs one height per alphabet symbol");
    return functions::cylinder_volume(label, n.at("area").positive(), std::move(h));
  }
  if (kind == "linear_combination") {
    n.only({"kind", "label", "terms", "coefficients"});
    const auto names = n.at("terms").strings();
    auto coefficients = n.at("coefficients").numbers();
    if (names.size() != coefficients.size()) n.at("coefficients").fail("needs one coefficient per term");
    std::vector<CharFunction> terms;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const CharFunction* found = nullptr;
      for (const auto& f : earlier) found = f.label == names[i] ? &f : found;
      if (!found) n.at("terms")[i].fail("unknown function '" + names[i] + "' (terms must be declared earlier)");
      terms.push_back(*found);
    }
    return functions::linear_combination(label, std::move(terms), std::move(coefficients));
  }
  n.at("kind").fail("unknown function kind '" + kind + "'");
}

AdmissibleSet parse_admissible(const Node& n) {
  if (n.is_number()) return AdmissibleSet::singleton(n.number());
  n.only({"interval", "values", "value"});
  if (n.size() != 1) n.fail("give exactly one of 'interval', 'values', 'value'");
  if (auto v = n.find("value")) return AdmissibleSet::singleton(v->number());
  if (auto v = n.find("values")) return AdmissibleSet::finite(v->numbers());
  const auto iv = n.at("interval").numbers();
  if (iv.size() != 2 || iv[0] > iv[1]) n.at("interval").fail("expected [lo, hi] with lo <= hi");
  return AdmissibleSet::interval(iv[0], iv[1]);
}

IdealGasModel parse_ideal_gas(const Node& n, const Scenario& s, std::optional<double> h) {
  n.only({"N", "V", "m_atom", "gibbs_correction"});
  IdealGasModel m;
  m.N = n.has("N") ? n.at("N").positive() : 1.0;
  m.V = n.has("V") ? n.at("V").positive() : 1.0;
  m.m_atom = n.has("m_atom") ? n.at("m_atom").positive() : 1.0;
  m.h = h.value_or(kPlanck);
  m.k = s.k;
  m.gibbs_correction = n.has("gibbs_correction") && n.at("gibbs_correction").boolean();
  try {
    m.validate();
  } catch (const Error& e) {
    n.fail(e.what());
  }
  return m;
}

void parse_ensemble(const Node& n, Scenario& s) {
  n.only({"kind", "T", "P", "mu", "labels"});
  EnsembleSpec e;
  try {
    e.kind = EnsembleKind::of(ensemble_tag_from_name(n.at("kind").string()));
  } catch (const Error& err) {
    n.at("kind").fail(err.what());
  }
  if (auto T = n.find("T")) e.intensives.T = T->positive();
  if (auto P = n.find("P")) e.intensives.P = P->number();
  if (auto mu = n.find("mu")) e.intensives.mu = mu->number();
  if (auto labels = n.find("labels")) {
    labels->only({"energy", "count", "volume"});
    if (auto l = labels->find("energy")) e.labels.energy = l->string();
    if (auto l = labels->find("count")) e.labels.count = l->string();
    if (auto l = labels->find("volume")) e.labels.volume = l->string();
  }
  if (e.kind.thermal_contact && !e.intensives.T) n.fail("ensemble '" + std::string(e.kind.name()) + "' needs T");
  if (e.kind.is_free(Quantity::volume) && e.kind.thermal_contact && !e.intensives.P)
    n.fail("ensemble '" + std::string(e.kind.name()) + "' needs P");
  if (e.kind.is_free(Quantity::count) && e.kind.thermal_contact && !e.intensives.mu)
    n.fail("ensemble '" + std::string(e.kind.name()) + "' needs mu");
  s.ensemble = std::move(e);
}

void parse_system(const Node& root, Scenario& s, const Overrides& overrides, std::optional<double> h) {
  const Node sys = root.at("system");
  if (auto gas = sys.find("ideal_gas")) {
    sys.only({"ideal_gas"});
    s.ideal_gas = parse_ideal_gas(*gas, s, h);
    if (auto c = root.find("constraints")) {
      c->only({"free"});
      if (auto free = c->find("free")) {
        free->only({"energy"});
        s.free = LabeledVector{{"energy", free->at("energy").positive()}};
      }
    }
    return;
  }
  sys.only({"alphabet", "length", "lengths", "functions"});
  const AlphabetPtr alphabet = parse_alphabet(sys.at("alphabet"));
  LengthRange lengths;
  if (sys.has("length") == sys.has("lengths")) sys.fail("give exactly one of 'length' or 'lengths'");
  if (auto L = sys.find("length")) {
    lengths.min = lengths.max = L->count();
  } else {
    const Node r = sys.at("lengths");
    r.only({"min", "max"});
    lengths.min = r.at("min").count();
    lengths.max = r.at("max").count();
    if (lengths.min > lengths.max) r.fail("min exceeds max");
  }

  std::vector<CharFunction> fns;
  std::set<std::string> seen;
  if (auto list = sys.find("functions")) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const Node f = (*list)[i];
      auto fn = parse_function(f, alphabet, fns);
      if (!seen.insert(fn.label).second) f.at("label").fail("duplicate function label '" + fn.label + "'");
      fns.push_back(std::move(fn));
    }
  }
  auto require_label = [&](const Node& at, const std::string& label) {
    if (!seen.count(label)) at.fail("references undeclared function '" + label + "'");
  };

  ConstraintSpec spec;
  if (auto c = root.find("constraints")) {
    c->only({"fixed", "free"});
    if (auto fixed = c->find("fixed")) {
      if (!fixed->is_object()) fixed->fail("expected an object");
      for (auto it = fixed->json().begin(); it != fixed->json().end(); ++it) {
        const Node item(*it, fixed->path() + "/" + it.key());
        require_label(item, it.key());
        spec.fixed.emplace(it.key(), parse_admissible(item));
      }
    }
    if (auto free = c->find("free")) {
      if (!free->is_object()) free->fail("expected an object");
      LabeledVector targets;
      for (auto it = free->json().begin(); it != free->json().end(); ++it) {
        const Node item(*it, free->path() + "/" + it.key());
        require_label(item, it.key());
        if (spec.fixed.count(it.key())) item.fail("label '" + it.key() + "' is both fixed and free");
        targets.set(it.key(), item.number());
      }
      s.free = targets;
      spec.free = targets;
    }
  }
  if (s.ensemble) {
    const auto& lab = s.ensemble->labels;
    const Node en = root.at("ensemble");
    if (s.ensemble->kind.thermal_contact) require_label(en, lab.energy);
    if (s.ensemble->kind.thermal_contact && s.ensemble->kind.is_free(Quantity::volume)) require_label(en, lab.volume);
    if (s.ensemble->kind.thermal_contact && s.ensemble->kind.is_free(Quantity::count)) require_label(en, lab.count);
  }

  EnumerationOptions options;
  options.threads = overrides.threads;
  if (overrides.budget) options.budget = *overrides.budget;
  s.set = std::make_shared<const AccessibleSet>(accessible_set(alphabet, std::move(fns), spec, lengths, options));
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::string& origin, const Overrides& overrides) {
  Scenario s;
  s.origin = origin;
  try {
    s.doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    scenario_error(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what);
  }
  const Node root = s.root();
  if (!s.doc.is_object()) root.fail("expected a JSON object");
  root.only({"version", "description", "constants", "system", "constraints", "ensemble", "distribution", "sweep",
             "phs", "simulate", "verify", "output"});
  const Node version = root.at("version");
  if (!version.json().is_number_integer() || version.json().get<long long>() != 1) version.fail("unsupported version (expected 1)");

  std::optional<double> h;
  if (auto c = root.find("constants")) {
    c->only({"k", "base", "h", "seed"});
    if (c->has("k") && c->has("base")) c->fail("give at most one of 'k' or 'base'");
    if (auto k = c->find("k")) s.k = InfoConstant(k->positive());
    if (auto b = c->find("base")) {
      if (!(b->number() > 1.0)) b->fail("base must exceed 1");
      s.k = InfoConstant::from_base(b->number());
    }
    if (auto hh = c->find("h")) h = hh->positive();
    if (auto seed = c->find("seed")) s.seed = seed->count();
  }
  if (overrides.k) {
    if (!(*overrides.k > 0.0) || !std::isfinite(*overrides.k)) scenario_error("--k must be positive");
    s.k = InfoConstant(*overrides.k);
  }

  if (auto e = root.find("ensemble")) parse_ensemble(*e, s);
  if (auto d = root.find("distribution")) {
    d->only({"probabilities"});
    s.probabilities = d->at("probabilities").numbers();
  }
  if (auto sw = root.find("sweep")) {
    sw->only({"T"});
    const Node T = sw->at("T");
    for (std::size_t i = 0; i < T.size(); ++i) s.sweep_T.push_back(T[i].positive());
  }
  if (auto out = root.find("output")) out->only({"format", "max_probabilities"});

  if (root.has("system")) {
    parse_system(root, s, overrides, h);
  } else {
    for (auto key : {"constraints", "ensemble", "distribution", "sweep", "phs", "simulate"})
      if (root.has(key)) root.fail("'" + std::string(key) + "' needs a 'system' block");
  }

  if (s.free && s.ensemble) root.fail("give exactly one of 'constraints.free' or 'ensemble'");
  if (s.probabilities && (s.free || s.ensemble)) root.fail("'distribution' excludes 'constraints.free' and 'ensemble'");
  if (s.probabilities && s.set && s.probabilities->size() != s.set->size())
    root.at("distribution").at("probabilities")
        .fail("has " + std::to_string(s.probabilities->size()) + " entries but the accessible set has " +
              std::to_string(s.set->size()) + " microstates");
  if (s.ideal_gas && s.ensemble && s.ensemble->kind.tag != EnsembleTag::canonical)
    root.at("ensemble").fail("the ideal gas supports the canonical ensemble only");
  if (!s.sweep_T.empty() && !s.ideal_gas) root.at("sweep").fail("temperature sweeps need system.ideal_gas");
  return s;
}

Scenario load_scenario(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) scenario_error("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path, overrides);
}

EntropyModelPtr entropy_model(const Scenario& s, const std::vector<std::string>& extras,
                              const std::string& energy_label) {
  if (s.ideal_gas) return std::make_shared<IdealGasEntropyModel>(*s.ideal_gas, extras);
  return std::make_shared<EnumeratedEntropyModel>(s.set, energy_label, extras, s.k);
}

namespace {

struct PhsParts {
  std::shared_ptr<PhsModel> model;
  std::vector<std::string> extras;
  std::vector<std::string> mechanical;
  bool irreversible = false;
};

DissipativeLaw parse_law(const Node& n) {
  const std::string kind = n.at("kind").string();
  try {
    if (kind == "linear_resistor") {
      n.only({"kind", "r"});
      return laws::linear_resistor(n.at("r").numbers());
    }
    if (kind == "linear") {
      n.only({"kind", "R"});
      return laws::linear(n.at("R").matrix());
    }
    if (kind == "polynomial") {
      n.only({"kind", "dim", "coefficients"});
      return laws::polynomial(static_cast<Eigen::Index>(n.at("dim").count()), n.at("coefficients").numbers());
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ScenarioError) throw;
    n.fail(e.what());
  }
  n.at("kind").fail("unknown law '" + kind + "'");
}

PhsParts build_phs(const Scenario& s) {
  const Node n = s.root().at("phs");
  n.only({"kind", "energy_label", "state", "mechanical", "blocks", "labels", "law", "converter_temperature"});
  const std::string kind = n.at("kind").string();
  if (kind != "reversible" && kind != "irreversible" && kind != "dissipative")
    n.at("kind").fail("unknown phs kind '" + kind + "'");
  PhsParts parts;
  parts.irreversible = kind == "irreversible";
  const std::string energy_label = n.has("energy_label") ? n.at("energy_label").string() : "energy";
  if (auto st = n.find("state")) parts.extras = st->strings();

  if (s.ideal_gas) {
    if (energy_label != "energy") n.at("energy_label").fail("the ideal gas energy label is 'energy'");
    for (std::size_t i = 0; i < parts.extras.size(); ++i)
      if (parts.extras[i] != "count" && parts.extras[i] != "volume")
        n.at("state")[i].fail("ideal gas state quantities are 'count' and 'volume'");
  } else {
    if (!s.set->has_function(energy_label)) n.fail("energy function '" + energy_label + "' is not declared");
    for (std::size_t i = 0; i < parts.extras.size(); ++i)
      if (!s.set->has_function(parts.extras[i]))
        n.at("state")[i].fail("state quantity '" + parts.extras[i] + "' is not a declared function");
  }

  Eigen::MatrixXd Q;
  if (auto mech = n.find("mechanical")) {
    mech->only({"labels", "Q"});
    parts.mechanical = mech->at("labels").strings();
    Q = mech->at("Q").matrix();
    const auto m = static_cast<Eigen::Index>(parts.mechanical.size());
    if (Q.rows() != m || Q.cols() != m) mech->at("Q").fail("must be square with one row per mechanical label");
  }

  EntropyModelPtr thermal;
  try {
    thermal = entropy_model(s, parts.extras, energy_label);
  } catch (const Error& e) {
    n.fail(e.what());
  }
  Hamiltonian H(std::make_shared<const EnergyFunction>(thermal), parts.mechanical, Q);
  const auto labels = H.labels();

  PhsStructure structure = [&]() -> PhsStructure {
    if (kind == "reversible") {
      for (auto key : {"blocks", "labels", "law", "converter_temperature"})
        if (n.has(key)) n.at(key).fail("not used by a reversible model");
      return build_reversible(labels);
    }
    InterconnectionBlocks blocks;
    if (auto b = n.find("blocks")) {
      b->only({"J_x", "K", "G_x", "J_w", "G_w", "J_y"});
      if (auto m = b->find("J_x")) blocks.J_x = m->matrix();
      if (auto m = b->find("K")) blocks.K = m->matrix();
      if (auto m = b->find("G_x")) blocks.G_x = m->matrix();
      if (auto m = b->find("J_w")) blocks.J_w = m->matrix();
      if (auto m = b->find("G_w")) blocks.G_w = m->matrix();
      if (auto m = b->find("J_y")) blocks.J_y = m->matrix();
    }
    PortLabels ports;
    ports.storage.assign(labels.begin() + 1, labels.end());
    if (auto l = n.find("labels")) {
      l->only({"dissipative", "external"});
      if (auto d = l->find("dissipative")) ports.dissipative = d->strings();
      if (auto e = l->find("external")) ports.external = e->strings();
    }
    DissipativeLaw law = parse_law(n.at("law"));
    try {
      return kind == "irreversible" ? build_irreversible(blocks, std::move(law), ports)
                                    : build_dissipative(blocks, std::move(law), ports);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotSkewSymmetric) throw;
      n.fail(e.what());
    }
  }();

  try {
    parts.model = std::make_shared<PhsModel>(std::move(structure), std::move(H));
  } catch (const Error& e) {
    n.fail(e.what());
  }
  if (auto Td = n.find("converter_temperature")) {
    if (!parts.irreversible) Td->fail("only irreversible models have a converter");
    parts.model->set_converter_temperature(Td->positive());
  }
  return parts;
}

// Entropy at temperature T with the extras held fixed, on the T > 0 branch.
double entropy_at_temperature(const EntropyModel& model, double T, const LabeledVector& extras) {
  if (auto gas = dynamic_cast<const IdealGasEntropyModel*>(&model)) return ideal_gas_state(gas->at(extras), T).S;
  auto [lo, hi] = model.energy_range(extras);
  if (auto peak = model.entropy_peak(extras)) hi = peak->first;
  const double span = hi - lo;
  double a = lo + 1e-12 * span, b = hi - 1e-12 * span;
  auto temperature = [&](double E) { return -1.0 / model.evaluate(E, extras).lambda_energy; };
  if (!(temperature(a) < T)) throw Error(ErrorKind::TargetOutOfRange, "temperature below the attainable range");
  if (!(temperature(b) > T)) throw Error(ErrorKind::TargetOutOfRange, "temperature above the attainable range");
  for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b)); ++i) {
    const double m = 0.5 * (a + b);
    (temperature(m) < T ? a : b) = m;
  }
  return model.evaluate(0.5 * (a + b), extras).entropy;
}

Eigen::VectorXd initial_state(const Node& n, const PhsParts& parts) {
  n.only({"T", "energy", "entropy", "extras", "mechanical"});
  const auto& H = parts.model->hamiltonian();
  const auto& model = H.thermal().model();
  MacroState m;
  for (const auto& l : parts.extras) {
    const auto ex = n.find("extras");
    if (!ex || !ex->has(l)) n.fail("missing initial value for state quantity '" + l + "'");
    m.extras.set(l, ex->at(l).number());
  }
  if (auto ex = n.find("extras"))
    for (auto it = ex->json().begin(); it != ex->json().end(); ++it)
      if (!m.extras.contains(it.key())) ex->fail("'" + it.key() + "' is not a state quantity");

  const int given = n.has("T") + n.has("energy") + n.has("entropy");
  if (given != 1) n.fail("give exactly one of 'T', 'energy', 'entropy'");
  if (auto T = n.find("T")) m.entropy = entropy_at_temperature(model, T->positive(), m.extras);
  if (auto E = n.find("energy")) m.entropy = model.evaluate(E->number(), m.extras).entropy;
  if (auto S = n.find("entropy")) m.entropy = S->number();

  Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parts.mechanical.size()));
  const auto mech = n.find("mechanical");
  for (std::size_t i = 0; i < parts.mechanical.size(); ++i)
    if (mech && mech->has(parts.mechanical[i])) q(static_cast<Eigen::Index>(i)) = mech->at(parts.mechanical[i]).number();
  return H.state(m, q);
}

void parse_inputs(const Node& n, const BlockLayout& layout, InputSignal& signal, std::vector<std::string>& driven) {
  if (!n.is_object()) n.fail("expected an object");
  for (auto it = n.json().begin(); it != n.json().end(); ++it) {
    const Node item(*it, n.path() + "/" + it.key());
    const auto& ext = layout.external;
    if (std::find(ext.begin(), ext.end(), it.key()) == ext.end()) {
      std::string known;
      for (const auto& e : ext) known += (known.empty() ? "" : ", ") + e;
      item.fail("unknown external port '" + it.key() + "' (ports: " + known + ")");
    }
    driven.push_back(it.key());
    if (item.is_number()) {
      signal.set_constant(it.key(), item.number());
      continue;
    }
    item.only({"constant", "samples"});
    if (item.size() != 1) item.fail("give exactly one of 'constant' or 'samples'");
    if (auto c = item.find("constant")) {
      signal.set_constant(it.key(), c->number());
    } else {
      const Node samples = item.at("samples");
      samples.only({"t", "values"});
      try {
        signal.set_samples(it.key(), samples.at("t").numbers(), samples.at("values").numbers());
      } catch (const Error& e) {
        samples.fail(e.what());
      }
    }
  }
}

}  // namespace

SimulationSetup simulation_setup(const Scenario& s) {
  const Node root = s.root();
  const Node sim = root.at("simulate");
  sim.only({"dt", "t_end", "initial", "inputs", "coupling", "tolerances"});
  if (!root.has("phs")) root.fail("simulate needs a 'phs' block");

  SimulationSetup out;
  out.dt = sim.at("dt").number();
  if (!(out.dt > 0.0)) sim.at("dt").fail("dt must be positive");
  out.t_end = sim.at("t_end").number();
  if (!(out.t_end > 0.0)) sim.at("t_end").fail("t_end must be positive");

  const PhsParts parts = build_phs(s);
  out.model = parts.model;
  out.irreversible = parts.irreversible;
  out.x0 = initial_state(sim.at("initial"), parts);

  if (auto in = sim.find("inputs")) parse_inputs(*in, out.model->layout(), out.signal, out.driven_ports);
  try {
    out.signal.validate(out.model->layout().external, out.t_end);
  } catch (const Error& e) {
    sim.at("inputs").fail(e.what());
  }

  if (auto c = sim.find("coupling")) {
    c->only({"conductance", "initial_b"});
    if (sim.has("inputs")) c->fail("coupling runs drive only the entropy ports; remove 'inputs'");
    out.conductance = c->at("conductance").positive();
    const PhsParts b = build_phs(s);
    out.partner = b.model;
    out.x0_partner = initial_state(c->at("initial_b"), b);
  }
  if (auto t = sim.find("tolerances")) {
    t->only({"power", "energy", "drift", "gap"});
    if (auto v = t->find("power")) out.power_tolerance = v->positive();
    if (auto v = t->find("energy")) out.energy_tolerance = v->positive();
    if (auto v = t->find("drift")) out.drift_tolerance = v->positive();
    if (auto v = t->find("gap")) out.gap_tolerance = v->positive();
  }
  return out;
}

std::shared_ptr<PhsModel> phs_model(const Scenario& s) { return build_phs(s).model; }

std::optional<Eigen::MatrixXd> injected_matrix(const Scenario& s) {
  const auto v = s.root().find("verify");
  if (!v) return std::nullopt;
  if (auto m = v->find("matrix")) {
    Eigen::MatrixXd M = m->matrix();
    if (M.rows() != M.cols() || M.rows() == 0) m->fail("expected a nonempty square matrix");
    return M;
  }
  return std::nullopt;
}

}  // namespace mphs::cli
