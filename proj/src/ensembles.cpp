#include "mphs/ensembles.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mphs/error.hpp"

namespace mphs {

const char* to_string(Quantity q) noexcept {
  switch (q) {
    case Quantity::energy: return "E";
    case Quantity::count: return "N";
    case Quantity::volume: return "V";
    case Quantity::surprisal: return "S";
  }
  return "?";
}

namespace {

struct Row {
  EnsembleTag tag;
  std::string_view name;
  std::vector<Quantity> fixed;
  std::vector<Quantity> free;
  bool thermal;
};

const std::vector<Row>& rows() {
  using Q = Quantity;
  static const std::vector<Row> table = {
      {EnsembleTag::microcanonical, "microcanonical", {Q::energy, Q::count, Q::volume, Q::surprisal}, {}, false},
      {EnsembleTag::isoenthalpic_isobaric, "isoenthalpic_isobaric", {Q::count, Q::surprisal}, {Q::energy, Q::volume},
       false},
      {EnsembleTag::adiabatic_porous, "adiabatic_porous", {Q::volume, Q::surprisal}, {Q::energy, Q::count}, false},
      {EnsembleTag::adiabatic_open, "adiabatic_open", {Q::surprisal}, {Q::energy, Q::count, Q::volume}, false},
      {EnsembleTag::canonical, "canonical", {Q::count, Q::volume}, {Q::energy}, true},
      {EnsembleTag::isothermal_isobaric, "isothermal_isobaric", {Q::count}, {Q::energy, Q::volume}, true},
      {EnsembleTag::grand_canonical, "grand_canonical", {Q::volume}, {Q::energy, Q::count}, true},
      {EnsembleTag::unnamed_TPmu, "unnamed_TPmu", {}, {Q::energy, Q::count, Q::volume}, true},
  };
  return table;
}

const Row& row(EnsembleTag tag) {
  for (const auto& r : rows())
    if (r.tag == tag) return r;
  throw Error(ErrorKind::InvalidArgument, "unknown ensemble tag");
}

double require(const std::optional<double>& v, const char* name, std::string_view ensemble) {
  if (!v) throw Error(ErrorKind::MissingIntensive, std::string(ensemble) + " ensemble needs " + name);
  if (!std::isfinite(*v)) throw Error(ErrorKind::InvalidArgument, std::string(name) + " is not finite");
  return *v;
}

double require_temperature(const Intensives& in, std::string_view ensemble) {
  const double T = require(in.T, "T", ensemble);
  if (!(T > 0.0)) throw Error(ErrorKind::NonpositiveTemperature, "temperature must be positive");
  return T;
}

}  // namespace

EnsembleKind EnsembleKind::of(EnsembleTag tag) {
  const Row& r = row(tag);
  return EnsembleKind{r.tag, r.fixed, r.free, r.thermal};
}

std::vector<EnsembleKind> EnsembleKind::all() {
  std::vector<EnsembleKind> out;
  for (const auto& r : rows()) out.push_back(of(r.tag));
  return out;
}

std::string_view EnsembleKind::name() const noexcept { return ensemble_name(tag); }

bool EnsembleKind::is_free(Quantity q) const noexcept {
  for (Quantity f : free)
    if (f == q) return true;
  return false;
}

EnsembleTag ensemble_tag_from_name(std::string_view name) {
  for (const auto& r : rows())
    if (r.name == name) return r.tag;
  throw Error(ErrorKind::InvalidArgument, "unknown ensemble '" + std::string(name) + "'");
}

std::string_view ensemble_name(EnsembleTag tag) noexcept {
  for (const auto& r : rows())
    if (r.tag == tag) return r.name;
  return "unknown";
}

double microcanonical_entropy(std::uint64_t omega, InfoConstant k) {
  if (omega == 0) throw Error(ErrorKind::InvalidArgument, "omega must be at least 1");
  return k.k() * std::log(static_cast<double>(omega));
}

void IdealGasModel::validate() const {
  if (!(N >= 1.0) || !std::isfinite(N)) throw Error(ErrorKind::InvalidArgument, "ideal gas needs N >= 1");
  if (!(V > 0.0) || !std::isfinite(V)) throw Error(ErrorKind::InvalidArgument, "ideal gas needs V > 0");
  if (!(m_atom > 0.0) || !std::isfinite(m_atom)) throw Error(ErrorKind::InvalidArgument, "ideal gas needs m_atom > 0");
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "ideal gas needs h > 0");
}

double ideal_gas_log_partition(const IdealGasModel& model, double T) {
  model.validate();
  if (!(T > 0.0)) throw Error(ErrorKind::NonpositiveTemperature, "temperature must be positive");
  const double k = model.k.k();
  // ln(2 pi m k T / h^2) split to keep every factor in range
  const double thermal = std::log(2.0 * std::numbers::pi) + std::log(model.m_atom) + std::log(k) + std::log(T) -
                         2.0 * std::log(model.h);
  double lnz = model.N * std::log(model.V) + 1.5 * model.N * thermal;
  if (model.gibbs_correction) lnz -= std::lgamma(model.N + 1.0);
  return k * lnz;
}

IdealGasState ideal_gas_state(const IdealGasModel& model, double T) {
  const double klnz = ideal_gas_log_partition(model, T);
  const double k = model.k.k();
  IdealGasState s;
  s.E_bar = 1.5 * model.N * k * T;
  s.S = klnz + s.E_bar / T;
  s.P = model.N * k * T / model.V;
  return s;
}

void IsingModel::validate() const {
  if (J.rows() != J.cols()) throw Error(ErrorKind::InvalidArgument, "coupling matrix must be square");
  for (Eigen::Index i = 0; i < J.rows(); ++i) {
    if (J(i, i) != 0.0) throw Error(ErrorKind::InvalidArgument, "coupling matrix must have a zero diagonal");
    for (Eigen::Index j = 0; j < i; ++j)
      if (J(i, j) != J(j, i)) throw Error(ErrorKind::InvalidArgument, "coupling matrix must be symmetric");
  }
}

double ising_energy(const Microstate& m, const IsingModel& model) {
  if (static_cast<Eigen::Index>(m.length()) != model.J.rows()) {
    std::ostringstream os;
    os << "word of length " << m.length() << " against a " << model.J.rows() << "-site coupling";
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  const auto values = m.values();
  const Eigen::Map<const Eigen::VectorXd> s(values.data(), static_cast<Eigen::Index>(values.size()));
  return -0.5 * s.dot(model.J * s);
}

double ensemble_exponent(const EnsembleKind& kind, const Intensives& intensives, const EnsembleValues& values,
                         InfoConstant k) {
  if (!kind.thermal_contact) return 0.0;
  const double T = require_temperature(intensives, kind.name());
  double work = values.F_e;
  if (kind.is_free(Quantity::volume)) work += require(intensives.P, "P", kind.name()) * values.F_v;
  if (kind.is_free(Quantity::count)) work -= require(intensives.mu, "mu", kind.name()) * values.F_n;
  return -work / (k.k() * T);
}

LabeledVector ensemble_multipliers(const EnsembleKind& kind, const Intensives& intensives,
                                   const IntensiveLabels& labels) {
  LabeledVector out;
  if (!kind.thermal_contact) return out;
  const double T = require_temperature(intensives, kind.name());
  out.set(labels.energy, -1.0 / T);
  if (kind.is_free(Quantity::count)) out.set(labels.count, require(intensives.mu, "mu", kind.name()) / T);
  if (kind.is_free(Quantity::volume)) out.set(labels.volume, -require(intensives.P, "P", kind.name()) / T);
  return out;
}

Distribution ensemble_distribution(const AccessibleSet& set, const EnsembleKind& kind, const Intensives& intensives,
                                   InfoConstant k, const IntensiveLabels& labels) {
  if (!kind.thermal_contact) return Distribution::uniform(set.size());
  auto column = [&](Quantity q, const std::string& label) -> std::span<const double> {
    if (!kind.is_free(q)) return {};
    if (!set.has_function(label))
      throw Error(ErrorKind::InvalidArgument,
                  std::string(kind.name()) + " ensemble needs function '" + label + "' on the set");
    return set.values(label);
  };
  const auto fe = column(Quantity::energy, labels.energy);
  const auto fn = column(Quantity::count, labels.count);
  const auto fv = column(Quantity::volume, labels.volume);
  std::vector<double> logw(set.size());
  for (std::size_t m = 0; m < set.size(); ++m) {
    EnsembleValues v;
    v.F_e = fe[m];
    if (!fn.empty()) v.F_n = fn[m];
    if (!fv.empty()) v.F_v = fv[m];
    logw[m] = ensemble_exponent(kind, intensives, v, k);
  }
  return Distribution::from_log_weights(logw);
}

}  // namespace mphs
