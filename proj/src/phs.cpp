#include "mphs/phs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "mphs/error.hpp"

namespace mphs {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string shape(const MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// Empty stands for zeros of the expected shape.
MatrixXd sized(const MatrixXd& m, Index rows, Index cols, const char* name) {
  if (m.size() == 0) return MatrixXd::Zero(rows, cols);
  if (m.rows() != rows || m.cols() != cols)
    throw Error(ErrorKind::DimensionMismatch, std::string("block ") + name + " is " + shape(m) + ", expected " +
                                                  std::to_string(rows) + "x" + std::to_string(cols));
  return m;
}

void require_skew(const MatrixXd& m, const char* name) {
  const double d = skew_defect(m);
  if (d > 1e-14) {
    std::ostringstream os;
    os << "block " << name << " has max |J + J^T| entry " << d;
    throw Error(ErrorKind::NotSkewSymmetric, os.str());
  }
}

void check_no_loop(const MatrixXd& m, const BlockLayout& layout) {
  const Index o = layout.offset(Segment::dissipative), n = layout.n_dissipative();
  if (n > 0 && m.block(o, o, n, n).cwiseAbs().maxCoeff() != 0.0)
    throw Error(ErrorKind::AlgebraicLoop,
                "dissipative flows depend on dissipative efforts (nonzero J_w); an implicit solve would be needed");
}

// Labels given explicitly, or generated from the block shapes.
PortLabels resolve_labels(const InterconnectionBlocks& b, const PortLabels& labels) {
  PortLabels out = labels;
  auto generate = [](std::vector<std::string>& names, Index n, const char* prefix) {
    if (!names.empty() || n == 0) return;
    for (Index i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i + 1));
  };
  const Index nx = std::max({b.J_x.rows(), b.K.rows(), b.G_x.rows()});
  const Index nw = std::max({b.J_w.rows(), b.K.cols(), b.G_w.rows()});
  const Index nu = std::max({b.J_y.rows(), b.G_x.cols(), b.G_w.cols()});
  generate(out.storage, nx, "x");
  generate(out.dissipative, nw, "w");
  generate(out.external, nu, "u");
  return out;
}

}  // namespace

Index BlockLayout::offset(Segment s) const noexcept {
  switch (s) {
    case Segment::storage: return 0;
    case Segment::dissipative: return n_storage();
    case Segment::external: return n_storage() + n_dissipative();
  }
  return 0;
}

Index BlockLayout::size(Segment s) const noexcept {
  switch (s) {
    case Segment::storage: return n_storage();
    case Segment::dissipative: return n_dissipative();
    case Segment::external: return n_external();
  }
  return 0;
}

double skew_defect(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m + m.transpose()).cwiseAbs().maxCoeff();
}

InterconnectionMatrix InterconnectionMatrix::assemble(MatrixXd S, BlockLayout layout, double tol) {
  if (S.rows() != S.cols() || S.rows() != layout.dim())
    throw Error(ErrorKind::DimensionMismatch,
                "matrix is " + shape(S) + " but the port layout has " + std::to_string(layout.dim()) + " ports");
  if (!S.allFinite()) throw Error(ErrorKind::InvalidArgument, "interconnection matrix has non-finite entries");
  const double d = skew_defect(S);
  if (d > tol) {
    Index bi = 0, bj = 0;
    (S + S.transpose()).cwiseAbs().maxCoeff(&bi, &bj);
    std::ostringstream os;
    os.precision(17);
    os << "max |S + S^T| entry " << d << " at (" << bi << ", " << bj << ")";
    throw Error(ErrorKind::NotSkewSymmetric, os.str());
  }
  return InterconnectionMatrix(std::move(S), std::move(layout));
}

MatrixXd InterconnectionMatrix::block(Segment rows, Segment cols) const {
  return S_.block(layout_.offset(rows), layout_.offset(cols), layout_.size(rows), layout_.size(cols));
}

PowerBalance power_balance(const InterconnectionMatrix& S, const VectorXd& e) {
  if (e.size() != S.dim())
    throw Error(ErrorKind::DimensionMismatch, "effort vector has " + std::to_string(e.size()) + " entries, expected " +
                                                  std::to_string(S.dim()));
  const VectorXd f = S.matrix() * e;
  const BlockLayout& l = S.layout();
  auto part = [&](Segment s) {
    const Index o = l.offset(s), n = l.size(s);
    return n ? e.segment(o, n).dot(f.segment(o, n)) : 0.0;
  };
  PowerBalance p;
  p.P_s = part(Segment::storage);
  p.P_d = part(Segment::dissipative);
  p.P_ext = part(Segment::external);
  p.total = e.dot(f);
  return p;
}

namespace laws {

DissipativeLaw linear(MatrixXd R) {
  if (R.rows() != R.cols() || R.rows() == 0) throw Error(ErrorKind::InvalidArgument, "resistance matrix must be square");
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, R.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::InvalidArgument, "resistance matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(R, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-14 * std::max(1.0, R.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::PassivityViolation, "resistance matrix is not positive semidefinite");
  const Index n = R.rows();
  return DissipativeLaw{"linear", n, [R = std::move(R)](const VectorXd& f) -> VectorXd { return R * f; }, true};
}

DissipativeLaw linear_resistor(std::vector<double> r) {
  if (r.empty()) throw Error(ErrorKind::InvalidArgument, "resistor law needs at least one resistance");
  VectorXd d(static_cast<Index>(r.size()));
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] >= 0.0) || !std::isfinite(r[i]))
      throw Error(ErrorKind::PassivityViolation, "resistances must be finite and nonnegative");
    d(static_cast<Index>(i)) = r[i];
  }
  const Index n = d.size();
  return DissipativeLaw{"linear_resistor", n, [d](const VectorXd& f) -> VectorXd { return d.cwiseProduct(f); }, true};
}

DissipativeLaw polynomial(Index dim, std::vector<double> c) {
  if (dim <= 0 || c.empty()) throw Error(ErrorKind::InvalidArgument, "polynomial law needs a dimension and coefficients");
  for (double v : c)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "polynomial coefficients must be finite");
  return DissipativeLaw{"polynomial", dim,
                        [c = std::move(c)](const VectorXd& f) -> VectorXd {
                          VectorXd z = VectorXd::Zero(f.size());
                          for (Index i = 0; i < f.size(); ++i)
                            for (std::size_t j = c.size(); j-- > 0;) z(i) = z(i) * f(i) + c[j];
                          return z;
                        },
                        false};
}

}  // namespace laws

ConverterLaw::ConverterLaw(DissipativeLaw law) : law_(std::move(law)) {
  if (!law_.z || law_.dim <= 0) throw Error(ErrorKind::InvalidArgument, "converter needs a dissipative law");
}

ConverterOutput ConverterLaw::operator()(const VectorXd& w) const {
  if (w.size() != dim())
    throw Error(ErrorKind::DimensionMismatch, "converter flow has " + std::to_string(w.size()) + " entries, expected " +
                                                  std::to_string(dim()));
  const double T_d = w(0);
  if (!(T_d > 0.0)) {
    std::ostringstream os;
    os << "converter temperature " << T_d;
    throw Error(ErrorKind::NonpositiveTemperature, os.str());
  }
  const VectorXd f = w.tail(law_.dim);
  const VectorXd z = law_.z(f);
  if (z.size() != law_.dim) throw Error(ErrorKind::DimensionMismatch, "dissipative law returned the wrong size");
  ConverterOutput out;
  out.dissipated = z.dot(f);
  if (out.dissipated < 0.0) {
    std::ostringstream os;
    os.precision(17);
    os << "law '" << law_.name << "' dissipates " << out.dissipated << " < 0";
    throw Error(ErrorKind::PassivityViolation, os.str());
  }
  out.sigma_i = out.dissipated / T_d;
  out.effort.resize(dim());
  out.effort(0) = -out.sigma_i;
  out.effort.tail(law_.dim) = z;
  return out;
}

ConverterLaw make_converter(DissipativeLaw law) { return ConverterLaw(std::move(law)); }

PhsStructure build_reversible(const std::vector<std::string>& labels) {
  if (labels.empty()) throw Error(ErrorKind::InvalidArgument, "reversible model needs at least the entropy");
  if (labels.front() != kEntropyLabel)
    throw Error(ErrorKind::InvalidArgument, "entropy '" + kEntropyLabel + "' must be the first storage label");
  const Index n = static_cast<Index>(labels.size());
  BlockLayout layout;
  layout.storage = labels;
  for (const auto& l : labels) layout.external.push_back(l == kEntropyLabel ? kEntropyFlowLabel : "ext:" + l);
  MatrixXd S = MatrixXd::Zero(2 * n, 2 * n);
  S.topRightCorner(n, n) = -MatrixXd::Identity(n, n);
  S.bottomLeftCorner(n, n) = MatrixXd::Identity(n, n);
  return PhsStructure{InterconnectionMatrix::assemble(std::move(S), std::move(layout)), std::nullopt, std::nullopt, {}};
}

PhsStructure build_dissipative(const InterconnectionBlocks& b, DissipativeLaw law, const PortLabels& given) {
  const PortLabels labels = resolve_labels(b, given);
  const auto nx = static_cast<Index>(labels.storage.size()), nw = static_cast<Index>(labels.dissipative.size()),
             nu = static_cast<Index>(labels.external.size());
  if (law.dim != nw) throw Error(ErrorKind::DimensionMismatch, "law dimension differs from the dissipative port count");
  const MatrixXd Jx = sized(b.J_x, nx, nx, "J_x"), K = sized(b.K, nx, nw, "K"), Gx = sized(b.G_x, nx, nu, "G_x"),
                 Jw = sized(b.J_w, nw, nw, "J_w"), Gw = sized(b.G_w, nw, nu, "G_w"), Jy = sized(b.J_y, nu, nu, "J_y");
  require_skew(Jx, "J_x");
  require_skew(Jw, "J_w");
  require_skew(Jy, "J_y");

  BlockLayout layout;
  layout.storage.push_back(kEntropyLabel);
  layout.storage.insert(layout.storage.end(), labels.storage.begin(), labels.storage.end());
  layout.dissipative = labels.dissipative;
  layout.external.push_back(kEntropyFlowLabel);
  layout.external.insert(layout.external.end(), labels.external.begin(), labels.external.end());

  // rows/cols: S | x0 | w0 | sigma_ext | u0
  const Index ox = 1, ow = 1 + nx, os = 1 + nx + nw, ou = os + 1;
  MatrixXd S = MatrixXd::Zero(layout.dim(), layout.dim());
  S(0, os) = -1.0;
  S(os, 0) = 1.0;
  S.block(ox, ox, nx, nx) = Jx;
  S.block(ox, ow, nx, nw) = -K;
  S.block(ox, ou, nx, nu) = -Gx;
  S.block(ow, ox, nw, nx) = K.transpose();
  S.block(ow, ow, nw, nw) = Jw;
  S.block(ow, ou, nw, nu) = -Gw;
  S.block(ou, ox, nu, nx) = Gx.transpose();
  S.block(ou, ow, nu, nw) = Gw.transpose();
  S.block(ou, ou, nu, nu) = Jy;
  return PhsStructure{InterconnectionMatrix::assemble(std::move(S), std::move(layout)), std::nullopt, std::move(law),
                      {}};
}

PhsStructure build_irreversible(const InterconnectionBlocks& b, DissipativeLaw law, const PortLabels& given) {
  const PortLabels labels = resolve_labels(b, given);
  const auto nx = static_cast<Index>(labels.storage.size()), nw = static_cast<Index>(labels.dissipative.size()),
             nu = static_cast<Index>(labels.external.size());
  if (law.dim != nw) throw Error(ErrorKind::DimensionMismatch, "law dimension differs from the dissipative port count");
  const MatrixXd Jx = sized(b.J_x, nx, nx, "J_x"), K = sized(b.K, nx, nw, "K"), Gx = sized(b.G_x, nx, nu, "G_x"),
                 Jw = sized(b.J_w, nw, nw, "J_w"), Gw = sized(b.G_w, nw, nu, "G_w"), Jy = sized(b.J_y, nu, nu, "J_y");
  require_skew(Jx, "J_x");
  require_skew(Jw, "J_w");
  require_skew(Jy, "J_y");

  BlockLayout layout;
  layout.storage.push_back(kEntropyLabel);
  layout.storage.insert(layout.storage.end(), labels.storage.begin(), labels.storage.end());
  layout.dissipative.push_back(kConverterTemperatureLabel);
  layout.dissipative.insert(layout.dissipative.end(), labels.dissipative.begin(), labels.dissipative.end());
  layout.external.push_back(kEntropyFlowLabel);
  layout.external.insert(layout.external.end(), labels.external.begin(), labels.external.end());

  // rows/cols: S | x0 | T_d | w0 | sigma_ext | u0
  const Index ox = 1, ot = 1 + nx, ow = ot + 1, os = ow + nw, ou = os + 1;
  MatrixXd S = MatrixXd::Zero(layout.dim(), layout.dim());
  S(0, ot) = -1.0;
  S(ot, 0) = 1.0;
  S(0, os) = -1.0;
  S(os, 0) = 1.0;
  S.block(ox, ox, nx, nx) = Jx;
  S.block(ox, ow, nx, nw) = -K;
  S.block(ox, ou, nx, nu) = -Gx;
  S.block(ow, ox, nw, nx) = K.transpose();
  S.block(ow, ow, nw, nw) = Jw;
  S.block(ow, ou, nw, nu) = -Gw;
  S.block(ou, ox, nu, nx) = Gx.transpose();
  S.block(ou, ow, nu, nw) = Gw.transpose();
  S.block(ou, ou, nu, nu) = Jy;
  return PhsStructure{InterconnectionMatrix::assemble(std::move(S), std::move(layout)),
                      make_converter(std::move(law)), std::nullopt, {}};
}

Hamiltonian::Hamiltonian(std::shared_ptr<const EnergyFunction> thermal, std::vector<std::string> mechanical,
                         MatrixXd Q)
    : thermal_(std::move(thermal)), mechanical_(std::move(mechanical)), Q_(std::move(Q)) {
  if (!thermal_) throw Error(ErrorKind::InvalidArgument, "Hamiltonian without thermal energy");
  const Index n = static_cast<Index>(mechanical_.size());
  if (Q_.size() == 0) Q_ = MatrixXd::Zero(n, n);
  if (Q_.rows() != n || Q_.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "quadratic storage matrix is " + shape(Q_) + " for " +
                                                  std::to_string(n) + " mechanical states");
  if (n && (Q_ - Q_.transpose()).cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, Q_.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::InvalidArgument, "quadratic storage matrix must be symmetric");
}

std::vector<std::string> Hamiltonian::labels() const {
  std::vector<std::string> out{kEntropyLabel};
  const auto& extras = thermal_->model().extra_labels();
  out.insert(out.end(), extras.begin(), extras.end());
  out.insert(out.end(), mechanical_.begin(), mechanical_.end());
  return out;
}

Index Hamiltonian::dim() const noexcept {
  return static_cast<Index>(1 + thermal_->model().extra_labels().size() + mechanical_.size());
}

MacroState Hamiltonian::macro_state(const VectorXd& x) const {
  if (x.size() != dim())
    throw Error(ErrorKind::DimensionMismatch, "state has " + std::to_string(x.size()) + " entries, expected " +
                                                  std::to_string(dim()));
  MacroState m;
  m.entropy = x(0);
  const auto& extras = thermal_->model().extra_labels();
  for (std::size_t i = 0; i < extras.size(); ++i) m.extras.set(extras[i], x(static_cast<Index>(i + 1)));
  return m;
}

VectorXd Hamiltonian::state(const MacroState& m, const VectorXd& q) const {
  const auto& extras = thermal_->model().extra_labels();
  const Index nq = static_cast<Index>(mechanical_.size());
  if (q.size() != nq) throw Error(ErrorKind::DimensionMismatch, "mechanical state has the wrong size");
  VectorXd x(dim());
  x(0) = m.entropy;
  for (std::size_t i = 0; i < extras.size(); ++i) x(static_cast<Index>(i + 1)) = m.extras.at(extras[i]);
  if (nq) x.tail(nq) = q;
  return x;
}

Hamiltonian::Evaluation Hamiltonian::evaluate(const VectorXd& x) const {
  const EnergyEvaluation th = thermal_->evaluate(macro_state(x));
  const Index nq = static_cast<Index>(mechanical_.size());
  Evaluation out;
  out.temperature = th.temperature;
  out.gradient.resize(dim());
  out.gradient.head(th.efforts.size()) = th.efforts;
  out.energy = th.energy;
  if (nq) {
    const VectorXd q = x.tail(nq);
    const VectorXd Qq = Q_ * q;
    out.gradient.tail(nq) = Qq;
    out.energy += 0.5 * q.dot(Qq);
  }
  return out;
}

PhsModel::PhsModel(PhsStructure structure, Hamiltonian hamiltonian)
    : structure_(std::move(structure)), hamiltonian_(std::move(hamiltonian)) {
  const BlockLayout& l = layout();
  if (l.storage != hamiltonian_.labels()) {
    std::string expected, got;
    for (const auto& s : hamiltonian_.labels()) expected += " " + s;
    for (const auto& s : l.storage) got += " " + s;
    throw Error(ErrorKind::DimensionMismatch, "storage ports (" + got + " ) do not match the state (" + expected + " )");
  }
  if (l.n_dissipative() > 0) {
    if (!structure_.converter && !structure_.plain_law)
      throw Error(ErrorKind::InvalidArgument, "dissipative ports without a law");
    const Index law_dim = structure_.converter ? structure_.converter->dim() : structure_.plain_law->dim;
    if (law_dim != l.n_dissipative())
      throw Error(ErrorKind::DimensionMismatch, "dissipative law size differs from the dissipative port count");
  }
  check_no_loop(structure_.interconnection.matrix(), l);
}

PortEvaluation PhsModel::evaluate(const VectorXd& x, const VectorXd& u) const {
  return evaluate(x, u, hamiltonian_.evaluate(x));
}

PortEvaluation PhsModel::evaluate(const VectorXd& x, const VectorXd& u, const Hamiltonian::Evaluation& h) const {
  const BlockLayout& l = layout();
  if (u.size() != l.n_external())
    throw Error(ErrorKind::DimensionMismatch, "input has " + std::to_string(u.size()) + " entries, expected " +
                                                  std::to_string(l.n_external()));
  if (!u.allFinite()) throw Error(ErrorKind::InvalidArgument, "input is not finite");

  MatrixXd varying;
  const MatrixXd* M = &structure_.interconnection.matrix();
  if (structure_.state_dependent) {
    varying = structure_.state_dependent(x);
    if (varying.rows() != M->rows() || varying.cols() != M->cols())
      throw Error(ErrorKind::DimensionMismatch, "state-dependent matrix has the wrong shape");
    if (skew_defect(varying) > 1e-12) {
      std::ostringstream os;
      os << "state-dependent matrix has max |S + S^T| entry " << skew_defect(varying);
      throw Error(ErrorKind::NotSkewSymmetric, os.str());
    }
    check_no_loop(varying, l);
    M = &varying;
  }

  if (h.gradient.size() != l.n_storage()) throw Error(ErrorKind::DimensionMismatch, "Hamiltonian gradient size");
  PortEvaluation out;
  out.energy = h.energy;
  out.temperature = h.temperature;

  const Index ns = l.n_storage(), nd = l.n_dissipative(), ne = l.n_external();
  const Index od = l.offset(Segment::dissipative), oe = l.offset(Segment::external);
  VectorXd e = VectorXd::Zero(l.dim());
  e.head(ns) = h.gradient;
  e.tail(ne) = u;
  if (nd > 0) {
    VectorXd w = M->block(od, 0, nd, l.dim()) * e;  // dissipative efforts do not enter (no loop)
    if (structure_.converter) {
      if (converter_temperature_) w(0) = *converter_temperature_;
      const ConverterOutput c = (*structure_.converter)(w);
      e.segment(od, nd) = c.effort;
      out.sigma_i = c.sigma_i;
    } else {
      const VectorXd z = structure_.plain_law->z(w);
      if (z.size() != nd) throw Error(ErrorKind::DimensionMismatch, "dissipative law returned the wrong size");
      if (z.dot(w) < 0.0) throw Error(ErrorKind::PassivityViolation, "law '" + structure_.plain_law->name + "' is active");
      e.segment(od, nd) = z;
    }
  }
  out.efforts = e;
  out.flows = (*M) * e;
  if (nd > 0 && structure_.converter && converter_temperature_) out.flows(od) = *converter_temperature_;
  out.x_dot = out.flows.head(ns);
  out.y = out.flows.tail(ne);
  auto part = [&](Index o, Index n) { return n ? e.segment(o, n).dot(out.flows.segment(o, n)) : 0.0; };
  out.power.P_s = part(0, ns);
  out.power.P_d = part(od, nd);
  out.power.P_ext = part(oe, ne);
  out.power.total = out.power.P_s + out.power.P_d + out.power.P_ext;
  if (ne > 0 && l.external.front() == kEntropyFlowLabel) out.sigma_ext = u(0);
  return out;
}

}  // namespace mphs
