#include "hybridsim/ts.hpp"

#include <cmath>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

std::size_t sidx(Sequence s) { return static_cast<std::size_t>(s); }

bool singular(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu, const Eigen::MatrixXcd& y) {
  const double scale = y.cwiseAbs().maxCoeff();
  const auto d = lu.matrixLU().diagonal().cwiseAbs();
  return !(scale > 0.0) || !d.allFinite() || d.minCoeff() <= 1e-12 * scale;
}

}  // namespace

SeqNetwork::SeqNetwork(const SolvedNetwork& net, std::set<int> region, TsMode mode,
                       std::set<int> no_shunts, double dt_macro)
    : mode_(mode), dt_macro_(dt_macro) {
  const auto& m = net.model;
  if (!(dt_macro > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt_macro must be positive");
  if (region.empty())
    for (const auto& b : m.buses) region.insert(b.id);
  for (int id : region)
    if (!m.has_bus(id)) throw Error(ErrorCode::InvalidArgument, "region bus " + std::to_string(id) + " not in model");
  if (!m.connected(region)) throw Error(ErrorCode::InvalidArgument, "TS region is not connected");
  for (const auto& b : m.buses)
    if (region.count(b.id)) {
      pos_[b.id] = order_.size();
      order_.push_back(b.id);
    }
  const auto n = static_cast<Eigen::Index>(order_.size());

  y_base_[0] = branch_admittance(m, SeqKind::Positive, order_);
  y_base_[1] = branch_admittance(m, SeqKind::Negative, order_);
  y_base_[2] = branch_admittance(m, SeqKind::Zero, order_);
  source_i_ = Eigen::VectorXcd::Zero(n);
  for (std::size_t i = 0; i < m.loads.size(); ++i) {
    const auto& l = m.loads[i];
    if (!region.count(l.bus) || no_shunts.count(l.bus)) continue;
    const auto k = static_cast<Eigen::Index>(index(l.bus));
    for (auto& y : y_base_) y(k, k) += net.load_y[i];
  }
  for (std::size_t i = 0; i < m.sources.size(); ++i) {
    const auto& s = m.sources[i];
    if (!region.count(s.bus) || no_shunts.count(s.bus)) continue;
    if (s.kind != SourceKind::ThevAC)
      throw Error(ErrorCode::InvalidArgument, "only Thevenin sources can sit in the TS region");
    const auto k = static_cast<Eigen::Index>(index(s.bus));
    y_base_[0](k, k) += 1.0 / s.z_pu;
    y_base_[1](k, k) += 1.0 / s.z_pu;
    y_base_[2](k, k) += 1.0 / s.z0();
    source_i_[k] += net.source_emf[i] / s.z_pu;
  }
  y_ = y_base_;
  for (auto& v : inj_) v = Eigen::VectorXcd::Zero(n);

  for (std::size_t s = 0; s < 3; ++s) {
    if (!active(static_cast<Sequence>(s))) continue;
    factorize(s);
  }
  solve();
}

std::size_t SeqNetwork::index(int bus) const {
  auto it = pos_.find(bus);
  if (it == pos_.end()) throw Error(ErrorCode::InvalidArgument, "bus " + std::to_string(bus) + " is outside the TS region");
  return it->second;
}

void SeqNetwork::factorize(std::size_t s) const {
  lu_[s].compute(y_[s]);
  if (singular(lu_[s], y_[s])) {
    if (s == 2)
      throw Error(ErrorCode::FloatingZeroSequence,
                  "floating zero-sequence network: no grounding path in the TS region");
    throw Error(ErrorCode::SingularMatrix, "singular sequence admittance matrix");
  }
  dirty_[s] = false;
}

void SeqNetwork::inject(int bus, Sequence seq, Complex current) {
  if (!active(seq))
    throw Error(ErrorCode::InvalidArgument, "negative/zero-sequence injection in positive-only mode");
  if (!std::isfinite(current.real()) || !std::isfinite(current.imag()))
    throw Error(ErrorCode::InvalidArgument, "non-finite injection");
  inj_[sidx(seq)][static_cast<Eigen::Index>(index(bus))] = current;
}

void SeqNetwork::inject_pq(int bus, double p_pu, double q_pu, double eps) {
  const Complex v = voltage(bus, Sequence::Positive);
  if (std::abs(v) < eps)
    throw Error(ErrorCode::DivisionByZero,
                "PQ to current conversion at bus " + std::to_string(bus) + " with |V| = " +
                    std::to_string(std::abs(v)) + " pu");
  inject(bus, Sequence::Positive, std::conj(Complex(p_pu, q_pu) / v));
}

Complex SeqNetwork::injection(int bus, Sequence seq) const {
  return inj_[sidx(seq)][static_cast<Eigen::Index>(index(bus))];
}

void SeqNetwork::clear_injections() {
  for (auto& v : inj_) v.setZero();
}

void SeqNetwork::set_shunt(int bus, Sequence seq, Complex y) {
  if (!active(seq))
    throw Error(ErrorCode::InvalidArgument, "negative/zero-sequence shunt in positive-only mode");
  const auto k = static_cast<Eigen::Index>(index(bus));
  auto& slot = shunts_[{bus, static_cast<int>(seq)}];
  y_[sidx(seq)](k, k) += y - slot;
  slot = y;
  dirty_[sidx(seq)] = true;
}

void SeqNetwork::clear_shunts() {
  shunts_.clear();
  y_ = y_base_;
  dirty_ = {true, true, true};
}

const TsState& SeqNetwork::solve() {
  state_.t = t_;
  std::array<Eigen::VectorXcd, 3> v;
  for (std::size_t s = 0; s < 3; ++s) {
    if (!active(static_cast<Sequence>(s))) {
      v[s] = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(order_.size()));
      continue;
    }
    if (dirty_[s]) factorize(s);
    Eigen::VectorXcd rhs = inj_[s];
    if (s == 0) rhs += source_i_;
    v[s] = lu_[s].solve(rhs);
    if (!v[s].allFinite()) throw Error(ErrorCode::SingularMatrix, "TS solve produced non-finite values");
  }
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    state_.v[order_[i]] = SequenceSet{v[0][k], v[1][k], v[2][k]};
  }
  return state_;
}

const TsState& SeqNetwork::solve_step() {
  t_ += dt_macro_;
  return solve();
}

Complex SeqNetwork::voltage(int bus, Sequence seq) const {
  index(bus);
  return component(state_.v.at(bus), seq);
}

Complex SeqNetwork::thevenin_impedance(int bus, Sequence seq) const {
  if (!active(seq)) throw Error(ErrorCode::InvalidArgument, "sequence not modelled in positive-only mode");
  const std::size_t s = sidx(seq);
  if (dirty_[s]) factorize(s);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(order_.size()));
  const auto k = static_cast<Eigen::Index>(index(bus));
  e[k] = 1.0;
  return lu_[s].solve(e)[k];
}

Complex SeqNetwork::open_circuit_voltage(int bus, Sequence seq) const {
  if (seq != Sequence::Positive) return {};
  if (dirty_[0]) factorize(0);
  return lu_[0].solve(source_i_)[static_cast<Eigen::Index>(index(bus))];
}

}  // namespace hybridsim
