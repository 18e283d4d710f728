#include "hybridsim/circuit.hpp"

#include <cmath>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

void check_node(int n, std::size_t count) {
  if (n < kGround || n >= static_cast<int>(count))
    throw Error(ErrorCode::InvalidArgument, "node index out of range: " + std::to_string(n));
}

}  // namespace

int Circuit::add_node(std::string name) {
  names_.push_back(std::move(name));
  dirty_ = true;
  v_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names_.size()));
  return static_cast<int>(names_.size() - 1);
}

std::size_t Circuit::add_rl(std::vector<int> from, std::vector<int> to, const Eigen::MatrixXd& r,
                            const Eigen::MatrixXd& l, double tap) {
  const auto m = static_cast<Eigen::Index>(from.size());
  if (m == 0 || to.size() != from.size() || r.rows() != m || r.cols() != m || l.rows() != m ||
      l.cols() != m)
    throw Error(ErrorCode::InvalidArgument, "RL branch dimensions disagree");
  if (!(tap > 0.0)) throw Error(ErrorCode::InvalidArgument, "tap must be positive");
  for (int n : from) check_node(n, names_.size());
  for (int n : to) check_node(n, names_.size());
  Rl b;
  b.from = std::move(from);
  b.to = std::move(to);
  b.r = r;
  b.l = l;
  b.tap = tap;
  b.e = b.i = b.vb = Eigen::VectorXd::Zero(m);
  rl_.push_back(std::move(b));
  dirty_ = true;
  return rl_.size() - 1;
}

void Circuit::set_rl_emf(std::size_t id, const Eigen::VectorXd& e) {
  auto& b = rl_.at(id);
  if (e.size() != b.e.size()) throw Error(ErrorCode::InvalidArgument, "emf size mismatch");
  b.e = e;
}

std::size_t Circuit::add_capacitor(int a, int b, double c) {
  check_node(a, names_.size());
  check_node(b, names_.size());
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "capacitance must be positive");
  caps_.push_back({a, b, c});
  dirty_ = true;
  return caps_.size() - 1;
}

std::size_t Circuit::add_resistor(int a, int b, double r) {
  check_node(a, names_.size());
  check_node(b, names_.size());
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "resistance must be positive");
  res_.push_back({a, b, 1.0 / r});
  dirty_ = true;
  return res_.size() - 1;
}

std::size_t Circuit::add_switch(int a, int b, double r_closed, bool closed) {
  check_node(a, names_.size());
  check_node(b, names_.size());
  if (!(r_closed > 0.0)) throw Error(ErrorCode::InvalidArgument, "switch resistance must be positive");
  switches_.push_back({a, b, 1.0 / r_closed, closed});
  dirty_ = true;
  return switches_.size() - 1;
}

void Circuit::set_switch(std::size_t id, bool closed) {
  auto& s = switches_.at(id);
  if (s.closed != closed) {
    s.closed = closed;
    dirty_ = true;
  }
}

void Circuit::set_switch_resistance(std::size_t id, double r_closed) {
  if (!(r_closed > 0.0)) throw Error(ErrorCode::InvalidArgument, "switch resistance must be positive");
  switches_.at(id).g = 1.0 / r_closed;
  dirty_ = true;
}

double Circuit::switch_current(std::size_t id) const {
  const auto& s = switches_.at(id);
  return s.closed ? s.g * (vnode(s.a) - vnode(s.b)) : 0.0;
}

std::size_t Circuit::add_current_source(int a, int b) {
  check_node(a, names_.size());
  check_node(b, names_.size());
  isrc_.push_back({a, b});
  return isrc_.size() - 1;
}

void Circuit::set_current(std::size_t id, double value) { isrc_.at(id).value = value; }

double Circuit::voltage(int node) const {
  check_node(node, names_.size());
  return vnode(node);
}

void Circuit::build(double dt) {
  const auto n = static_cast<Eigen::Index>(names_.size());
  y_ = Eigen::MatrixXd::Zero(n, n);
  auto stamp = [this](int a, int b, double g) {
    if (a != kGround) y_(a, a) += g;
    if (b != kGround) y_(b, b) += g;
    if (a != kGround && b != kGround) {
      y_(a, b) -= g;
      y_(b, a) -= g;
    }
  };
  for (auto& b : rl_) {
    const Eigen::MatrixXd a = 0.5 * b.r + b.l / dt;
    const Eigen::MatrixXd bm = b.l / dt - 0.5 * b.r;
    Eigen::FullPivLU<Eigen::MatrixXd> alu(a);
    if (!alu.isInvertible()) throw Error(ErrorCode::SingularMatrix, "RL branch with zero impedance");
    b.g = alu.inverse() * 0.5;
    b.p = alu.solve(bm);
    const double k = b.tap;
    const auto m = static_cast<Eigen::Index>(b.from.size());
    for (Eigen::Index p = 0; p < m; ++p) {
      for (Eigen::Index q = 0; q < m; ++q) {
        const double g = b.g(p, q);
        const int fp = b.from[p], fq = b.from[q], tp = b.to[p], tq = b.to[q];
        if (fp != kGround && fq != kGround) y_(fp, fq) += g / (k * k);
        if (tp != kGround && tq != kGround) y_(tp, tq) += g;
        if (fp != kGround && tq != kGround) y_(fp, tq) -= g / k;
        if (tp != kGround && fq != kGround) y_(tp, fq) -= g / k;
      }
    }
  }
  for (auto& c : caps_) {
    c.g = 2.0 * c.c / dt;
    stamp(c.a, c.b, c.g);
  }
  for (const auto& r : res_) stamp(r.a, r.b, r.g);
  for (const auto& s : switches_)
    if (s.closed) stamp(s.a, s.b, s.g);

  if (n > 0) {
    lu_.compute(y_);
    // PartialPivLU does not report singularity; check the pivots directly.
    const auto& d = lu_.matrixLU().diagonal();
    const double scale = y_.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || d.cwiseAbs().minCoeff() <= 1e-13 * scale || !d.allFinite())
      throw Error(ErrorCode::SingularMatrix, "nodal matrix is singular (floating node?)");
  }
  built_dt_ = dt;
  dirty_ = false;
}

void Circuit::step(double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
  if (dirty_ || dt != built_dt_) build(dt);
  const auto n = static_cast<Eigen::Index>(names_.size());
  j_ = Eigen::VectorXd::Zero(n);
  auto inject = [this](int node, double val) {
    if (node != kGround) j_[node] += val;
  };

  // history sources
  std::vector<Eigen::VectorXd> hist(rl_.size());
  for (std::size_t id = 0; id < rl_.size(); ++id) {
    const auto& b = rl_[id];
    hist[id] = b.g * b.vb + b.p * b.i;
    const Eigen::VectorXd c = hist[id] + b.g * b.e;
    for (std::size_t p = 0; p < b.from.size(); ++p) {
      inject(b.from[p], -c[static_cast<Eigen::Index>(p)] / b.tap);
      inject(b.to[p], c[static_cast<Eigen::Index>(p)]);
    }
  }
  std::vector<double> chist(caps_.size());
  for (std::size_t id = 0; id < caps_.size(); ++id) {
    const auto& c = caps_[id];
    chist[id] = -(c.g * c.v + c.i);
    inject(c.a, -chist[id]);
    inject(c.b, chist[id]);
  }
  for (const auto& s : isrc_) {
    inject(s.a, -s.value);
    inject(s.b, s.value);
  }

  if (n > 0) {
    v_ = lu_.solve(j_);
    if (!v_.allFinite()) throw Error(ErrorCode::SingularMatrix, "nodal solve produced non-finite values");
    residual_ = (y_ * v_ - j_).cwiseAbs().maxCoeff();
  }

  for (std::size_t id = 0; id < rl_.size(); ++id) {
    auto& b = rl_[id];
    const auto m = static_cast<Eigen::Index>(b.from.size());
    for (Eigen::Index p = 0; p < m; ++p)
      b.vb[p] = vnode(b.from[p]) / b.tap - vnode(b.to[p]) + b.e[p];
    b.i = b.g * b.vb + hist[id];
  }
  for (std::size_t id = 0; id < caps_.size(); ++id) {
    auto& c = caps_[id];
    c.v = vnode(c.a) - vnode(c.b);
    c.i = c.g * c.v + chist[id];
  }
  t_ += dt;
}

}  // namespace hybridsim
