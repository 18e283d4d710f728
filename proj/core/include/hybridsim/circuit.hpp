#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hybridsim {

inline constexpr int kGround = -1;

/// Lumped linear circuit integrated with trapezoidal companion models and
/// solved by nodal analysis. Units are whatever the caller uses consistently
/// (the EMT layer works in per unit).
class Circuit {
 public:
  int add_node(std::string name);
  std::size_t node_count() const { return names_.size(); }
  const std::string& node_name(int n) const { return names_.at(static_cast<std::size_t>(n)); }

  /// m coupled series R-L branches from[i] -> to[i]. An ideal tap k sits on the
  /// from side (v_from/k across the impedance), and a series emf e raises the
  /// potential from the from side towards the to side:
  ///   v_from/k - v_to + e = R i + L di/dt.
  std::size_t add_rl(std::vector<int> from, std::vector<int> to, const Eigen::MatrixXd& r,
                     const Eigen::MatrixXd& l, double tap = 1.0);
  /// Emf applied over the next step (value at the end of the step).
  void set_rl_emf(std::size_t id, const Eigen::VectorXd& e);
  /// Current through each conductor, from side towards to side, after the tap.
  const Eigen::VectorXd& rl_current(std::size_t id) const { return rl_.at(id).i; }

  std::size_t add_capacitor(int a, int b, double c);
  double capacitor_current(std::size_t id) const { return caps_.at(id).i; }

  std::size_t add_resistor(int a, int b, double r);

  /// Resistor that can be removed from the circuit (open) or inserted (closed).
  std::size_t add_switch(int a, int b, double r_closed, bool closed);
  void set_switch(std::size_t id, bool closed);
  bool switch_closed(std::size_t id) const { return switches_.at(id).closed; }
  void set_switch_resistance(std::size_t id, double r_closed);
  /// Current a -> b through the switch at the last solved step.
  double switch_current(std::size_t id) const;

  /// Ideal current source pushing `value` from node a into node b.
  std::size_t add_current_source(int a, int b);
  void set_current(std::size_t id, double value);

  double voltage(int node) const;
  const Eigen::VectorXd& voltages() const { return v_; }

  /// Advance one step of length dt. Throws SingularMatrix when the nodal
  /// matrix cannot be factorized.
  void step(double dt);
  double time() const { return t_; }
  void set_time(double t) { t_ = t; }

  /// Max |Y v - J| from the last solve.
  double kcl_residual() const { return residual_; }

 private:
  struct Rl {
    std::vector<int> from, to;
    Eigen::MatrixXd r, l;
    double tap = 1.0;
    Eigen::MatrixXd g;      // (2A)^-1
    Eigen::MatrixXd p;      // A^-1 B
    Eigen::VectorXd e, i, vb;
  };
  struct Cap {
    int a, b;
    double c, g = 0.0, i = 0.0, v = 0.0;
  };
  struct Res {
    int a, b;
    double g;
  };
  struct Switch {
    int a, b;
    double g;
    bool closed;
  };
  struct Isrc {
    int a, b;
    double value = 0.0;
  };

  void build(double dt);
  double vnode(int n) const { return n == kGround ? 0.0 : v_[n]; }

  std::vector<std::string> names_;
  std::vector<Rl> rl_;
  std::vector<Cap> caps_;
  std::vector<Res> res_;
  std::vector<Switch> switches_;
  std::vector<Isrc> isrc_;

  Eigen::MatrixXd y_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd v_, j_;
  double built_dt_ = 0.0;
  bool dirty_ = true;
  double t_ = 0.0;
  double residual_ = 0.0;
};

}  // namespace hybridsim
