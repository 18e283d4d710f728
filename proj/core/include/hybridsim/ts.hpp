#pragma once

#include <array>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "hybridsim/power_flow.hpp"
#include "hybridsim/signals.hpp"

namespace hybridsim {

enum class TsMode { PosOnly, ThreeSeq };

struct TsState {
  double t = 0.0;
  std::map<int, SequenceSet> v;  // per bus, pu
};

/// Algebraic sequence-network solver over a region of a solved network.
/// Thevenin sources appear as Norton equivalents, loads as constant
/// admittances. Injections are currents into a bus, pu.
class SeqNetwork {
 public:
  /// Loads and sources located at buses in `no_shunts` are left out (they
  /// belong to the other side of a boundary). Throws FloatingZeroSequence in
  /// ThreeSeq mode when the zero-sequence matrix is singular.
  SeqNetwork(const SolvedNetwork& net, std::set<int> region, TsMode mode,
             std::set<int> no_shunts = {}, double dt_macro = 1.0 / 120.0);

  TsMode mode() const { return mode_; }
  const std::vector<int>& buses() const { return order_; }
  bool has_bus(int bus) const { return pos_.count(bus) > 0; }
  double dt_macro() const { return dt_macro_; }
  double time() const { return t_; }
  void set_time(double t) { t_ = t; }

  void inject(int bus, Sequence seq, Complex current);
  /// Converts P + jQ (pu, into the bus) to a current with the last solved
  /// voltage. Throws DivisionByZero when that voltage is below `eps`.
  void inject_pq(int bus, double p_pu, double q_pu, double eps = 1e-6);
  Complex injection(int bus, Sequence seq) const;
  void clear_injections();

  /// Extra shunt admittance at a bus in one sequence (replaces any previous one).
  void set_shunt(int bus, Sequence seq, Complex y);
  void clear_shunts();

  /// Solve all active sequences and advance time by dt_macro.
  const TsState& solve_step();
  /// Solve without advancing time.
  const TsState& solve();
  const TsState& state() const { return state_; }
  Complex voltage(int bus, Sequence seq) const;

  /// Driving-point impedance at `bus` for the sequence, pu.
  Complex thevenin_impedance(int bus, Sequence seq) const;
  /// Voltage at `bus` with every injection removed.
  Complex open_circuit_voltage(int bus, Sequence seq) const;

  const Eigen::MatrixXcd& admittance(Sequence seq) const { return y_[static_cast<std::size_t>(seq)]; }

 private:
  std::size_t index(int bus) const;
  void factorize(std::size_t s) const;
  bool active(Sequence seq) const { return mode_ == TsMode::ThreeSeq || seq == Sequence::Positive; }

  TsMode mode_;
  double dt_macro_;
  std::vector<int> order_;
  std::map<int, std::size_t> pos_;
  std::array<Eigen::MatrixXcd, 3> y_base_;
  std::array<Eigen::MatrixXcd, 3> y_;
  mutable std::array<Eigen::PartialPivLU<Eigen::MatrixXcd>, 3> lu_;
  mutable std::array<bool, 3> dirty_{true, true, true};
  Eigen::VectorXcd source_i_;                          // positive-sequence Norton currents
  std::array<Eigen::VectorXcd, 3> inj_;
  std::map<std::pair<int, int>, Complex> shunts_;
  TsState state_;
  double t_ = 0.0;
};

}  // namespace hybridsim
