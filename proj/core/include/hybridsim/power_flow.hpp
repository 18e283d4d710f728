#pragma once

#include <vector>

#include "hybridsim/network.hpp"

namespace hybridsim {

struct PowerFlowOptions {
  double tolerance = 1e-11;  // max power mismatch, pu
  int max_iterations = 30;
};

struct PowerFlowResult {
  std::vector<Complex> v;  // per bus, ordered as model.buses
  int iterations = 0;
  double max_mismatch = 0.0;
};

/// Newton-Raphson in polar coordinates with constant-power loads. Throws
/// PowerFlowInfeasible when it fails to converge.
PowerFlowResult solve_power_flow(const NetworkModel& m, const PowerFlowOptions& opt = {});

/// Complex power injected into each bus by the network, V conj(Y V), pu.
std::vector<Complex> bus_injections(const NetworkModel& m, const std::vector<Complex>& v);

/// Model plus the operating point that fixes the constant-impedance loads and
/// the internal emfs of the Thevenin sources.
struct SolvedNetwork {
  NetworkModel model;
  PowerFlowResult pf;
  std::vector<Complex> load_y;          // per load, pu
  std::vector<Complex> source_emf;      // per source, pu (ThevAC only; others zero)
  std::vector<Complex> source_current;  // per source, injected into its bus, pu

  Complex voltage(int bus_id) const { return pf.v[model.index_of(bus_id)]; }
};

SolvedNetwork solve_network(const NetworkModel& m, const PowerFlowOptions& opt = {});

}  // namespace hybridsim
