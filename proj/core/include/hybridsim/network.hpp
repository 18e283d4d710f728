#pragma once

#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hybridsim/signals.hpp"

namespace hybridsim {

enum class BusType { Slack, PV, PQ };

struct Bus {
  int id = 0;
  double base_kv_ll = 0.0;
  BusType type = BusType::PQ;
  double v_set_pu = 1.0;     // slack and PV
  double angle_deg = 0.0;    // slack
  double p_gen_mw = 0.0;     // PV

  bool operator==(const Bus&) const = default;
};

/// Series branch; an ideal tap sits on the `from` side. Zero-sequence
/// impedance defaults to the positive-sequence one.
struct Branch {
  int from = 0;
  int to = 0;
  double r_pu = 0.0;
  double x_pu = 0.0;
  double turn_ratio = 1.0;
  std::optional<Complex> z0_pu;

  Complex z1() const { return {r_pu, x_pu}; }
  Complex z0() const { return z0_pu.value_or(z1()); }
  bool operator==(const Branch&) const = default;
};

/// Constant-impedance load, sized from its scheduled power at the solved voltage.
struct Load {
  int bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;

  bool operator==(const Load&) const = default;
};

enum class SourceKind { ThevAC, FoSource, ControlledV, ControlledI };

std::string_view to_string(SourceKind k) noexcept;
SourceKind source_kind_from_string(std::string_view s);

/// Ideal source behind a series impedance, solidly grounded (wye). ThevAC
/// sources realise the power-flow injection of their bus; their emf comes from
/// solve_network().
struct Source {
  int bus = 0;
  SourceKind kind = SourceKind::ThevAC;
  Complex z_pu{0.0, 0.1};
  std::optional<Complex> z0_pu;
  std::optional<FoSourceSpec> fo;  // FoSource only

  Complex z0() const { return z0_pu.value_or(z_pu); }
  bool operator==(const Source&) const = default;
};

struct NetworkModel {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Load> loads;
  std::vector<Source> sources;
  double mva_base = 100.0;
  double f0 = 60.0;

  bool operator==(const NetworkModel&) const = default;

  /// Position of bus `id` in `buses`; throws InvalidArgument if absent.
  std::size_t index_of(int id) const;
  const Bus& bus(int id) const { return buses[index_of(id)]; }
  bool has_bus(int id) const;

  /// Structural checks: unique ids, base voltages, non-zero impedances,
  /// references to existing buses, one slack, connected graph.
  void validate() const;

  /// True when the buses in `region` are connected using only branches with
  /// both ends inside the region.
  bool connected(const std::set<int>& region) const;

  double omega0() const { return kTwoPi * f0; }
};

enum class SeqKind { Positive, Negative, Zero };

/// Bus admittance matrix over `region` (all buses when empty), ordered as in
/// `buses`, for the requested sequence. Loads and sources are not included.
Eigen::MatrixXcd branch_admittance(const NetworkModel& m, SeqKind seq,
                                   const std::vector<int>& region_order);

/// Load admittance (pu) at bus voltage magnitude `v`.
Complex load_admittance(const Load& load, double mva_base, double v);

void to_json(nlohmann::json& j, const FoSourceSpec& s);
void from_json(const nlohmann::json& j, FoSourceSpec& s);
void to_json(nlohmann::json& j, const NetworkModel& m);
void from_json(const nlohmann::json& j, NetworkModel& m);

}  // namespace hybridsim
