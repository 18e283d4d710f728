#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hybridsim/circuit.hpp"
#include "hybridsim/power_flow.hpp"
#include "hybridsim/signals.hpp"

namespace hybridsim {

enum class FaultKind { ThreePhaseG, SinglePhaseG, PhaseBCtoG };

std::string_view to_string(FaultKind k) noexcept;
FaultKind fault_kind_from_string(std::string_view s);

struct FaultSpec {
  int bus = 0;
  FaultKind kind = FaultKind::ThreePhaseG;
  double r_fault_ohm = 0.0;  // 0 = bolted
  double t_on = 0.0;
  double t_off = 0.0;

  bool operator==(const FaultSpec&) const = default;
  void validate() const;
};

void to_json(nlohmann::json& j, const FaultSpec& f);
void from_json(const nlohmann::json& j, FaultSpec& f);

struct EmtOptions {
  double dt = 20e-6;
  /// Simulation start; sources ramp from zero over `ramp_time` and then settle
  /// until t = 0, where scenario time begins.
  double t_start = -0.5;
  double ramp_time = 0.1;
  /// Open fault poles exactly at t_off instead of at the next current zero.
  bool instantaneous_clearing = false;
  /// Abort when any node voltage exceeds this many pu.
  double divergence_limit_pu = 10.0;
  /// Resistance used for bolted faults, pu.
  double bolted_r_pu = 1e-6;
  /// Series resistance of forced-oscillation sources, pu.
  double fo_r_pu = 1e-5;
  /// Breaker closing time of forced-oscillation sources.
  double fo_close_time = 0.0;
};

/// Snapshot of the solver state.
struct EmtState {
  double t = 0.0;
  std::map<int, std::array<double, 3>> bus_voltage_volts;
  std::vector<bool> switch_closed;
};

/// Three-phase EMT model of a region of a solved network. Internal quantities
/// are per unit with 1.0 equal to the peak phase base voltage/current;
/// recorded voltages are converted to volts.
class EmtSystem {
 public:
  /// Buses in `region` (all buses when empty) with their branches, loads and
  /// sources. Throws InvalidArgument when the region is disconnected.
  EmtSystem(const SolvedNetwork& net, std::set<int> region, EmtOptions opt = {});

  const std::set<int>& region() const { return region_; }
  const EmtOptions& options() const { return opt_; }
  double time() const { return t_; }
  std::size_t steps() const { return steps_; }

  void apply_fault(const FaultSpec& f);

  /// Forced-oscillation source at `bus`. Its breaker closes at fo_close_time
  /// with carrier magnitude and phase taken from the bus voltage over the
  /// preceding cycle, so no power is exchanged at closing.
  std::size_t attach_fo_source(const FoSourceSpec& spec, int bus);
  /// Carrier parameters actually used (filled in at breaker closing).
  const FoSourceSpec& fo_spec(std::size_t id) const { return fo_.at(id).spec; }
  /// Instantaneous three-phase power from the FO source into its bus, pu.
  double fo_power_pu(std::size_t id) const;

  /// Controlled three-phase voltage source at `bus` behind the uncoupled
  /// per-phase impedance `z_pu`. It follows phasors set by set_controlled_phasors.
  std::size_t add_controlled_voltage(int bus, Complex z_pu);
  /// Per-phase emf phasors at the start and end of [t_from, t_to]; magnitude
  /// and unwrapped angle are interpolated linearly in between and held after.
  void set_controlled_phasors(std::size_t id, const PhaseSet& from, const PhaseSet& to,
                              double t_from, double t_to);
  /// Current from the source into its bus, pu per phase.
  std::array<double, 3> controlled_current(std::size_t id) const;

  /// Advance one step of options().dt.
  void step();
  /// Step until time() >= t (within half a step).
  void run_until(double t);

  /// Voltage of a bus phase in pu (peak base).
  double voltage_pu(int bus, int phase) const;
  std::array<double, 3> voltage_volts(int bus) const;

  /// Start recording a bus voltage (volts) from the current step on; the
  /// current sample is recorded immediately.
  void record_bus(int bus);
  const ThreePhaseWaveform& recorded_voltage(int bus) const;
  void record_controlled_current(std::size_t id);
  const ThreePhaseWaveform& recorded_current(std::size_t id) const;

  double base_kv(int bus) const { return net_.model.bus(bus).base_kv_ll; }
  double kcl_residual() const { return circuit_.kcl_residual(); }
  EmtState state() const;

  /// Ramp factor applied to every voltage source at time t.
  double ramp(double t) const;

 private:
  struct Thev {
    std::size_t branch;
    Complex emf;
  };
  struct Fault {
    FaultSpec spec;
    std::array<std::optional<std::size_t>, 3> sw;
    std::array<double, 3> last_current{};
    std::array<bool, 3> done{};
    bool started = false;
  };
  struct Fo {
    FoSourceSpec spec;
    int bus;
    std::size_t branch;
    std::array<std::size_t, 3> sw;
    bool closed = false;
  };
  struct Controlled {
    int bus;
    std::size_t branch;
    PhaseSet from{}, to{};
    double t_from = 0.0, t_to = 0.0;
  };

  const std::array<int, 3>& nodes(int bus) const;
  void update_sources(double t);
  void update_switches(double t);
  void after_solve();
  void record();
  double bus_peak_volts(int bus) const;

  SolvedNetwork net_;
  std::set<int> region_;
  EmtOptions opt_;
  Circuit circuit_;
  std::map<int, std::array<int, 3>> nodes_;
  std::vector<Thev> thev_;
  std::vector<Fault> faults_;
  std::vector<Fo> fo_;
  std::vector<Controlled> ctrl_;
  std::map<int, ThreePhaseWaveform> v_rec_;
  std::map<std::size_t, ThreePhaseWaveform> i_rec_;
  double t_ = 0.0;
  std::size_t steps_ = 0;
  double omega_ = 0.0;
};

/// Phase-coupled series matrices (R, L) for sequence impedances z1 and z0.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> coupled_rl(Complex z1, Complex z0, double omega0);

}  // namespace hybridsim
