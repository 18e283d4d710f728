#pragma once

#include <array>
#include <memory>
#include <set>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hybridsim/emt.hpp"
#include "hybridsim/error_index.hpp"
#include "hybridsim/ts.hpp"

namespace hybridsim {

/// How the EMT side reports to the TS side. PosSeqPQ sends positive-sequence
/// P and Q; PosSeqCurrent sends the positive-sequence current phasor;
/// ThreeSeqCurrent sends all three sequence currents and receives all three
/// sequence voltages back.
enum class Protocol { PosSeqPQ, PosSeqCurrent, ThreeSeqCurrent };

std::string_view to_string(Protocol p) noexcept;
Protocol protocol_from_string(std::string_view s);

struct BoundarySpec {
  int bus = 3;
  Protocol protocol = Protocol::PosSeqPQ;
  int delay_steps = 1;

  bool operator==(const BoundarySpec&) const = default;
  void validate() const;
};

void to_json(nlohmann::json& j, const BoundarySpec& b);
void from_json(const nlohmann::json& j, BoundarySpec& b);

enum class Direction { EmtToTs, TsToEmt };

enum class PayloadKind { PQ, SeqCurrent, SeqVoltage };

/// Immutable record of one boundary exchange.
struct ExchangeMessage {
  Direction direction = Direction::EmtToTs;
  std::size_t macro_index = 0;
  double t = 0.0;
  PayloadKind kind = PayloadKind::PQ;
  Complex pq{};       // P + jQ into the TS side, pu
  SequenceSet seq{};  // currents into the TS side or TS voltages, pu

  bool operator==(const ExchangeMessage&) const = default;
};

struct FoEvent {
  int bus = 0;
  FoSourceSpec spec;

  bool operator==(const FoEvent&) const = default;
};

struct ScenarioEvents {
  std::vector<FaultSpec> faults;
  std::vector<FoEvent> fo;

  bool operator==(const ScenarioEvents&) const = default;
};

struct HybridOptions {
  EmtOptions emt;
  double dt_macro = 1.0 / 120.0;
  /// Length of the phasor-estimation window in fundamental cycles.
  double window_cycles = 1.0;
  /// Stride (in EMT samples) of the recorded sequence trajectories.
  std::size_t seq_stride = 50;
  /// Solve the next TS step on a worker thread while the EMT side advances.
  bool pipelined = false;
  /// Upper bound for the zero-sequence Thevenin impedance at the boundary, pu.
  double zero_seq_cap_pu = 1e4;
};

/// Both halves of a network cut at a boundary bus.
struct HybridSplit {
  std::set<int> emt_region;
  std::set<int> ts_region;
  std::unique_ptr<EmtSystem> emt;
  std::unique_ptr<SeqNetwork> ts;
  std::size_t boundary_source = 0;  // controlled source id in emt
  Complex z_eq{};                   // positive-sequence TS Thevenin impedance
};

/// Splits `net` at `boundary.bus`: the EMT side gets `emt_buses`, the TS side
/// the remaining buses plus the boundary. Throws InvalidCut when a side is
/// empty or disconnected or a branch crosses the cut elsewhere.
HybridSplit split(const SolvedNetwork& net, const BoundarySpec& boundary,
                  const std::set<int>& emt_buses, const HybridOptions& opt = {});

/// Zero-sequence Thevenin impedance at `bus`; throws FloatingZeroSequence when
/// it exceeds `cap_pu`.
Complex check_zero_seq_grounding(const SeqNetwork& net, int bus, double cap_pu = 1e4);

struct HybridRunRecord {
  BoundarySpec boundary;
  double f0 = 60.0;
  double base_kv_ll = 0.0;
  std::size_t micro_per_macro = 0;
  /// Boundary voltage on the EMT side, volts, sampled at the EMT step.
  ThreePhaseWaveform emt_voltage;
  /// Current from the boundary bus into the TS-side equivalent, pu.
  ThreePhaseWaveform emt_current;
  /// TS boundary voltage per macro step (pos, neg, zero).
  std::array<PhasorTrajectory, 3> ts_voltage;
  /// Sequence phasors of emt_voltage (pos, neg, zero).
  std::array<PhasorTrajectory, 3> emt_sequences;
  std::vector<ExchangeMessage> messages;
  double wall_seconds = 0.0;

  /// TS-side waveform rebuilt on the EMT sampling grid, volts.
  ThreePhaseWaveform reconstructed_ts() const;
};

/// e_idx, e'_idx and verdict from the within-hybrid signals (e_true unset).
ErrorReport error_report(const HybridRunRecord& rec, const IndexConfig& cfg);

/// Lockstep co-simulation until scenario time `t_end` (simulation starts at
/// opt.emt.t_start so the network can settle).
HybridRunRecord run_hybrid(const SolvedNetwork& net, const std::set<int>& emt_buses,
                           const BoundarySpec& boundary, const ScenarioEvents& events,
                           double t_end, const HybridOptions& opt = {});

struct FullEmtRecord {
  int bus = 0;
  double base_kv_ll = 0.0;
  ThreePhaseWaveform voltage;
  std::array<PhasorTrajectory, 3> sequences;
};

/// Whole network in the EMT solver; records `bus`.
FullEmtRecord run_full_emt(const SolvedNetwork& net, int bus, const ScenarioEvents& events,
                           double t_end, const HybridOptions& opt = {});

}  // namespace hybridsim
