#include "hybridsim/hybrid.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

std::size_t micro_steps(const HybridOptions& opt) {
  if (!(opt.emt.dt > 0.0) || !(opt.dt_macro > 0.0))
    throw Error(ErrorCode::InvalidArgument, "dt and dt_macro must be positive");
  const auto n = static_cast<std::size_t>(std::llround(opt.dt_macro / opt.emt.dt));
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "dt_macro must be at least one EMT step");
  return n;
}

std::size_t macro_count(const HybridOptions& opt, std::size_t n, double t_end) {
  const double span = t_end - opt.emt.t_start;
  if (!(span > 0.0)) throw Error(ErrorCode::InvalidArgument, "end time precedes the simulation start");
  const double h = static_cast<double>(n) * opt.emt.dt;
  return static_cast<std::size_t>(std::ceil(span / h - 1e-9));
}

constexpr std::array<Sequence, 3> kSeqs{Sequence::Positive, Sequence::Negative, Sequence::Zero};

}  // namespace

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::PosSeqPQ: return "PosSeqPQ";
    case Protocol::PosSeqCurrent: return "PosSeqCurrent";
    case Protocol::ThreeSeqCurrent: return "ThreeSeqCurrent";
  }
  return "PosSeqPQ";
}

Protocol protocol_from_string(std::string_view s) {
  if (s == "PosSeqPQ" || s == "pos") return Protocol::PosSeqPQ;
  if (s == "PosSeqCurrent" || s == "pos-current") return Protocol::PosSeqCurrent;
  if (s == "ThreeSeqCurrent" || s == "3seq") return Protocol::ThreeSeqCurrent;
  throw Error(ErrorCode::Config, "unknown protocol '" + std::string(s) + "'");
}

void BoundarySpec::validate() const {
  if (delay_steps < 0) throw Error(ErrorCode::InvalidArgument, "delay_steps must be >= 0");
}

void to_json(nlohmann::json& j, const BoundarySpec& b) {
  j = nlohmann::json{{"bus", b.bus}, {"protocol", std::string(to_string(b.protocol))}, {"delay_steps", b.delay_steps}};
}

void from_json(const nlohmann::json& j, BoundarySpec& b) {
  b = BoundarySpec{};
  b.bus = j.value("bus", 3);
  b.protocol = protocol_from_string(j.value("protocol", std::string("PosSeqPQ")));
  b.delay_steps = j.value("delay_steps", 1);
}

Complex check_zero_seq_grounding(const SeqNetwork& net, int bus, double cap_pu) {
  if (net.mode() != TsMode::ThreeSeq)
    throw Error(ErrorCode::InvalidArgument, "zero-sequence check needs a three-sequence network");
  Complex z;
  try {
    z = net.thevenin_impedance(bus, Sequence::Zero);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SingularMatrix) throw Error(ErrorCode::FloatingZeroSequence, e.what());
    throw;
  }
  if (!std::isfinite(std::abs(z)) || std::abs(z) > cap_pu)
    throw Error(ErrorCode::FloatingZeroSequence,
                "zero-sequence Thevenin impedance at bus " + std::to_string(bus) + " is " +
                    std::to_string(std::abs(z)) + " pu (no effective grounding path)");
  return z;
}

HybridSplit split(const SolvedNetwork& net, const BoundarySpec& boundary,
                  const std::set<int>& emt_buses, const HybridOptions& opt) {
  boundary.validate();
  const auto& m = net.model;
  const int b = boundary.bus;
  if (!m.has_bus(b)) throw Error(ErrorCode::InvalidCut, "boundary bus " + std::to_string(b) + " not in model");
  if (!emt_buses.count(b)) throw Error(ErrorCode::InvalidCut, "boundary bus must belong to the EMT region");
  for (int id : emt_buses)
    if (!m.has_bus(id)) throw Error(ErrorCode::InvalidCut, "EMT region bus " + std::to_string(id) + " not in model");

  HybridSplit s;
  s.emt_region = emt_buses;
  s.ts_region.insert(b);
  for (const auto& bus : m.buses)
    if (!emt_buses.count(bus.id)) s.ts_region.insert(bus.id);
  if (s.emt_region.size() < 2 || s.ts_region.size() < 2)
    throw Error(ErrorCode::InvalidCut, "cut leaves one side without buses beyond the boundary");
  for (const auto& br : m.branches) {
    const bool f_emt = emt_buses.count(br.from) && br.from != b;
    const bool t_emt = emt_buses.count(br.to) && br.to != b;
    const bool f_ts = !emt_buses.count(br.from);
    const bool t_ts = !emt_buses.count(br.to);
    if ((f_emt && t_ts) || (f_ts && t_emt))
      throw Error(ErrorCode::InvalidCut, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                             " crosses the cut away from the boundary bus");
  }
  if (!m.connected(s.emt_region) || !m.connected(s.ts_region))
    throw Error(ErrorCode::InvalidCut, "cut leaves a side disconnected");

  const std::size_t n = micro_steps(opt);
  const double h = static_cast<double>(n) * opt.emt.dt;
  const TsMode mode = boundary.protocol == Protocol::ThreeSeqCurrent ? TsMode::ThreeSeq : TsMode::PosOnly;
  s.ts = std::make_unique<SeqNetwork>(net, s.ts_region, mode, std::set<int>{b}, h);
  s.z_eq = s.ts->thevenin_impedance(b, Sequence::Positive);
  if (mode == TsMode::ThreeSeq) check_zero_seq_grounding(*s.ts, b, opt.zero_seq_cap_pu);
  s.emt = std::make_unique<EmtSystem>(net, s.emt_region, opt.emt);
  s.boundary_source = s.emt->add_controlled_voltage(b, s.z_eq);
  return s;
}

ThreePhaseWaveform HybridRunRecord::reconstructed_ts() const {
  const TimeGrid grid{emt_voltage.t0, emt_voltage.dt, emt_voltage.size()};
  if (boundary.protocol == Protocol::ThreeSeqCurrent) return reconstruct_abc(ts_voltage, f0, grid);
  return reconstruct_abc(ts_voltage[0], f0, grid);
}

ErrorReport error_report(const HybridRunRecord& rec, const IndexConfig& cfg) {
  cfg.validate();
  const SampledSignal dv = delta_v_diff(rec.emt_voltage, rec.reconstructed_ts(), rec.base_kv_ll);
  ErrorReport r;
  r.config = cfg;
  r.e_idx = error_index(dv, cfg.window);
  r.e_idx_mod = modified_error_index(dv, rec.ts_voltage[0], cfg);
  r.verdict = classify(r.e_idx, r.e_idx_mod, cfg);
  return r;
}

HybridRunRecord run_hybrid(const SolvedNetwork& net, const std::set<int>& emt_buses,
                           const BoundarySpec& boundary, const ScenarioEvents& events,
                           double t_end, const HybridOptions& opt) {
  const auto wall0 = std::chrono::steady_clock::now();
  HybridSplit sp = split(net, boundary, emt_buses, opt);
  EmtSystem& emt = *sp.emt;
  SeqNetwork& ts = *sp.ts;
  const int b = boundary.bus;
  const std::size_t n = micro_steps(opt);
  const std::size_t kmax = macro_count(opt, n, t_end);
  const double h = static_cast<double>(n) * opt.emt.dt;
  const double f0 = net.model.f0;
  const std::size_t delay = static_cast<std::size_t>(boundary.delay_steps);
  const bool three = boundary.protocol == Protocol::ThreeSeqCurrent;

  for (const auto& f : events.faults) emt.apply_fault(f);
  for (const auto& fo : events.fo) emt.attach_fo_source(fo.spec, fo.bus);
  emt.record_bus(b);
  emt.record_controlled_current(sp.boundary_source);

  HybridRunRecord rec;
  rec.boundary = boundary;
  rec.f0 = f0;
  rec.base_kv_ll = net.model.bus(b).base_kv_ll;
  rec.micro_per_macro = n;
  for (auto& p : rec.ts_voltage) {
    p.t0 = opt.emt.t_start;
    p.dt_macro = h;
    p.base_kv_ll = rec.base_kv_ll;
  }
  const double peak = phase_peak_base_volts(rec.base_kv_ll);
  const std::size_t win = window_samples(opt.emt.dt, f0, opt.window_cycles);

  std::vector<ExchangeMessage> emt_msgs;
  emt_msgs.reserve(kmax + 1);
  auto time_of = [&](std::size_t k) { return opt.emt.t_start + static_cast<double>(k) * h; };

  // EMT -> TS: phasors over the trailing window ending at macro instant k
  auto measure = [&](std::size_t k) {
    ExchangeMessage msg;
    msg.direction = Direction::EmtToTs;
    msg.macro_index = k;
    msg.t = time_of(k);
    msg.kind = boundary.protocol == Protocol::PosSeqPQ ? PayloadKind::PQ : PayloadKind::SeqCurrent;
    const std::size_t idx = k * n;
    if (idx + 1 >= win) {
      const auto& vw = emt.recorded_voltage(b);
      const auto& iw = emt.recorded_current(sp.boundary_source);
      const SequenceSet v = estimate_sequences(vw, idx, f0, opt.window_cycles, peak);
      SequenceSet i = estimate_sequences(iw, idx, f0, opt.window_cycles, 1.0);
      i = {-i.pos, -i.neg, -i.zero};
      if (msg.kind == PayloadKind::PQ) msg.pq = v.pos * std::conj(i.pos);
      else msg.seq = three ? i : SequenceSet{i.pos, {}, {}};
    }
    return msg;
  };

  struct TsOut {
    ExchangeMessage msg;
    PhaseSet e_abc;
  };
  // TS consumes message k - delay, solves, and returns the EMT-side emf
  auto ts_advance = [&](std::size_t k) {
    ts.clear_injections();
    if (k >= delay) {
      const ExchangeMessage& in = emt_msgs[k - delay];
      if (in.kind == PayloadKind::PQ) {
        if (in.pq != Complex{}) ts.inject_pq(b, in.pq.real(), in.pq.imag());
      } else {
        ts.inject(b, Sequence::Positive, in.seq.pos);
        if (three) {
          ts.inject(b, Sequence::Negative, in.seq.neg);
          ts.inject(b, Sequence::Zero, in.seq.zero);
        }
      }
    }
    ts.set_time(time_of(k));
    ts.solve();
    TsOut out;
    out.msg.direction = Direction::TsToEmt;
    out.msg.macro_index = k;
    out.msg.t = time_of(k);
    out.msg.kind = PayloadKind::SeqVoltage;
    SequenceSet e;
    for (auto s : kSeqs) {
      if (!three && s != Sequence::Positive) continue;
      const Complex v = ts.voltage(b, s);
      set_component(out.msg.seq, s, v);
      set_component(e, s, v - sp.z_eq * ts.injection(b, s));
    }
    out.e_abc = seq_to_abc(e);
    return out;
  };

  const bool pipelined = opt.pipelined && delay >= 1;
  PhaseSet e_prev{}, e_cur{};
  emt_msgs.push_back(measure(0));
  TsOut out = ts_advance(0);
  for (std::size_t k = 0;; ++k) {
    rec.messages.push_back(emt_msgs[k]);
    rec.messages.push_back(out.msg);
    rec.ts_voltage[0].push_back(out.msg.seq.pos);
    rec.ts_voltage[1].push_back(out.msg.seq.neg);
    rec.ts_voltage[2].push_back(out.msg.seq.zero);
    e_prev = k == 0 ? out.e_abc : e_cur;
    e_cur = out.e_abc;
    if (k == kmax) break;

    emt.set_controlled_phasors(sp.boundary_source, e_prev, e_cur, time_of(k), time_of(k + 1));
    if (pipelined) {
      auto fut = std::async(std::launch::async, ts_advance, k + 1);
      for (std::size_t s = 0; s < n; ++s) emt.step();
      out = fut.get();
      emt_msgs.push_back(measure(k + 1));
    } else {
      for (std::size_t s = 0; s < n; ++s) emt.step();
      emt_msgs.push_back(measure(k + 1));
      out = ts_advance(k + 1);
    }
  }

  rec.emt_voltage = emt.recorded_voltage(b);
  const auto& ic = emt.recorded_current(sp.boundary_source);
  rec.emt_current = ic;
  for (auto& ph : rec.emt_current.phases)
    for (auto& x : ph) x = -x;
  rec.emt_sequences = sequence_trajectories(rec.emt_voltage, f0, opt.window_cycles, rec.base_kv_ll, opt.seq_stride);
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rec;
}

FullEmtRecord run_full_emt(const SolvedNetwork& net, int bus, const ScenarioEvents& events,
                           double t_end, const HybridOptions& opt) {
  const std::size_t n = micro_steps(opt);
  const std::size_t kmax = macro_count(opt, n, t_end);
  EmtSystem emt(net, {}, opt.emt);
  for (const auto& f : events.faults) emt.apply_fault(f);
  for (const auto& fo : events.fo) emt.attach_fo_source(fo.spec, fo.bus);
  emt.record_bus(bus);
  const std::size_t total = kmax * n;
  while (emt.steps() < total) emt.step();

  FullEmtRecord rec;
  rec.bus = bus;
  rec.base_kv_ll = net.model.bus(bus).base_kv_ll;
  rec.voltage = emt.recorded_voltage(bus);
  rec.sequences = sequence_trajectories(rec.voltage, net.model.f0, opt.window_cycles, rec.base_kv_ll, opt.seq_stride);
  return rec;
}

}  // namespace hybridsim
