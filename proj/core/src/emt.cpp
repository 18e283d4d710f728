#include "hybridsim/emt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

constexpr std::array<double, 3> kPhaseShift{0.0, -kTwoPi / 3.0, kTwoPi / 3.0};

}  // namespace

std::string_view to_string(FaultKind k) noexcept {
  switch (k) {
    case FaultKind::ThreePhaseG: return "ThreePhaseG";
    case FaultKind::SinglePhaseG: return "SinglePhaseG";
    case FaultKind::PhaseBCtoG: return "PhaseBCtoG";
  }
  return "ThreePhaseG";
}

FaultKind fault_kind_from_string(std::string_view s) {
  if (s == "ThreePhaseG") return FaultKind::ThreePhaseG;
  if (s == "SinglePhaseG") return FaultKind::SinglePhaseG;
  if (s == "PhaseBCtoG") return FaultKind::PhaseBCtoG;
  throw Error(ErrorCode::Config, "unknown fault kind '" + std::string(s) + "'");
}

void FaultSpec::validate() const {
  if (!(t_on >= 0.0) || !(t_off > t_on))
    throw Error(ErrorCode::InvalidArgument, "fault needs t_off > t_on >= 0");
  if (!(r_fault_ohm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "fault resistance must be >= 0");
}

void to_json(nlohmann::json& j, const FaultSpec& f) {
  j = nlohmann::json{{"type", "fault"},
                     {"bus", f.bus},
                     {"kind", std::string(to_string(f.kind))},
                     {"r_fault_ohm", f.r_fault_ohm},
                     {"t_on", f.t_on},
                     {"t_off", f.t_off}};
}

void from_json(const nlohmann::json& j, FaultSpec& f) {
  f = FaultSpec{};
  try {
    f.bus = j.at("bus").get<int>();
    f.kind = fault_kind_from_string(j.at("kind").get<std::string>());
    f.r_fault_ohm = j.value("r_fault_ohm", 0.0);
    f.t_on = j.at("t_on").get<double>();
    f.t_off = j.at("t_off").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("fault: ") + e.what());
  }
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> coupled_rl(Complex z1, Complex z0, double omega0) {
  const Complex zs = (z0 + 2.0 * z1) / 3.0;
  const Complex zm = (z0 - z1) / 3.0;
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(3, 3, zm.real());
  Eigen::MatrixXd l = Eigen::MatrixXd::Constant(3, 3, zm.imag() / omega0);
  r.diagonal().setConstant(zs.real());
  l.diagonal().setConstant(zs.imag() / omega0);
  return {r, l};
}

EmtSystem::EmtSystem(const SolvedNetwork& net, std::set<int> region, EmtOptions opt)
    : net_(net), region_(std::move(region)), opt_(opt) {
  const auto& m = net_.model;
  if (!(opt_.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "EMT dt must be positive");
  if (!(opt_.ramp_time >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ramp time must be >= 0");
  if (region_.empty())
    for (const auto& b : m.buses) region_.insert(b.id);
  for (int id : region_)
    if (!m.has_bus(id)) throw Error(ErrorCode::InvalidArgument, "region bus " + std::to_string(id) + " not in model");
  if (!m.connected(region_)) throw Error(ErrorCode::InvalidArgument, "EMT region is not connected");
  omega_ = m.omega0();
  t_ = opt_.t_start;
  circuit_.set_time(t_);

  for (const auto& b : m.buses) {
    if (!region_.count(b.id)) continue;
    if (!(b.base_kv_ll > 0.0)) throw Error(ErrorCode::InvalidArgument, "bus without base voltage");
    std::array<int, 3> n{};
    for (int p = 0; p < 3; ++p)
      n[static_cast<std::size_t>(p)] = circuit_.add_node(std::to_string(b.id) + "abc"[p]);
    nodes_[b.id] = n;
  }
  for (const auto& br : m.branches) {
    if (!region_.count(br.from) || !region_.count(br.to)) continue;
    auto [r, l] = coupled_rl(br.z1(), br.z0(), omega_);
    const auto& f = nodes(br.from);
    const auto& t = nodes(br.to);
    circuit_.add_rl({f.begin(), f.end()}, {t.begin(), t.end()}, r, l, br.turn_ratio);
  }
  for (std::size_t i = 0; i < m.loads.size(); ++i) {
    const auto& ld = m.loads[i];
    if (!region_.count(ld.bus)) continue;
    const Complex y = net_.load_y[i];
    for (int n : nodes(ld.bus)) {
      if (y.real() > 0.0) circuit_.add_resistor(n, kGround, 1.0 / y.real());
      const double b = -y.imag();
      if (b > 0.0) {
        circuit_.add_rl({n}, {kGround}, Eigen::MatrixXd::Zero(1, 1),
                        Eigen::MatrixXd::Constant(1, 1, 1.0 / (b * omega_)));
      } else if (b < 0.0) {
        circuit_.add_capacitor(n, kGround, -b / omega_);
      }
    }
  }
  for (std::size_t i = 0; i < m.sources.size(); ++i) {
    const auto& s = m.sources[i];
    if (!region_.count(s.bus)) continue;
    if (s.kind == SourceKind::ThevAC) {
      auto [r, l] = coupled_rl(s.z_pu, s.z0(), omega_);
      const auto& n = nodes(s.bus);
      const std::size_t id = circuit_.add_rl({kGround, kGround, kGround}, {n.begin(), n.end()}, r, l);
      thev_.push_back({id, net_.source_emf[i]});
    } else if (s.kind == SourceKind::FoSource) {
      attach_fo_source(*s.fo, s.bus);
    }
  }
}

const std::array<int, 3>& EmtSystem::nodes(int bus) const {
  auto it = nodes_.find(bus);
  if (it == nodes_.end())
    throw Error(ErrorCode::InvalidArgument, "bus " + std::to_string(bus) + " is outside the EMT region");
  return it->second;
}

double EmtSystem::bus_peak_volts(int bus) const { return phase_peak_base_volts(base_kv(bus)); }

double EmtSystem::ramp(double t) const {
  if (opt_.ramp_time <= 0.0) return 1.0;
  const double u = (t - opt_.t_start) / opt_.ramp_time;
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * u));
}

void EmtSystem::apply_fault(const FaultSpec& f) {
  f.validate();
  const auto& n = nodes(f.bus);
  const double z_base = base_kv(f.bus) * base_kv(f.bus) / net_.model.mva_base;
  const double r = f.r_fault_ohm > 0.0 ? f.r_fault_ohm / z_base : opt_.bolted_r_pu;
  Fault flt;
  flt.spec = f;
  std::array<bool, 3> use{true, true, true};
  if (f.kind == FaultKind::SinglePhaseG) use = {true, false, false};
  if (f.kind == FaultKind::PhaseBCtoG) use = {false, true, true};
  for (std::size_t p = 0; p < 3; ++p) {
    if (use[p]) flt.sw[p] = circuit_.add_switch(n[p], kGround, r, false);
    else flt.done[p] = true;
  }
  faults_.push_back(flt);
}

std::size_t EmtSystem::attach_fo_source(const FoSourceSpec& spec, int bus) {
  spec.validate();
  const auto& n = nodes(bus);
  Fo fo;
  fo.spec = spec;
  fo.spec.f_syn = net_.model.f0;
  fo.bus = bus;
  std::array<int, 3> inner{};
  for (std::size_t p = 0; p < 3; ++p)
    inner[p] = circuit_.add_node("fo" + std::to_string(fo_.size()) + "abc"[p]);
  const double half = 0.5 * opt_.fo_r_pu;
  fo.branch = circuit_.add_rl({kGround, kGround, kGround}, {inner.begin(), inner.end()},
                              Eigen::MatrixXd::Identity(3, 3) * half, Eigen::MatrixXd::Zero(3, 3));
  for (std::size_t p = 0; p < 3; ++p) fo.sw[p] = circuit_.add_switch(inner[p], n[p], half, false);
  fo_.push_back(fo);
  record_bus(bus);
  return fo_.size() - 1;
}

double EmtSystem::fo_power_pu(std::size_t id) const {
  const auto& fo = fo_.at(id);
  double p = 0.0;
  for (std::size_t k = 0; k < 3; ++k)
    p += circuit_.switch_current(fo.sw[k]) * circuit_.voltage(nodes(fo.bus)[k]);
  return 2.0 / 3.0 * p;
}

std::size_t EmtSystem::add_controlled_voltage(int bus, Complex z_pu) {
  if (std::abs(z_pu) <= 0.0 || z_pu.real() < 0.0)
    throw Error(ErrorCode::InvalidArgument, "controlled source impedance must be non-zero and passive");
  const auto& n = nodes(bus);
  const std::size_t id =
      circuit_.add_rl({kGround, kGround, kGround}, {n.begin(), n.end()},
                      Eigen::MatrixXd::Identity(3, 3) * z_pu.real(),
                      Eigen::MatrixXd::Identity(3, 3) * (z_pu.imag() / omega_));
  ctrl_.push_back({bus, id});
  return ctrl_.size() - 1;
}

void EmtSystem::set_controlled_phasors(std::size_t id, const PhaseSet& from, const PhaseSet& to,
                                       double t_from, double t_to) {
  auto& c = ctrl_.at(id);
  if (!(t_to >= t_from)) throw Error(ErrorCode::InvalidArgument, "phasor interval reversed");
  c.from = from;
  c.to = to;
  c.t_from = t_from;
  c.t_to = t_to;
}

std::array<double, 3> EmtSystem::controlled_current(std::size_t id) const {
  const auto& i = circuit_.rl_current(ctrl_.at(id).branch);
  return {i[0], i[1], i[2]};
}

void EmtSystem::update_switches(double t) {
  const double eps = 0.5 * opt_.dt;
  for (auto& f : faults_) {
    if (!f.started && t >= f.spec.t_on - eps) {
      f.started = true;
      for (std::size_t p = 0; p < 3; ++p)
        if (f.sw[p]) circuit_.set_switch(*f.sw[p], true);
    }
    if (opt_.instantaneous_clearing && f.started && t >= f.spec.t_off - eps) {
      for (std::size_t p = 0; p < 3; ++p)
        if (f.sw[p]) circuit_.set_switch(*f.sw[p], false);
      f.done = {true, true, true};
    }
  }
  for (auto& fo : fo_) {
    if (fo.closed || t < opt_.fo_close_time - eps) continue;
    // match the carrier to the bus over the last cycle before closing
    const auto& w = recorded_voltage(fo.bus);
    const auto est = estimate_phasor(w.phases[0], w.t0, w.dt, w.size() - 1, net_.model.f0, 1.0,
                                     bus_peak_volts(fo.bus));
    fo.spec.v_m = est.magnitude_pu * bus_peak_volts(fo.bus);
    fo.spec.phi_a = est.angle_rad - 0.5 * kPi;
    fo.closed = true;
    for (auto s : fo.sw) circuit_.set_switch(s, true);
  }
}

void EmtSystem::update_sources(double t) {
  const double k = ramp(t);
  Eigen::VectorXd e(3);
  for (const auto& s : thev_) {
    for (int p = 0; p < 3; ++p)
      e[p] = k * std::abs(s.emf) *
             std::sin(omega_ * t + std::arg(s.emf) + kPhaseShift[static_cast<std::size_t>(p)]);
    circuit_.set_rl_emf(s.branch, e);
  }
  for (const auto& c : ctrl_) {
    double w = 1.0;
    if (t <= c.t_from) w = 0.0;
    else if (t < c.t_to) w = (t - c.t_from) / (c.t_to - c.t_from);
    for (std::size_t p = 0; p < 3; ++p) {
      const double a0 = std::arg(c.from[p]);
      const double da = std::remainder(std::arg(c.to[p]) - a0, kTwoPi);
      const double mag = (1.0 - w) * std::abs(c.from[p]) + w * std::abs(c.to[p]);
      e[static_cast<Eigen::Index>(p)] = k * mag * std::sin(omega_ * t + a0 + w * da);
    }
    circuit_.set_rl_emf(c.branch, e);
  }
  for (const auto& fo : fo_) {
    const double peak = bus_peak_volts(fo.bus);
    for (int p = 0; p < 3; ++p) e[p] = fo.closed ? k * synth_fo_phase(fo.spec, t, p) / peak : 0.0;
    circuit_.set_rl_emf(fo.branch, e);
  }
}

void EmtSystem::after_solve() {
  const double eps = 0.5 * opt_.dt;
  for (auto& f : faults_) {
    if (!f.started) continue;
    for (std::size_t p = 0; p < 3; ++p) {
      if (f.done[p] || !f.sw[p]) continue;
      const double i = circuit_.switch_current(*f.sw[p]);
      if (t_ >= f.spec.t_off - eps && f.last_current[p] * i <= 0.0) {
        circuit_.set_switch(*f.sw[p], false);
        f.done[p] = true;
      }
      f.last_current[p] = i;
    }
  }
  const auto& v = circuit_.voltages();
  for (Eigen::Index n = 0; n < v.size(); ++n) {
    if (!std::isfinite(v[n]) || std::abs(v[n]) > opt_.divergence_limit_pu)
      throw Error(ErrorCode::Divergence, "node " + circuit_.node_name(static_cast<int>(n)) +
                                             " reached " + std::to_string(v[n]) + " pu at t=" +
                                             std::to_string(t_) + " s");
  }
  record();
}

void EmtSystem::step() {
  const double t_next = opt_.t_start + static_cast<double>(steps_ + 1) * opt_.dt;
  update_switches(t_next);
  update_sources(t_next);
  circuit_.step(opt_.dt);
  ++steps_;
  t_ = t_next;
  after_solve();
}

void EmtSystem::run_until(double t) {
  while (t_ < t - 0.5 * opt_.dt) step();
}

double EmtSystem::voltage_pu(int bus, int phase) const {
  return circuit_.voltage(nodes(bus).at(static_cast<std::size_t>(phase)));
}

std::array<double, 3> EmtSystem::voltage_volts(int bus) const {
  const double peak = bus_peak_volts(bus);
  const auto& n = nodes(bus);
  return {circuit_.voltage(n[0]) * peak, circuit_.voltage(n[1]) * peak, circuit_.voltage(n[2]) * peak};
}

void EmtSystem::record_bus(int bus) {
  nodes(bus);
  if (v_rec_.count(bus)) return;
  auto& w = v_rec_[bus];
  w.t0 = t_;
  w.dt = opt_.dt;
  w.push_back(voltage_volts(bus));
}

const ThreePhaseWaveform& EmtSystem::recorded_voltage(int bus) const {
  auto it = v_rec_.find(bus);
  if (it == v_rec_.end()) throw Error(ErrorCode::InvalidArgument, "bus " + std::to_string(bus) + " is not recorded");
  return it->second;
}

void EmtSystem::record_controlled_current(std::size_t id) {
  ctrl_.at(id);
  if (i_rec_.count(id)) return;
  auto& w = i_rec_[id];
  w.t0 = t_;
  w.dt = opt_.dt;
  w.push_back(controlled_current(id));
}

const ThreePhaseWaveform& EmtSystem::recorded_current(std::size_t id) const {
  auto it = i_rec_.find(id);
  if (it == i_rec_.end()) throw Error(ErrorCode::InvalidArgument, "controlled current is not recorded");
  return it->second;
}

void EmtSystem::record() {
  for (auto& [bus, w] : v_rec_) w.push_back(voltage_volts(bus));
  for (auto& [id, w] : i_rec_) w.push_back(controlled_current(id));
}

EmtState EmtSystem::state() const {
  EmtState s;
  s.t = t_;
  for (const auto& [bus, n] : nodes_) s.bus_voltage_volts[bus] = voltage_volts(bus);
  for (const auto& f : faults_)
    for (const auto& sw : f.sw)
      if (sw) s.switch_closed.push_back(circuit_.switch_closed(*sw));
  for (const auto& fo : fo_)
    for (auto sw : fo.sw) s.switch_closed.push_back(circuit_.switch_closed(sw));
  return s;
}

}  // namespace hybridsim
