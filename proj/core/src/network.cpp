#include "hybridsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

using nlohmann::json;

std::string bus_type_name(BusType t) {
  switch (t) {
    case BusType::Slack: return "slack";
    case BusType::PV: return "pv";
    case BusType::PQ: return "pq";
  }
  return "pq";
}

BusType bus_type_from(const std::string& s) {
  if (s == "slack") return BusType::Slack;
  if (s == "pv") return BusType::PV;
  if (s == "pq") return BusType::PQ;
  throw Error(ErrorCode::Config, "unknown bus type '" + s + "'");
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

Complex complex_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2)
    throw Error(ErrorCode::Config, std::string(what) + " must be [re, im]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

template <typename T>
T required(const json& j, const char* key, const char* ctx) {
  if (!j.contains(key))
    throw Error(ErrorCode::Config, std::string(ctx) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Config, std::string(ctx) + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::string_view to_string(SourceKind k) noexcept {
  switch (k) {
    case SourceKind::ThevAC: return "ThevAC";
    case SourceKind::FoSource: return "FoSource";
    case SourceKind::ControlledV: return "ControlledV";
    case SourceKind::ControlledI: return "ControlledI";
  }
  return "ThevAC";
}

SourceKind source_kind_from_string(std::string_view s) {
  if (s == "ThevAC") return SourceKind::ThevAC;
  if (s == "FoSource") return SourceKind::FoSource;
  if (s == "ControlledV") return SourceKind::ControlledV;
  if (s == "ControlledI") return SourceKind::ControlledI;
  throw Error(ErrorCode::Config, "unknown source kind '" + std::string(s) + "'");
}

std::size_t NetworkModel::index_of(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return i;
  throw Error(ErrorCode::InvalidArgument, "unknown bus " + std::to_string(id));
}

bool NetworkModel::has_bus(int id) const {
  return std::any_of(buses.begin(), buses.end(), [id](const Bus& b) { return b.id == id; });
}

void NetworkModel::validate() const {
  if (buses.empty()) throw Error(ErrorCode::InvalidArgument, "network has no buses");
  if (!(mva_base > 0.0)) throw Error(ErrorCode::InvalidArgument, "MVA base must be positive");
  if (!(f0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "f0 must be positive");
  std::set<int> ids;
  int slack = 0;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate bus id " + std::to_string(b.id));
    if (!(b.base_kv_ll > 0.0))
      throw Error(ErrorCode::InvalidArgument, "bus " + std::to_string(b.id) + " has no base voltage");
    if (b.type != BusType::PQ && !(b.v_set_pu > 0.0))
      throw Error(ErrorCode::InvalidArgument, "bus " + std::to_string(b.id) + " needs a positive setpoint");
    if (b.type == BusType::Slack) ++slack;
  }
  if (slack != 1) throw Error(ErrorCode::InvalidArgument, "network needs exactly one slack bus");
  for (const auto& br : branches) {
    if (!has_bus(br.from) || !has_bus(br.to) || br.from == br.to)
      throw Error(ErrorCode::InvalidArgument, "branch references invalid buses");
    if (br.r_pu < 0.0 || std::abs(br.z1()) <= 0.0 || std::abs(br.z0()) <= 0.0 || br.z0().real() < 0.0)
      throw Error(ErrorCode::InvalidArgument, "branch impedance must be non-zero and passive");
    if (!(br.turn_ratio > 0.0)) throw Error(ErrorCode::InvalidArgument, "turn ratio must be positive");
  }
  for (const auto& l : loads)
    if (!has_bus(l.bus)) throw Error(ErrorCode::InvalidArgument, "load references unknown bus");
  for (const auto& s : sources) {
    if (!has_bus(s.bus)) throw Error(ErrorCode::InvalidArgument, "source references unknown bus");
    if (std::abs(s.z_pu) <= 0.0 || s.z_pu.real() < 0.0 || std::abs(s.z0()) <= 0.0)
      throw Error(ErrorCode::InvalidArgument, "source impedance must be non-zero and passive");
    if (s.kind == SourceKind::FoSource && !s.fo)
      throw Error(ErrorCode::InvalidArgument, "FoSource needs oscillation parameters");
    if (s.kind == SourceKind::ControlledV || s.kind == SourceKind::ControlledI)
      throw Error(ErrorCode::InvalidArgument,
                  "controlled sources are created by the boundary split, not declared in models");
  }
  std::set<int> all(ids.begin(), ids.end());
  if (!connected(all)) throw Error(ErrorCode::InvalidArgument, "network graph is not connected");
}

bool NetworkModel::connected(const std::set<int>& region) const {
  if (region.empty()) return false;
  std::set<int> seen{*region.begin()};
  std::vector<int> stack{*region.begin()};
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    for (const auto& br : branches) {
      if (!region.count(br.from) || !region.count(br.to)) continue;
      const int other = br.from == b ? br.to : br.to == b ? br.from : 0;
      if ((br.from == b || br.to == b) && seen.insert(other).second) stack.push_back(other);
    }
  }
  return seen.size() == region.size();
}

Eigen::MatrixXcd branch_admittance(const NetworkModel& m, SeqKind seq,
                                   const std::vector<int>& region_order) {
  std::vector<int> order = region_order;
  if (order.empty())
    for (const auto& b : m.buses) order.push_back(b.id);
  std::map<int, Eigen::Index> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : m.branches) {
    auto f = pos.find(br.from);
    auto t = pos.find(br.to);
    if (f == pos.end() || t == pos.end()) continue;
    const Complex ys = 1.0 / (seq == SeqKind::Zero ? br.z0() : br.z1());
    const double k = br.turn_ratio;
    y(f->second, f->second) += ys / (k * k);
    y(t->second, t->second) += ys;
    y(f->second, t->second) -= ys / k;
    y(t->second, f->second) -= ys / k;
  }
  return y;
}

Complex load_admittance(const Load& load, double mva_base, double v) {
  if (!(v > 0.0)) throw Error(ErrorCode::DivisionByZero, "load voltage is zero");
  return Complex(load.p_mw, -load.q_mvar) / mva_base / (v * v);
}

void to_json(json& j, const FoSourceSpec& s) {
  j = json{{"kind", s.kind == FoKind::MFO ? "MFO" : "SFO"},
           {"v_m", s.v_m},
           {"v_fo", s.v_fo},
           {"f_fo", s.f_fo},
           {"f_syn", s.f_syn},
           {"phi_a", s.phi_a},
           {"t_enable", s.t_enable}};
}

void from_json(const json& j, FoSourceSpec& s) {
  s = FoSourceSpec{};
  const auto kind = required<std::string>(j, "kind", "fo source");
  if (kind == "MFO") s.kind = FoKind::MFO;
  else if (kind == "SFO") s.kind = FoKind::SFO;
  else throw Error(ErrorCode::Config, "fo kind must be MFO or SFO");
  s.v_m = j.value("v_m", 0.0);
  s.v_fo = required<double>(j, "v_fo", "fo source");
  s.f_fo = required<double>(j, "f_fo", "fo source");
  s.f_syn = j.value("f_syn", 60.0);
  s.phi_a = j.value("phi_a", 0.0);
  s.t_enable = j.value("t_enable", 0.0);
}

void to_json(json& j, const NetworkModel& m) {
  j = json{{"mva_base", m.mva_base}, {"f0", m.f0}};
  json buses = json::array();
  for (const auto& b : m.buses) {
    json jb{{"id", b.id}, {"base_kv_ll", b.base_kv_ll}, {"type", bus_type_name(b.type)}};
    if (b.type != BusType::PQ) jb["v_set_pu"] = b.v_set_pu;
    if (b.type == BusType::Slack) jb["angle_deg"] = b.angle_deg;
    if (b.type == BusType::PV) jb["p_gen_mw"] = b.p_gen_mw;
    buses.push_back(jb);
  }
  j["buses"] = buses;
  json branches = json::array();
  for (const auto& br : m.branches) {
    json jb{{"from", br.from}, {"to", br.to}, {"r_pu", br.r_pu}, {"x_pu", br.x_pu},
            {"turn_ratio", br.turn_ratio}};
    if (br.z0_pu) jb["z0_pu"] = complex_json(*br.z0_pu);
    branches.push_back(jb);
  }
  j["branches"] = branches;
  json loads = json::array();
  for (const auto& l : m.loads) loads.push_back({{"bus", l.bus}, {"p_mw", l.p_mw}, {"q_mvar", l.q_mvar}});
  j["loads"] = loads;
  json sources = json::array();
  for (const auto& s : m.sources) {
    json js{{"bus", s.bus}, {"kind", std::string(to_string(s.kind))}, {"z_pu", complex_json(s.z_pu)}};
    if (s.z0_pu) js["z0_pu"] = complex_json(*s.z0_pu);
    if (s.fo) js["fo"] = *s.fo;
    sources.push_back(js);
  }
  j["sources"] = sources;
}

void from_json(const json& j, NetworkModel& m) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "network must be an object");
  m = NetworkModel{};
  m.mva_base = j.value("mva_base", 100.0);
  m.f0 = j.value("f0", 60.0);
  for (const auto& jb : j.value("buses", json::array())) {
    Bus b;
    b.id = required<int>(jb, "id", "bus");
    b.base_kv_ll = required<double>(jb, "base_kv_ll", "bus");
    b.type = bus_type_from(jb.value("type", std::string("pq")));
    b.v_set_pu = jb.value("v_set_pu", 1.0);
    b.angle_deg = jb.value("angle_deg", 0.0);
    b.p_gen_mw = jb.value("p_gen_mw", 0.0);
    m.buses.push_back(b);
  }
  for (const auto& jb : j.value("branches", json::array())) {
    Branch br;
    br.from = required<int>(jb, "from", "branch");
    br.to = required<int>(jb, "to", "branch");
    br.x_pu = required<double>(jb, "x_pu", "branch");
    if (jb.contains("r_pu")) {
      br.r_pu = jb.at("r_pu").get<double>();
    } else {
      const double xr = jb.value("x_over_r", 10.0);
      if (!(xr > 0.0)) throw Error(ErrorCode::Config, "branch x_over_r must be positive");
      br.r_pu = br.x_pu / xr;
    }
    br.turn_ratio = jb.value("turn_ratio", 1.0);
    if (jb.contains("z0_pu")) br.z0_pu = complex_from(jb.at("z0_pu"), "branch z0_pu");
    m.branches.push_back(br);
  }
  for (const auto& jl : j.value("loads", json::array()))
    m.loads.push_back({required<int>(jl, "bus", "load"), required<double>(jl, "p_mw", "load"),
                       jl.value("q_mvar", 0.0)});
  for (const auto& js : j.value("sources", json::array())) {
    Source s;
    s.bus = required<int>(js, "bus", "source");
    s.kind = source_kind_from_string(js.value("kind", std::string("ThevAC")));
    s.z_pu = complex_from(js.at("z_pu"), "source z_pu");
    if (js.contains("z0_pu")) s.z0_pu = complex_from(js.at("z0_pu"), "source z0_pu");
    if (js.contains("fo")) s.fo = js.at("fo").get<FoSourceSpec>();
    m.sources.push_back(s);
  }
}

}  // namespace hybridsim
