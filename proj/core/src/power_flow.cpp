#include "hybridsim/power_flow.hpp"

#include <cmath>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

constexpr double kDegToRad = kPi / 180.0;

}  // namespace

std::vector<Complex> bus_injections(const NetworkModel& m, const std::vector<Complex>& v) {
  const Eigen::MatrixXcd y = branch_admittance(m, SeqKind::Positive, {});
  Eigen::VectorXcd vv(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) vv[static_cast<Eigen::Index>(i)] = v[i];
  const Eigen::VectorXcd i = y * vv;
  std::vector<Complex> s(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) s[k] = v[k] * std::conj(i[static_cast<Eigen::Index>(k)]);
  return s;
}

PowerFlowResult solve_power_flow(const NetworkModel& m, const PowerFlowOptions& opt) {
  m.validate();
  const std::size_t n = m.buses.size();
  const Eigen::MatrixXcd y = branch_admittance(m, SeqKind::Positive, {});

  std::vector<double> p_spec(n, 0.0), q_spec(n, 0.0), vm(n, 1.0), va(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = m.buses[i];
    if (b.type != BusType::PQ) vm[i] = b.v_set_pu;
    if (b.type == BusType::Slack) va[i] = b.angle_deg * kDegToRad;
    if (b.type == BusType::PV) p_spec[i] += b.p_gen_mw / m.mva_base;
  }
  for (const auto& l : m.loads) {
    const auto i = m.index_of(l.bus);
    p_spec[i] -= l.p_mw / m.mva_base;
    q_spec[i] -= l.q_mvar / m.mva_base;
  }

  // unknowns: angles of non-slack buses, magnitudes of PQ buses
  std::vector<std::size_t> ang_idx, mag_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.buses[i].type != BusType::Slack) ang_idx.push_back(i);
    if (m.buses[i].type == BusType::PQ) mag_idx.push_back(i);
  }
  const auto na = static_cast<Eigen::Index>(ang_idx.size());
  const auto nm = static_cast<Eigen::Index>(mag_idx.size());

  PowerFlowResult res;
  auto calc = [&](std::vector<double>& p, std::vector<double>& q) {
    p.assign(n, 0.0);
    q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const Complex yik = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        const double th = va[i] - va[k];
        p[i] += vm[i] * vm[k] * (yik.real() * std::cos(th) + yik.imag() * std::sin(th));
        q[i] += vm[i] * vm[k] * (yik.real() * std::sin(th) - yik.imag() * std::cos(th));
      }
  };

  std::vector<double> p, q;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    calc(p, q);
    Eigen::VectorXd f(na + nm);
    for (Eigen::Index a = 0; a < na; ++a) f[a] = p_spec[ang_idx[a]] - p[ang_idx[a]];
    for (Eigen::Index b = 0; b < nm; ++b) f[na + b] = q_spec[mag_idx[b]] - q[mag_idx[b]];
    res.max_mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    res.iterations = it;
    if (!std::isfinite(res.max_mismatch)) break;
    if (res.max_mismatch < opt.tolerance) {
      res.v.resize(n);
      for (std::size_t i = 0; i < n; ++i) res.v[i] = std::polar(vm[i], va[i]);
      return res;
    }
    if (it == opt.max_iterations) break;

    // Jacobian blocks [dP/dth dP/dV; dQ/dth dQ/dV]
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(na + nm, na + nm);
    auto dp_dth = [&](std::size_t i, std::size_t k) {
      const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
      if (i == k) return -q[i] - y(ii, ii).imag() * vm[i] * vm[i];
      const double th = va[i] - va[k];
      return vm[i] * vm[k] * (y(ii, kk).real() * std::sin(th) - y(ii, kk).imag() * std::cos(th));
    };
    auto dp_dv = [&](std::size_t i, std::size_t k) {
      const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
      if (i == k) return p[i] / vm[i] + y(ii, ii).real() * vm[i];
      const double th = va[i] - va[k];
      return vm[i] * (y(ii, kk).real() * std::cos(th) + y(ii, kk).imag() * std::sin(th));
    };
    auto dq_dth = [&](std::size_t i, std::size_t k) {
      const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
      if (i == k) return p[i] - y(ii, ii).real() * vm[i] * vm[i];
      const double th = va[i] - va[k];
      return -vm[i] * vm[k] * (y(ii, kk).real() * std::cos(th) + y(ii, kk).imag() * std::sin(th));
    };
    auto dq_dv = [&](std::size_t i, std::size_t k) {
      const auto ii = static_cast<Eigen::Index>(i), kk = static_cast<Eigen::Index>(k);
      if (i == k) return q[i] / vm[i] - y(ii, ii).imag() * vm[i];
      const double th = va[i] - va[k];
      return vm[i] * (y(ii, kk).real() * std::sin(th) - y(ii, kk).imag() * std::cos(th));
    };
    for (Eigen::Index r = 0; r < na; ++r) {
      for (Eigen::Index c = 0; c < na; ++c) jac(r, c) = dp_dth(ang_idx[r], ang_idx[c]);
      for (Eigen::Index c = 0; c < nm; ++c) jac(r, na + c) = dp_dv(ang_idx[r], mag_idx[c]);
    }
    for (Eigen::Index r = 0; r < nm; ++r) {
      for (Eigen::Index c = 0; c < na; ++c) jac(na + r, c) = dq_dth(mag_idx[r], ang_idx[c]);
      for (Eigen::Index c = 0; c < nm; ++c) jac(na + r, na + c) = dq_dv(mag_idx[r], mag_idx[c]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) break;
    const Eigen::VectorXd dx = lu.solve(f);
    for (Eigen::Index a = 0; a < na; ++a) va[ang_idx[a]] += dx[a];
    for (Eigen::Index b = 0; b < nm; ++b) vm[mag_idx[b]] += dx[na + b];
  }
  throw Error(ErrorCode::PowerFlowInfeasible,
              "power flow did not converge (mismatch " + std::to_string(res.max_mismatch) + " pu)");
}

SolvedNetwork solve_network(const NetworkModel& m, const PowerFlowOptions& opt) {
  SolvedNetwork s;
  s.model = m;
  s.pf = solve_power_flow(m, opt);
  const auto& v = s.pf.v;

  for (const auto& l : m.loads) s.load_y.push_back(load_admittance(l, m.mva_base, std::abs(v[m.index_of(l.bus)])));

  // generation needed at each bus = network injection + local load
  std::vector<Complex> gen = bus_injections(m, v);
  for (const auto& l : m.loads) gen[m.index_of(l.bus)] += Complex(l.p_mw, l.q_mvar) / m.mva_base;

  std::vector<int> thev_count(m.buses.size(), 0);
  for (const auto& src : m.sources)
    if (src.kind == SourceKind::ThevAC) ++thev_count[m.index_of(src.bus)];
  for (std::size_t i = 0; i < m.buses.size(); ++i) {
    if (std::abs(gen[i]) > 1e-9 && thev_count[i] == 0)
      throw Error(ErrorCode::PowerFlowInfeasible,
                  "bus " + std::to_string(m.buses[i].id) + " needs generation but has no source");
    if (thev_count[i] > 1)
      throw Error(ErrorCode::InvalidArgument,
                  "bus " + std::to_string(m.buses[i].id) + " has more than one Thevenin source");
  }
  for (const auto& src : m.sources) {
    if (src.kind != SourceKind::ThevAC) {
      s.source_emf.push_back({});
      s.source_current.push_back({});
      continue;
    }
    const auto i = m.index_of(src.bus);
    const Complex cur = std::conj(gen[i] / v[i]);
    s.source_current.push_back(cur);
    s.source_emf.push_back(v[i] + src.z_pu * cur);
  }
  return s;
}

}  // namespace hybridsim
