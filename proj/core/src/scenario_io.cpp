#include <cstdio>
#include <fstream>
#include <string>
#include <unistd.h>

#include "hybridsim/error.hpp"
#include "hybridsim/scenario.hpp"

namespace hybridsim {

namespace {

using nlohmann::json;

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ += ',';
      out_ += header[i];
    }
    out_ += '\n';
  }
  CsvWriter& num(double x) {
    sep();
    out_ += format_number(x);
    return *this;
  }
  CsvWriter& text(const std::string& s) {
    sep();
    out_ += s;
    return *this;
  }
  void end_row() {
    out_ += '\n';
    first_ = true;
    ++rows_;
  }
  std::size_t rows() const { return rows_; }
  const std::string& str() const { return out_; }

 private:
  void sep() {
    if (!first_) out_ += ',';
    first_ = false;
  }
  std::string out_;
  bool first_ = true;
  std::size_t rows_ = 0;
};

json save(const std::filesystem::path& dir, const std::string& name, const CsvWriter& w) {
  write_atomic(dir / name, w.str());
  return json{{"file", name}, {"rows", w.rows()}};
}

CsvWriter waveform_csv(const ThreePhaseWaveform& w, const std::string& prefix) {
  CsvWriter c({"t", prefix + "_a", prefix + "_b", prefix + "_c"});
  for (std::size_t i = 0; i < w.size(); ++i) {
    c.num(w.time(i));
    for (const auto& ph : w.phases) c.num(ph[i]);
    c.end_row();
  }
  return c;
}

CsvWriter sequences_csv(const std::array<PhasorTrajectory, 3>& s) {
  CsvWriter c({"t", "pos_mag_pu", "pos_ang_rad", "neg_mag_pu", "neg_ang_rad", "zero_mag_pu", "zero_ang_rad"});
  for (std::size_t k = 0; k < s[0].size(); ++k) {
    c.num(s[0].time(k));
    for (const auto& p : s) c.num(p.magnitude_pu[k]).num(p.angle_rad[k]);
    c.end_row();
  }
  return c;
}

std::string verdict_name(const ErrorReport& r) { return std::string(to_string(r.verdict)); }

}  // namespace

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename into " + path.string());
  }
}

json write_run_outputs(const ScenarioResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& h = r.hybrid;
  json files = json::array();
  files.push_back(save(dir, "emt_boundary_voltage.csv", waveform_csv(h.emt_voltage, "v")));
  const ThreePhaseWaveform ts = h.reconstructed_ts();
  files.push_back(save(dir, "ts_boundary_reconstructed.csv", waveform_csv(ts, "v")));
  files.push_back(save(dir, "emt_boundary_current.csv", waveform_csv(h.emt_current, "i_pu")));

  const SampledSignal dv = delta_v_diff(h.emt_voltage, ts, h.base_kv_ll);
  CsvWriter dvc({"t", "delta_v_diff_pu"});
  for (std::size_t i = 0; i < dv.size(); ++i) {
    dvc.num(dv.time(i)).num(dv.values[i]);
    dvc.end_row();
  }
  files.push_back(save(dir, "delta_v_diff.csv", dvc));
  files.push_back(save(dir, "ts_phasors.csv", sequences_csv(h.ts_voltage)));
  files.push_back(save(dir, "emt_sequences.csv", sequences_csv(h.emt_sequences)));
  if (r.full) files.push_back(save(dir, "full_emt_sequences.csv", sequences_csv(r.full->sequences)));

  CsvWriter msg({"macro_index", "t", "direction", "kind", "p_pu", "q_pu", "pos_re", "pos_im",
                 "neg_re", "neg_im", "zero_re", "zero_im"});
  for (const auto& m : h.messages) {
    msg.num(static_cast<double>(m.macro_index)).num(m.t);
    msg.text(m.direction == Direction::EmtToTs ? "EmtToTs" : "TsToEmt");
    msg.text(m.kind == PayloadKind::PQ ? "PQ" : m.kind == PayloadKind::SeqCurrent ? "SeqCurrent" : "SeqVoltage");
    msg.num(m.pq.real()).num(m.pq.imag());
    for (Complex c : {m.seq.pos, m.seq.neg, m.seq.zero}) msg.num(c.real()).num(c.imag());
    msg.end_row();
  }
  files.push_back(save(dir, "messages.csv", msg));

  write_atomic(dir / "report.json", json(r.report).dump(2) + "\n");
  json manifest{{"schema_version", kSchemaVersion},
                {"kind", "run"},
                {"config", r.config},
                {"report", r.report},
                {"dt", h.emt_voltage.dt},
                {"dt_macro_effective", h.ts_voltage[0].dt_macro},
                {"base_kv_ll", h.base_kv_ll},
                {"files", files}};
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

json write_sweep_outputs(const SweepResult& s, const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const bool fo = s.variable == "f_fo";
  std::vector<std::string> header{s.variable, "e_true", "e_idx", "e_idx_mod", "verdict"};
  if (fo)
    for (const char* h : {"attenuation_db", "emt_mag_amplitude_pu", "ts_mag_amplitude_pu", "phase_misalignment_rad"})
      header.emplace_back(h);
  CsvWriter c(header);
  for (const auto& p : s.points) {
    c.num(p.value).num(p.report.e_true.value_or(std::nan(""))).num(p.report.e_idx).num(p.report.e_idx_mod);
    c.text(verdict_name(p.report));
    if (fo && p.fo)
      c.num(p.fo->attenuation_db).num(p.fo->emt_mag_amplitude).num(p.fo->ts_mag_amplitude).num(p.fo->phase_misalignment_rad);
    c.end_row();
  }
  const std::string name = fo ? "err_vs_freq.csv" : "err_vs_alpha.csv";
  json files = json::array({save(dir, name, c)});
  json points = json::array();
  for (const auto& p : s.points) points.push_back(p);
  write_atomic(dir / "sweep.json", json{{"variable", s.variable}, {"points", points}}.dump(2) + "\n");
  files.push_back({{"file", "sweep.json"}});
  json manifest{{"schema_version", kSchemaVersion}, {"kind", "sweep"}, {"variable", s.variable},
                {"config", cfg}, {"files", files}};
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

json write_comparison_outputs(const InterfaceComparison& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& full = c.pos.full->sequences;
  const auto& ps = c.pos.hybrid.emt_sequences;
  const auto& ts = c.three.hybrid.emt_sequences;
  CsvWriter w({"t", "full_pos_pu", "full_neg_pu", "full_zero_pu", "posseq_pos_pu", "posseq_neg_pu",
               "posseq_zero_pu", "threeseq_pos_pu", "threeseq_neg_pu", "threeseq_zero_pu"});
  for (std::size_t k = 0; k < full[0].size(); ++k) {
    w.num(full[0].time(k));
    for (const auto* s : {&full, &ps, &ts})
      for (const auto& p : *s) w.num(p.magnitude_pu[k]);
    w.end_row();
  }
  json files = json::array({save(dir, "seq_voltages.csv", w)});
  json summary{{"PosSeqPQ", c.pos.report}, {"ThreeSeqCurrent", c.three.report}};
  write_atomic(dir / "comparison.json", summary.dump(2) + "\n");
  files.push_back({{"file", "comparison.json"}});
  json manifest{{"schema_version", kSchemaVersion}, {"kind", "compare-interfaces"},
                {"config", c.pos.config}, {"reports", summary}, {"files", files}};
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace hybridsim
