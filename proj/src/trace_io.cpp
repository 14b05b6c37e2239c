// SPDX-License-Identifier: Apache-2.0
#include "bisloop/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bisloop/error.hpp"
#include "bisloop/format.hpp"

namespace bisloop {

namespace {

constexpr const char* kDisturbanceNote =
    "# note: disturbance amplitudes and timings are configurable defaults, not published values";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void write_header(std::ostream& os, const std::string& kind, const Json& meta) {
  os << "# bisloop " << kind << "\n";
  os << "# version: " << BISLOOP_VERSION << "\n";
  os << kDisturbanceNote << "\n";
  os << "# meta: " << meta.dump() << "\n";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

} // namespace

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {
      "time_min", "infusion_mg_min", "x1",    "x2", "x3", "ce",  "bis_clean", "bis_measured",
      "disturbance", "noise", "bis_disturbed", "e", "r", "J", "u_raw", "u",
      "a1", "a2", "a3", "b1", "b2", "b3"};
  return cols;
}

Json trace_meta(const SimTrace& t) {
  Json j;
  j["version"] = t.version;
  j["master_seed"] = t.master_seed;
  j["patient"] = to_json(t.patient);
  j["controller"] = to_json(t.controller);
  j["engine"] = to_json(t.engine);
  j["scenario"] = to_json(t.scenario);
  j["aborted"] = t.aborted;
  j["diagnostic"] = t.diagnostic;
  return j;
}

void write_trace(std::ostream& os, const SimTrace& t) {
  write_header(os, "trace", trace_meta(t));
  os << "# patient: " << t.patient.id << "  scenario: " << t.scenario.name
     << "  master_seed: " << t.master_seed << "\n";
  if (t.aborted) os << "# aborted: " << t.diagnostic << "\n";
  const auto& cols = trace_columns();
  for (size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : t.records) {
    const double v[] = {r.t,           r.u,          r.x1,         r.x2,         r.x3,
                        r.ce,          r.bis_clean,  r.bis_measured, r.disturbance, r.noise,
                        r.bis_disturbed, r.e,        r.r,          r.cost,       r.u_raw,
                        r.u,           r.alpha(0, 0), r.alpha(1, 0), r.alpha(2, 0), r.alpha(0, 1),
                        r.alpha(1, 1), r.alpha(2, 1)};
    for (size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << format_double(v[i]);
    os << "\n";
  }
}

SimTrace read_trace(std::istream& is) {
  SimTrace t;
  bool have_meta = false;
  bool have_columns = false;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      static const std::string tag = "# meta: ";
      if (line.rfind(tag, 0) == 0) {
        Json meta;
        try {
          meta = Json::parse(line.substr(tag.size()));
          t.version = meta.at("version").get<std::string>();
          t.master_seed = meta.at("master_seed").get<std::uint64_t>();
          t.patient = patient_from_json(meta.at("patient"));
          t.controller = controller_from_json(meta.at("controller"));
          t.engine = engine_from_json(meta.at("engine"));
          t.scenario = scenario_from_json(meta.at("scenario"));
          t.aborted = meta.at("aborted").get<bool>();
          t.diagnostic = meta.at("diagnostic").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          throw IoError(std::string("trace metadata: ") + e.what());
        }
        have_meta = true;
      }
      continue;
    }
    if (!have_columns) {
      if (split(line, ',') != trace_columns()) throw IoError("trace: unexpected column header");
      have_columns = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != trace_columns().size())
      throw IoError("trace line " + std::to_string(lineno) + ": expected " +
                    std::to_string(trace_columns().size()) + " fields");
    double v[22];
    for (size_t i = 0; i < f.size(); ++i) v[i] = parse_double(f[i]);
    TraceRecord r;
    r.t = v[0];
    r.x1 = v[2];
    r.x2 = v[3];
    r.x3 = v[4];
    r.ce = v[5];
    r.bis_clean = v[6];
    r.bis_measured = v[7];
    r.disturbance = v[8];
    r.noise = v[9];
    r.bis_disturbed = v[10];
    r.e = v[11];
    r.r = v[12];
    r.cost = v[13];
    r.u_raw = v[14];
    r.u = v[15];
    r.alpha << v[16], v[19], v[17], v[20], v[18], v[21];
    t.records.push_back(r);
  }
  if (!have_meta) throw IoError("trace: missing '# meta:' header");
  if (!have_columns) throw IoError("trace: missing column header");
  return t;
}

void write_trace_file(const std::filesystem::path& path, const SimTrace& trace) {
  auto out = open_out(path);
  write_trace(out, trace);
  if (!out) throw IoError("write failed: '" + path.string() + "'");
}

SimTrace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return read_trace(in);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

RunContext run_context(const std::vector<SimTrace>& traces) {
  if (traces.empty()) throw ConfigError("no traces");
  auto config_of = [](const SimTrace& t) {
    Json c = to_json(t.controller);
    c.erase("seed"); // per-patient, derived from the master seed
    Json j;
    j["controller"] = c;
    j["engine"] = to_json(t.engine);
    j["scenario"] = to_json(t.scenario);
    return j;
  };
  RunContext ctx;
  ctx.scenario_name = traces.front().scenario.name;
  ctx.master_seed = traces.front().master_seed;
  ctx.config = config_of(traces.front());
  for (const auto& t : traces) {
    if (t.target() != traces.front().target())
      throw ConfigError("traces have different target BIS values (" +
                        format_double(traces.front().target()) + " vs " + format_double(t.target()) +
                        ")");
    if (config_of(t) != ctx.config || t.master_seed != ctx.master_seed)
      throw ConfigError("traces come from different runs (patient " + std::to_string(t.patient.id) +
                        " differs in configuration or seed)");
  }
  return ctx;
}

namespace {

Json context_meta(const RunContext& ctx) {
  Json j;
  j["scenario"] = ctx.scenario_name;
  j["master_seed"] = ctx.master_seed;
  j["config"] = ctx.config;
  return j;
}

} // namespace

void write_summary_csv(std::ostream& os, const CohortSummary& s, const RunContext& ctx) {
  write_header(os, "summary", context_meta(ctx));
  if (s.sensitive_patient) os << "# sensitivity reference: patient " << *s.sensitive_patient << "\n";
  os << "patient,status";
  for (const auto& name : summary_metric_names()) os << "," << name;
  os << "\n";
  for (const auto& r : s.reports) {
    os << r.patient_id << "," << (r.aborted ? "aborted" : "ok");
    for (const auto& name : summary_metric_names()) os << "," << format_double(metric_value(r, name));
    os << "\n";
  }
  for (const char* row : {"mean", "std", "worst", "worst_patient"}) {
    os << row << ",";
    for (const auto& st : s.stats) {
      const std::string r = row;
      os << ",";
      if (r == "mean") os << format_double(st.mean);
      else if (r == "std") os << format_double(st.std);
      else if (r == "worst") os << format_double(st.worst);
      else os << st.worst_patient;
    }
    os << "\n";
  }
}

Json metrics_json(const CohortSummary& s, const RunContext& ctx) {
  Json j = context_meta(ctx);
  Json patients = Json::array();
  auto phase = [](const PhaseMetrics& p) {
    Json o;
    o["empty"] = p.empty;
    o["iae_bis_s"] = p.iae_bis_s;
    o["tv_mg_min"] = p.tv;
    o["q_mg"] = p.q_mg;
    o["mdpe_pct"] = p.mdpe;
    o["mdape_pct"] = p.mdape;
    o["wobble_pct"] = p.wobble;
    return o;
  };
  for (const auto& r : s.reports) {
    Json p;
    p["id"] = r.patient_id;
    p["aborted"] = r.aborted;
    for (const auto& name : summary_metric_names()) p[name] = metric_value(r, name);
    p["induction"] = phase(r.induction);
    p["maintenance"] = phase(r.maintenance);
    patients.push_back(p);
  }
  j["patients"] = patients;
  Json cohort;
  for (const auto& st : s.stats)
    cohort[st.name] = {{"mean", st.mean}, {"std", st.std}, {"worst", st.worst},
                       {"worst_patient", st.worst_patient}};
  j["cohort"] = cohort;
  j["nominal_iae_bis_s"] = s.nominal_iae_bis_s ? Json(*s.nominal_iae_bis_s) : Json(nullptr);
  j["sensitive_patient"] = s.sensitive_patient ? Json(*s.sensitive_patient) : Json(nullptr);
  return j;
}

std::string format_report_table(const CohortSummary& s) {
  struct Row {
    const char* label;
    const char* metric;
  };
  static const Row rows[] = {{"IAE (BIS*s)", "iae_bis_s"},  {"MDPE (%)", "mdpe_pct"},
                             {"MDAPE (%)", "mdape_pct"},    {"WOBBLE (%)", "wobble_pct"},
                             {"TV (mg/min)", "tv_mg_min"}, {"Q (mg)", "q_mg"}};
  const bool single = s.reports.size() == 1;
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %s\n", "index",
                single ? ("patient " + std::to_string(s.reports.front().patient_id)).c_str()
                       : ("mean +/- std (n = " + std::to_string(s.reports.size()) + ")").c_str());
  out += buf;
  for (const auto& row : rows) {
    const MetricStat* st = nullptr;
    for (const auto& m : s.stats)
      if (m.name == row.metric) st = &m;
    if (!st) continue;
    if (single)
      std::snprintf(buf, sizeof buf, "%-14s %.2f\n", row.label, st->mean);
    else
      std::snprintf(buf, sizeof buf, "%-14s %.2f +/- %.2f\n", row.label, st->mean, st->std);
    out += buf;
  }
  if (s.nominal_iae_bis_s && !single) {
    std::snprintf(buf, sizeof buf, "nominal patient IAE (BIS*s): %.2f\n", *s.nominal_iae_bis_s);
    out += buf;
  }
  if (s.sensitive_patient) {
    for (const auto& r : s.reports)
      if (r.patient_id == *s.sensitive_patient) {
        std::snprintf(buf, sizeof buf,
                      "patient %d (sensitivity reference): IAE %.2f BIS*s, MDAPE %.2f %%\n",
                      r.patient_id, r.iae_bis_s, r.mdape);
        out += buf;
      }
  }
  for (const auto& r : s.reports)
    if (r.aborted) out += "patient " + std::to_string(r.patient_id) + ": run aborted (divergence)\n";
  return out;
}

std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path& dir,
                                                   const std::vector<SimTrace>& traces,
                                                   const RunContext& ctx) {
  using Getter = std::function<double(const TraceRecord&)>;
  const std::pair<const char*, Getter> series[] = {
      {"bis_measured", [](const TraceRecord& r) { return r.bis_measured; }},
      {"bis_clean", [](const TraceRecord& r) { return r.bis_clean; }},
      {"infusion", [](const TraceRecord& r) { return r.u; }},
      {"disturbance", [](const TraceRecord& r) { return r.disturbance; }},
      {"ce", [](const TraceRecord& r) { return r.ce; }},
  };
  size_t rows = 0;
  for (const auto& t : traces) rows = std::max(rows, t.records.size());

  std::vector<std::filesystem::path> written;
  for (const auto& [name, get] : series) {
    const auto path = dir / (ctx.scenario_name + "_plot_" + name + ".csv");
    auto out = open_out(path);
    write_header(out, std::string("plot data: ") + name, context_meta(ctx));
    out << "time_min";
    for (const auto& t : traces) out << ",patient_" << t.patient.id;
    out << "\n";
    for (size_t i = 0; i < rows; ++i) {
      const SimTrace* ref = nullptr;
      for (const auto& t : traces)
        if (i < t.records.size()) {
          ref = &t;
          break;
        }
      out << format_double(ref->records[i].t);
      // aborted runs leave their column empty past the abort point
      for (const auto& t : traces)
        out << "," << (i < t.records.size() ? format_double(get(t.records[i])) : "");
      out << "\n";
    }
    if (!out) throw IoError("write failed: '" + path.string() + "'");
    written.push_back(path);
  }
  return written;
}

std::string trace_file_name(const std::string& scenario, int patient_id) {
  return scenario + "_" + std::to_string(patient_id) + ".csv";
}

std::string summary_file_name(const std::string& scenario) { return scenario + "_summary.csv"; }

std::string metrics_file_name(const std::string& scenario) { return scenario + "_metrics.json"; }

} // namespace bisloop
