// SPDX-License-Identifier: Apache-2.0
//
// bisloop: run closed-loop anesthesia scenarios, validate inputs, report
// metrics from stored traces, print the reference cohort.
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "bisloop/config_io.hpp"
#include "bisloop/error.hpp"
#include "bisloop/format.hpp"
#include "bisloop/loop_engine.hpp"
#include "bisloop/trace_io.hpp"

namespace fs = std::filesystem;
using namespace bisloop;

namespace {

enum Exit { kOk = 0, kConfig = 1, kDivergence = 2, kIo = 3 };

struct CommonInputs {
  std::string scenario = "standard";
  std::string patients;      // "all" or comma-separated ids
  std::string patients_file; // cohort CSV
  std::string config;        // flat JSON run configuration
  std::vector<std::string> overrides; // key=value
  std::optional<std::uint64_t> seed;
  std::string scheme, param_mode, sign_mode;
};

void add_common(CLI::App* cmd, CommonInputs& in) {
  cmd->add_option("--scenario", in.scenario, "Scenario file or built-in name")
      ->capture_default_str();
  cmd->add_option("--patients", in.patients, "'all' or comma-separated patient ids");
  cmd->add_option("--patients-file", in.patients_file, "Cohort CSV replacing the built-in table");
  cmd->add_option("--config", in.config, "Run configuration file (JSON)");
  cmd->add_option("--set", in.overrides, "Override one configuration key, key=value");
  cmd->add_option("--seed", in.seed, "Master seed (default 42)");
  cmd->add_option("--scheme", in.scheme, "Plant integrator: exact | rk4");
  cmd->add_option("--param-mode", in.param_mode, "corrected | paper-literal");
  cmd->add_option("--sign-mode", in.sign_mode, "Adaptation sign: physical | paper");
}

RunSettings effective_settings(const CommonInputs& in) {
  RunSettings s;
  if (!in.config.empty()) s = load_settings(in.config);
  Json patch = Json::object();
  for (const auto& kv : in.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    try {
      patch[key] = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      patch[key] = value; // bare words are strings
    }
  }
  if (!in.scheme.empty()) patch["scheme"] = in.scheme;
  if (!in.param_mode.empty()) patch["param_mode"] = in.param_mode;
  if (!in.sign_mode.empty()) patch["sign_mode"] = in.sign_mode;
  s = settings_from_json(patch, s);
  if (in.seed) s.master_seed = *in.seed;
  return s;
}

std::vector<PatientRecord> select_patients(const CommonInputs& in, const ScenarioSpec& spec) {
  std::vector<PatientRecord> pool;
  if (!in.patients_file.empty()) {
    std::ifstream f(in.patients_file);
    if (!f) throw IoError("cannot open '" + in.patients_file + "'");
    pool = read_cohort_csv(f);
  } else {
    pool = builtin_cohort();
  }

  std::string sel = in.patients;
  if (sel.empty()) sel = spec.patient_id ? std::to_string(*spec.patient_id) : "all";

  std::vector<PatientRecord> chosen;
  if (sel == "all") {
    chosen = pool;
  } else {
    std::set<int> ids;
    std::stringstream ss(sel);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        size_t used = 0;
        const int id = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        ids.insert(id);
      } catch (const std::exception&) {
        throw ConfigError("bad patient id '" + tok + "'");
      }
    }
    for (int id : ids) {
      auto it = std::find_if(pool.begin(), pool.end(), [&](const PatientRecord& p) { return p.id == id; });
      if (it == pool.end()) throw ConfigError("unknown patient id " + std::to_string(id));
      chosen.push_back(*it);
    }
  }
  // id order keeps file listings and the summary independent of the selection syntax
  std::sort(chosen.begin(), chosen.end(),
            [](const PatientRecord& a, const PatientRecord& b) { return a.id < b.id; });
  for (size_t i = 1; i < chosen.size(); ++i)
    if (chosen[i].id == chosen[i - 1].id)
      throw ConfigError("duplicate patient id " + std::to_string(chosen[i].id));
  if (chosen.empty()) throw ConfigError("no patients selected");
  return chosen;
}

ScenarioSpec effective_scenario(const CommonInputs& in, const RunSettings& s) {
  ScenarioSpec spec = load_scenario(in.scenario);
  if (s.target_bis) spec.target_bis = *s.target_bis;
  validate(spec);
  return spec;
}

int cmd_run(const CommonInputs& in, const std::string& out_dir, unsigned jobs,
            std::optional<double> coast, bool no_traces, bool no_summary, bool plot_data,
            bool quiet) {
  const RunSettings settings = effective_settings(in);
  ScenarioSpec spec = effective_scenario(in, settings);
  if (coast) spec.coast = *coast;
  validate(spec);
  const auto patients = select_patients(in, spec);

  Json echo;
  echo["scenario"] = to_json(spec);
  echo["settings"] = to_json(settings);
  echo["patients"] = Json::array();
  for (const auto& p : patients) echo["patients"].push_back(p.id);
  if (!quiet) std::cout << "effective configuration: " << echo.dump() << "\n";

  const CohortResult res =
      run_cohort(settings.controller, spec, patients, settings.master_seed, settings.engine, jobs);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

  if (!no_traces)
    for (const auto& t : res.traces)
      write_trace_file(fs::path(out_dir) / trace_file_name(spec.name, t.patient.id), t);

  bool diverged = false;
  bool config_failure = false;
  for (const auto& f : res.failures) {
    std::cerr << "patient " << f.patient_id << ": " << f.message << "\n";
    const bool has_trace = std::any_of(res.traces.begin(), res.traces.end(),
                                       [&](const SimTrace& t) { return t.patient.id == f.patient_id; });
    (has_trace ? diverged : config_failure) = true;
  }

  if (!res.traces.empty() && !res.summary.reports.empty()) {
    const RunContext ctx = run_context(res.traces);
    if (!no_summary) {
      std::ofstream sum(fs::path(out_dir) / summary_file_name(spec.name), std::ios::binary);
      if (!sum) throw IoError("cannot write summary in '" + out_dir + "'");
      write_summary_csv(sum, res.summary, ctx);
      std::ofstream mj(fs::path(out_dir) / metrics_file_name(spec.name), std::ios::binary);
      if (!mj) throw IoError("cannot write metrics in '" + out_dir + "'");
      mj << metrics_json(res.summary, ctx).dump(2) << "\n";
    }
    if (plot_data) write_plot_data(out_dir, res.traces, ctx);
    if (!quiet) std::cout << format_report_table(res.summary);
  }
  if (config_failure) return kConfig;
  return diverged ? kDivergence : kOk;
}

int cmd_validate(const CommonInputs& in) {
  const RunSettings settings = effective_settings(in);
  const ScenarioSpec spec = effective_scenario(in, settings);
  const auto patients = select_patients(in, spec);

  std::cout << "scenario: " << to_json(spec).dump() << "\n";
  std::cout << "settings: " << to_json(settings).dump() << "\n";
  const double ratio = settings.controller.sample_period_s / settings.engine.plant_dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw ConfigError("plant_dt_s must divide sample_period_s");

  int warnings = 0;
  bool unstable = false;
  std::printf("%4s %8s %8s %8s %8s %8s %8s %8s %8s %8s %8s %8s\n", "id", "v1", "v2", "v3", "cl1",
              "cl2", "cl3", "k10", "k12", "k13", "k21", "k31");
  for (const auto& p : patients) {
    validate(p.hill);
    const PkParams pk = derive_pk(p.demographics, settings.engine.param_mode);
    std::printf("%4d %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %8.5f\n", p.id,
                pk.v1, pk.v2, pk.v3, pk.cl1, pk.cl2, pk.cl3, pk.k10, pk.k12, pk.k13, pk.k21, pk.k31);
    for (const auto& w : pk.warnings) {
      std::cout << "warning: patient " << p.id << ": " << w << "\n";
      ++warnings;
    }
    const auto model = make_pk_model<double>(pk, p.hill);
    const Eigen::Vector3cd ev = model.a.eigenvalues();
    if (ev.real().maxCoeff() >= 0) {
      std::cout << "warning: patient " << p.id << ": PK matrix is not Hurwitz (max Re = "
                << format_double(ev.real().maxCoeff()) << ")\n";
      unstable = true;
    }
  }
  std::cout << (warnings || unstable ? "valid with warnings\n" : "valid\n");
  return kOk;
}

int cmd_report(std::vector<std::string> files, const std::string& summary_out,
               const std::string& metrics_out) {
  std::vector<SimTrace> traces;
  for (const auto& f : files) traces.push_back(read_trace_file(f));
  std::sort(traces.begin(), traces.end(),
            [](const SimTrace& a, const SimTrace& b) { return a.patient.id < b.patient.id; });
  for (size_t i = 1; i < traces.size(); ++i)
    if (traces[i].patient.id == traces[i - 1].patient.id)
      throw ConfigError("two traces for patient " + std::to_string(traces[i].patient.id));
  const RunContext ctx = run_context(traces);

  std::vector<MetricsReport> reports;
  for (const auto& t : traces) {
    if (t.records.empty()) throw IoError("trace for patient " + std::to_string(t.patient.id) + " is empty");
    reports.push_back(evaluate(t));
  }
  const CohortSummary summary = summarize_cohort(reports);
  std::cout << format_report_table(summary);
  if (!summary_out.empty()) {
    std::ofstream out(summary_out, std::ios::binary);
    if (!out) throw IoError("cannot write '" + summary_out + "'");
    write_summary_csv(out, summary, ctx);
  }
  if (!metrics_out.empty()) {
    std::ofstream out(metrics_out, std::ios::binary);
    if (!out) throw IoError("cannot write '" + metrics_out + "'");
    out << metrics_json(summary, ctx).dump(2) << "\n";
  }
  return kOk;
}

int cmd_cohort(const std::string& export_path) {
  const auto& cohort = builtin_cohort();
  std::printf("%4s %4s %7s %7s %4s %6s %6s %6s %6s %8s\n", "id", "age", "height", "weight", "sex",
              "ec50", "e0", "emax", "gamma", "lbm");
  for (const auto& p : cohort) {
    const auto& d = p.demographics;
    std::printf("%4d %4d %7.1f %7.1f %4s %6.2f %6.1f %6.1f %6.2f %8.3f\n", p.id, d.age,
                d.height_cm, d.weight_kg, to_string(d.sex).c_str(), p.hill.ec50, p.hill.e0,
                p.hill.emax, p.hill.gamma, lean_body_mass(d));
  }
  std::printf("patient %d is the nominal patient; patient %d is the sensitivity reference\n",
              kNominalPatientId, kSensitivePatientId);
  if (!export_path.empty()) {
    std::ofstream out(export_path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + export_path + "'");
    write_cohort_csv(out, cohort);
  }
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop propofol anesthesia simulator with an adaptive TSK controller"};
  app.set_version_flag("--version", BISLOOP_VERSION);
  app.require_subcommand(1);

  CommonInputs run_in;
  std::string out_dir = "out";
  unsigned jobs = 1;
  std::optional<double> coast;
  bool no_traces = false, no_summary = false, plot_data = false, quiet = false;
  auto* run = app.add_subcommand("run", "Simulate a scenario over a set of patients");
  add_common(run, run_in);
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--jobs", jobs, "Worker threads; results do not depend on this")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--coast", coast, "Zero-infusion tail after the horizon, min");
  run->add_flag("--no-traces", no_traces, "Do not write per-patient trace files");
  run->add_flag("--no-summary", no_summary, "Do not write the summary and metrics files");
  run->add_flag("--plot-data", plot_data, "Write wide-format plot data files");
  run->add_flag("-q,--quiet", quiet, "Suppress the configuration echo and report table");

  CommonInputs val_in;
  auto* val = app.add_subcommand("validate", "Check inputs and print derived PK parameters");
  add_common(val, val_in);

  std::vector<std::string> report_files;
  std::string report_summary, report_metrics;
  auto* rep = app.add_subcommand("report", "Recompute metrics from stored trace files");
  rep->add_option("traces", report_files, "Trace files")->required();
  rep->add_option("--summary-out", report_summary, "Also write the summary table here");
  rep->add_option("--metrics-out", report_metrics, "Also write the metrics JSON here");

  std::string cohort_export;
  auto* coh = app.add_subcommand("cohort", "Print the reference patient table");
  coh->add_option("--export", cohort_export, "Write the table as cohort CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (run->parsed())
      return cmd_run(run_in, out_dir, jobs, coast, no_traces, no_summary, plot_data, quiet);
    if (val->parsed()) return cmd_validate(val_in);
    if (rep->parsed()) return cmd_report(report_files, report_summary, report_metrics);
    if (coh->parsed()) return cmd_cohort(cohort_export);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
