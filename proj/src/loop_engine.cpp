// SPDX-License-Identifier: Apache-2.0
#include "bisloop/loop_engine.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "bisloop/error.hpp"

namespace bisloop {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

long checked_ratio(double whole, double part, const char* what) {
  const double ratio = whole / part;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
    throw ConfigError(std::string(what) + " must divide evenly");
  return n;
}

} // namespace

std::uint64_t patient_seed(std::uint64_t master_seed, int patient_id) {
  return splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(patient_id)));
}

SimTrace run(const PatientRecord& patient, const ControllerConfig& cfg_in, const ScenarioSpec& spec,
             const EngineOptions& options) {
  validate(spec);
  ControllerConfig cfg = cfg_in;
  cfg.target_bis = spec.target_bis;
  validate(cfg);
  validate(patient.hill);

  SimTrace trace;
  trace.patient = patient;
  trace.controller = cfg;
  trace.scenario = spec;
  trace.engine = options;
  trace.version = BISLOOP_VERSION;

  const double ts = cfg.sample_period_min();
  const double plant_dt = options.plant_dt_s / 60.0;
  const long substeps =
      checked_ratio(cfg.sample_period_s, options.plant_dt_s, "plant step (control period / plant_dt_s)");
  const long n_main = checked_ratio(spec.horizon, ts, "horizon (in control periods)");
  const long n_coast = spec.coast > 0 ? checked_ratio(spec.coast, ts, "coast (in control periods)") : 0;

  const PlantStepper<double> plant(make_pk_model<double>(patient, options.param_mode),
                                   options.scheme, plant_dt);
  TskController<double> controller(cfg);
  std::optional<NoiseStream> noise;
  if (spec.noise) {
    NoiseModel nm = *spec.noise;
    // independent of the controller's init stream, reproducible from both seeds
    nm.seed = splitmix64(cfg.seed ^ splitmix64(nm.seed + 0x6e6f697365ULL));
    noise.emplace(nm, ts);
  }

  trace.records.reserve(static_cast<size_t>(n_main + n_coast + 1));
  PkState<double> x = PkState<double>::Zero();
  double u = 0.0;
  const double eps = 1e-9 * ts;

  for (long n = 0; n <= n_main + n_coast; ++n) {
    const double t = static_cast<double>(n) * ts;
    if (n > 0)
      for (long s = 0; s < substeps; ++s) x = plant.step(x, u);

    TraceRecord rec;
    rec.t = t;
    rec.x1 = x(0);
    rec.x2 = x(1);
    rec.x3 = x(2);
    rec.ce = x(3);
    rec.bis_clean = bis_unclamped(patient.hill, x(3));
    rec.disturbance =
        (t >= spec.induction_end - eps && n <= n_main) ? disturbance_at(spec.events, t) : 0.0;
    rec.noise = noise ? noise->next() : 0.0;
    rec.bis_disturbed = clamp_bis(rec.bis_clean + rec.disturbance);
    rec.bis_measured = clamp_bis(rec.bis_clean + rec.disturbance + rec.noise);

    if (n <= n_main && options.controller_enabled) {
      try {
        const auto out = controller.step(rec.bis_measured);
        rec.u = out.u;
        rec.u_raw = out.u_raw;
        rec.e = out.e;
        rec.r = out.r;
        rec.cost = out.cost;
        rec.alpha = out.params_used;
      } catch (const DivergenceError& err) {
        trace.aborted = true;
        trace.diagnostic = std::string(err.what()) + " at t = " + std::to_string(t) + " min";
        return trace;
      }
    } else {
      rec.e = normalized_error(rec.bis_measured, cfg.target_bis);
      rec.r = critic_signal(rec.e);
      rec.cost = cost(rec.r, 0.0, cfg);
      rec.alpha = controller.state().params;
    }
    u = rec.u;
    trace.records.push_back(rec);
  }
  return trace;
}

CohortResult run_cohort(const ControllerConfig& cfg, const ScenarioSpec& spec,
                        const std::vector<PatientRecord>& patients, std::uint64_t master_seed,
                        const EngineOptions& options, unsigned jobs) {
  if (patients.empty()) throw ConfigError("run_cohort: empty patient list");
  validate(spec);

  struct Slot {
    std::optional<SimTrace> trace;
    std::optional<MetricsReport> report;
    std::string error;
  };
  std::vector<Slot> slots(patients.size());

  auto work = [&](size_t i) {
    try {
      ControllerConfig c = cfg;
      c.seed = patient_seed(master_seed, patients[i].id);
      SimTrace tr = run(patients[i], c, spec, options);
      tr.master_seed = master_seed;
      if (tr.aborted) slots[i].error = tr.diagnostic;
      if (!tr.records.empty()) slots[i].report = evaluate(tr);
      slots[i].trace = std::move(tr);
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(patients.size())));
  if (workers == 1) {
    for (size_t i = 0; i < patients.size(); ++i) work(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next++; i < patients.size(); i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }

  CohortResult result;
  std::vector<MetricsReport> reports;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].error.empty()) result.failures.push_back({patients[i].id, slots[i].error});
    if (slots[i].trace) result.traces.push_back(std::move(*slots[i].trace));
    if (slots[i].report) reports.push_back(*slots[i].report);
  }
  if (!reports.empty()) result.summary = summarize_cohort(reports);
  return result;
}

} // namespace bisloop
