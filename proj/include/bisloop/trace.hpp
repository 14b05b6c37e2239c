// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bisloop/patient_model.hpp"
#include "bisloop/pkpd.hpp"
#include "bisloop/scenario.hpp"
#include "bisloop/tsk_controller.hpp"

namespace bisloop {

struct EngineOptions {
  StepScheme scheme = StepScheme::exact;
  double plant_dt_s = 0.1; // must divide the control period
  ParamMode param_mode = ParamMode::corrected;
  bool controller_enabled = true; // false forces u = 0
};

/// One row per control tick. `u` is held over [t, t + Ts).
struct TraceRecord {
  double t = 0;     // min
  double u = 0;     // delivered infusion, mg/min
  double u_raw = 0; // TSK output before saturation
  double x1 = 0, x2 = 0, x3 = 0, ce = 0;
  double bis_clean = 0;     // Hill output, unclamped
  double disturbance = 0;   // BIS units
  double noise = 0;         // BIS units
  double bis_disturbed = 0; // clamp(clean + disturbance)
  double bis_measured = 0;  // clamp(clean + disturbance + noise), fed to the controller
  double e = 0, r = 0, cost = 0;
  TskParams<double> alpha = TskParams<double>::Zero(); // parameters that produced u_raw
};

struct SimTrace {
  PatientRecord patient;
  ControllerConfig controller;
  ScenarioSpec scenario;
  EngineOptions engine;
  std::uint64_t master_seed = 0;
  std::string version;
  bool aborted = false;
  std::string diagnostic;
  std::vector<TraceRecord> records;

  double sample_period_min() const { return controller.sample_period_min(); }
  double target() const { return scenario.target_bis; }
};

} // namespace bisloop
