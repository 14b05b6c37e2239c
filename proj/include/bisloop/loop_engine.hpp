// SPDX-License-Identifier: Apache-2.0
//
// Closed-loop orchestration. Per control tick n (t = n Ts):
//   1. advance the plant over the previous period with u held,
//   2. Hill output, 3. add disturbance (t >= induction_end), 4. add noise,
//   5. clamp to [0, 100], 6. controller step -> next u.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bisloop/metrics.hpp"
#include "bisloop/trace.hpp"

namespace bisloop {

/// Runs one patient. The controller target is taken from the scenario.
/// Divergence does not throw: the partial trace comes back with
/// `aborted` set and a diagnostic.
SimTrace run(const PatientRecord& patient, const ControllerConfig& cfg, const ScenarioSpec& spec,
             const EngineOptions& options = {});

/// Deterministic per-patient seed derived from the master seed.
std::uint64_t patient_seed(std::uint64_t master_seed, int patient_id);

struct PatientFailure {
  int patient_id;
  std::string message;
};

struct CohortResult {
  std::vector<SimTrace> traces; // ordered as the input patient list
  CohortSummary summary;
  std::vector<PatientFailure> failures; // config errors and divergences
};

/// Runs every patient under the same scenario with seeds derived from
/// `master_seed`. `jobs` > 1 runs patients on worker threads; results do
/// not depend on it.
CohortResult run_cohort(const ControllerConfig& cfg, const ScenarioSpec& spec,
                        const std::vector<PatientRecord>& patients, std::uint64_t master_seed,
                        const EngineOptions& options = {}, unsigned jobs = 1);

} // namespace bisloop
