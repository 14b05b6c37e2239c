// SPDX-License-Identifier: Apache-2.0
//
// JSON documents: scenario files, run-configuration files, and the
// metadata block embedded in trace headers.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "bisloop/trace.hpp"

namespace bisloop {

using Json = nlohmann::ordered_json;

/// Flat run configuration; every key is optional and overrides the default.
/// Keys: eta, k, K_u, em, u_min, u_max, sample_period_s, target_bis, seed,
/// param_mode, sign_mode, penalty_input, scheme, plant_dt_s,
/// divergence_limit, init_range.
struct RunSettings {
  ControllerConfig controller;
  EngineOptions engine;
  std::uint64_t master_seed = 42;
  std::optional<double> target_bis; // overrides the scenario target when set
};

Json to_json(const ControllerConfig& c);
ControllerConfig controller_from_json(const Json& j, ControllerConfig base = {});

Json to_json(const EngineOptions& o);
EngineOptions engine_from_json(const Json& j, EngineOptions base = {});

Json to_json(const ScenarioSpec& s);
ScenarioSpec scenario_from_json(const Json& j);

Json to_json(const PatientRecord& p);
PatientRecord patient_from_json(const Json& j);

Json to_json(const RunSettings& s);
RunSettings settings_from_json(const Json& j, RunSettings base = {});

Json read_json_file(const std::string& path);

/// A built-in scenario name or a path to a scenario file.
ScenarioSpec load_scenario(const std::string& name_or_path);
RunSettings load_settings(const std::string& path);

} // namespace bisloop
