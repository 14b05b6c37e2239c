// SPDX-License-Identifier: Apache-2.0
#include "bisloop/config_io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "bisloop/error.hpp"

namespace bisloop {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::string bad;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) bad += (bad.empty() ? "" : ", ") + it.key();
  if (!bad.empty()) throw ConfigError(where + ": unknown key(s) " + bad);
}

template <typename T>
T get(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

const std::set<std::string> kControllerKeys = {
    "eta",   "k",         "K_u",       "em",            "u_min",           "u_max",
    "sample_period_s", "target_bis", "seed", "sign_mode", "penalty_input", "divergence_limit",
    "init_range"};
const std::set<std::string> kEngineKeys = {"scheme", "plant_dt_s", "param_mode",
                                           "controller_enabled"};

} // namespace

Json to_json(const ControllerConfig& c) {
  Json j;
  j["eta"] = c.eta;
  j["k"] = c.k;
  j["K_u"] = c.k_u;
  j["em"] = c.em;
  j["u_min"] = c.u_min;
  j["u_max"] = c.u_max;
  j["sample_period_s"] = c.sample_period_s;
  j["target_bis"] = c.target_bis;
  j["seed"] = c.seed;
  j["sign_mode"] = to_string(c.sign_mode);
  j["penalty_input"] = to_string(c.penalty_input);
  j["divergence_limit"] = c.divergence_limit;
  j["init_range"] = c.init_range;
  return j;
}

ControllerConfig controller_from_json(const Json& j, ControllerConfig c) {
  const std::string where = "controller config";
  reject_unknown(j, kControllerKeys, where);
  c.eta = get(j, "eta", c.eta, where);
  c.k = get(j, "k", c.k, where);
  c.k_u = get(j, "K_u", c.k_u, where);
  c.em = get(j, "em", c.em, where);
  c.u_min = get(j, "u_min", c.u_min, where);
  c.u_max = get(j, "u_max", c.u_max, where);
  c.sample_period_s = get(j, "sample_period_s", c.sample_period_s, where);
  c.target_bis = get(j, "target_bis", c.target_bis, where);
  c.seed = get<std::uint64_t>(j, "seed", c.seed, where);
  c.sign_mode = parse_sign_mode(get<std::string>(j, "sign_mode", to_string(c.sign_mode), where));
  c.penalty_input =
      parse_penalty_input(get<std::string>(j, "penalty_input", to_string(c.penalty_input), where));
  c.divergence_limit = get(j, "divergence_limit", c.divergence_limit, where);
  c.init_range = get(j, "init_range", c.init_range, where);
  validate(c);
  return c;
}

Json to_json(const EngineOptions& o) {
  Json j;
  j["scheme"] = to_string(o.scheme);
  j["plant_dt_s"] = o.plant_dt_s;
  j["param_mode"] = to_string(o.param_mode);
  j["controller_enabled"] = o.controller_enabled;
  return j;
}

EngineOptions engine_from_json(const Json& j, EngineOptions o) {
  const std::string where = "engine options";
  reject_unknown(j, kEngineKeys, where);
  o.scheme = parse_step_scheme(get<std::string>(j, "scheme", to_string(o.scheme), where));
  o.plant_dt_s = get(j, "plant_dt_s", o.plant_dt_s, where);
  o.param_mode = parse_param_mode(get<std::string>(j, "param_mode", to_string(o.param_mode), where));
  o.controller_enabled = get(j, "controller_enabled", o.controller_enabled, where);
  if (!(o.plant_dt_s > 0)) throw ConfigError("plant_dt_s must be positive");
  return o;
}

Json to_json(const ScenarioSpec& s) {
  Json j;
  j["name"] = s.name;
  j["horizon_min"] = s.horizon;
  j["induction_end_min"] = s.induction_end;
  j["target_bis"] = s.target_bis;
  Json events = Json::array();
  for (const auto& ev : s.events) {
    Json e;
    e["label"] = std::string(1, ev.label);
    e["start_min"] = ev.start;
    e["duration_min"] = ev.duration;
    e["amplitude"] = ev.amplitude;
    e["shape"] = to_string(ev.shape);
    if (ev.shape == EventShape::ramp_hold_decay) e["ramp_min"] = ev.ramp;
    events.push_back(e);
  }
  j["events"] = events;
  if (s.noise) {
    j["noise"] = {{"std", s.noise->std},
                  {"cutoff_per_min", s.noise->cutoff_per_min},
                  {"seed", s.noise->seed}};
  } else {
    j["noise"] = nullptr;
  }
  if (s.patient_id) j["patient_id"] = *s.patient_id;
  j["coast_min"] = s.coast;
  return j;
}

ScenarioSpec scenario_from_json(const Json& j) {
  const std::string where = "scenario";
  reject_unknown(j,
                 {"name", "horizon_min", "induction_end_min", "target_bis", "events", "noise",
                  "patient_id", "coast_min"},
                 where);
  ScenarioSpec s;
  s.name = get<std::string>(j, "name", s.name, where);
  if (!j.contains("horizon_min")) throw ConfigError("scenario: missing 'horizon_min'");
  s.horizon = get(j, "horizon_min", s.horizon, where);
  s.induction_end = get(j, "induction_end_min", s.horizon, where);
  s.target_bis = get(j, "target_bis", s.target_bis, where);
  s.coast = get(j, "coast_min", 0.0, where);
  if (j.contains("patient_id") && !j.at("patient_id").is_null())
    s.patient_id = get(j, "patient_id", 0, where);

  if (j.contains("events")) {
    const Json& ev = j.at("events");
    if (ev.is_string()) {
      if (ev.get<std::string>() != "standard")
        throw ConfigError("scenario: events must be a list or \"standard\"");
      s.events = standard_profile(s.horizon);
    } else if (ev.is_array()) {
      for (const Json& e : ev) {
        const std::string ew = "scenario event";
        reject_unknown(e, {"label", "start_min", "duration_min", "amplitude", "shape", "ramp_min"}, ew);
        DisturbanceEvent d;
        const auto label = get<std::string>(e, "label", "", ew);
        if (label.size() != 1) throw ConfigError("scenario event: label must be a single letter");
        d.label = label[0];
        const std::string lw = std::string("event ") + d.label;
        if (!e.contains("start_min") || !e.contains("duration_min") || !e.contains("amplitude"))
          throw ConfigError(lw + ": start_min, duration_min and amplitude are required");
        d.start = get(e, "start_min", 0.0, lw);
        d.duration = get(e, "duration_min", 0.0, lw);
        d.amplitude = get(e, "amplitude", 0.0, lw);
        d.shape = parse_event_shape(get<std::string>(e, "shape", "step", lw));
        d.ramp = get(e, "ramp_min", d.ramp, lw);
        s.events.push_back(d);
      }
    } else if (!ev.is_null()) {
      throw ConfigError("scenario: events must be a list or \"standard\"");
    }
  }

  if (j.contains("noise") && !j.at("noise").is_null()) {
    const Json& n = j.at("noise");
    reject_unknown(n, {"std", "cutoff_per_min", "seed"}, "scenario noise");
    NoiseModel nm;
    nm.std = get(n, "std", nm.std, "scenario noise");
    nm.cutoff_per_min = get(n, "cutoff_per_min", nm.cutoff_per_min, "scenario noise");
    nm.seed = get<std::uint64_t>(n, "seed", nm.seed, "scenario noise");
    s.noise = nm;
  }
  validate(s);
  return s;
}

Json to_json(const PatientRecord& p) {
  Json j;
  j["id"] = p.id;
  j["age"] = p.demographics.age;
  j["height_cm"] = p.demographics.height_cm;
  j["weight_kg"] = p.demographics.weight_kg;
  j["sex"] = to_string(p.demographics.sex);
  j["ec50"] = p.hill.ec50;
  j["e0"] = p.hill.e0;
  j["emax"] = p.hill.emax;
  j["gamma"] = p.hill.gamma;
  return j;
}

PatientRecord patient_from_json(const Json& j) {
  const std::string where = "patient";
  reject_unknown(j, {"id", "age", "height_cm", "weight_kg", "sex", "ec50", "e0", "emax", "gamma"},
                 where);
  PatientRecord p;
  p.id = get(j, "id", 0, where);
  p.demographics.age = get(j, "age", 0, where);
  p.demographics.height_cm = get(j, "height_cm", 0.0, where);
  p.demographics.weight_kg = get(j, "weight_kg", 0.0, where);
  const auto sex = get<std::string>(j, "sex", "F", where);
  if (sex != "M" && sex != "F") throw ConfigError("patient: sex must be M or F");
  p.demographics.sex = sex == "M" ? Sex::male : Sex::female;
  p.hill = {get(j, "e0", 0.0, where), get(j, "emax", 0.0, where), get(j, "ec50", 0.0, where),
            get(j, "gamma", 0.0, where)};
  return p;
}

Json to_json(const RunSettings& s) {
  Json j = to_json(s.controller);
  j.erase("seed");
  const Json engine = to_json(s.engine);
  for (auto& [k, v] : engine.items()) j[k] = v;
  j["seed"] = s.master_seed;
  if (s.target_bis) j["target_bis"] = *s.target_bis;
  else j.erase("target_bis");
  return j;
}

RunSettings settings_from_json(const Json& j, RunSettings s) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  Json ctrl = Json::object();
  Json eng = Json::object();
  std::string bad;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "seed") {
      s.master_seed = get<std::uint64_t>(j, "seed", s.master_seed, "config");
    } else if (key == "target_bis") {
      s.target_bis = get(j, "target_bis", 50.0, "config");
    } else if (kControllerKeys.count(key)) {
      ctrl[key] = it.value();
    } else if (kEngineKeys.count(key)) {
      eng[key] = it.value();
    } else {
      bad += (bad.empty() ? "" : ", ") + key;
    }
  }
  if (!bad.empty()) throw ConfigError("config: unknown key(s) " + bad);
  s.controller = controller_from_json(ctrl, s.controller);
  s.engine = engine_from_json(eng, s.engine);
  return s;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

ScenarioSpec load_scenario(const std::string& name_or_path) {
  if (!std::filesystem::exists(name_or_path)) {
    if (auto s = builtin_scenario(name_or_path)) return *s;
    throw IoError("scenario '" + name_or_path + "' is neither a file nor a built-in scenario");
  }
  ScenarioSpec s = scenario_from_json(read_json_file(name_or_path));
  return s;
}

RunSettings load_settings(const std::string& path) { return settings_from_json(read_json_file(path)); }

} // namespace bisloop
