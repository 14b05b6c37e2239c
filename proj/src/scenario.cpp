// SPDX-License-Identifier: Apache-2.0
#include "bisloop/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bisloop/error.hpp"
#include "bisloop/format.hpp"

namespace bisloop {

double DisturbanceEvent::value_at(double t) const {
  if (t < start || t >= end()) return 0.0;
  if (shape != EventShape::ramp_hold_decay) return amplitude;
  const double r = std::min(ramp, duration / 2.0);
  if (r <= 0.0) return amplitude;
  const double since = t - start;
  const double until = end() - t;
  return amplitude * std::min({1.0, since / r, until / r});
}

void validate(const ScenarioSpec& spec) {
  if (!(spec.horizon > 0)) throw ConfigError("scenario horizon must be positive");
  if (!(spec.induction_end >= 0 && spec.induction_end <= spec.horizon))
    throw ConfigError("induction_end must lie in [0, horizon]");
  if (!(spec.target_bis > 0 && spec.target_bis <= 100))
    throw ConfigError("target_bis must lie in (0, 100]");
  if (spec.coast < 0) throw ConfigError("coast must be >= 0");
  constexpr double tol = 1e-9;
  for (const auto& ev : spec.events) {
    const std::string who = std::string("event ") + ev.label;
    if (!(ev.duration > 0)) throw ConfigError(who + ": duration must be positive");
    if (ev.start < spec.induction_end - tol || ev.end() > spec.horizon + tol)
      throw ConfigError(who + ": [" + format_double(ev.start) + ", " + format_double(ev.end()) +
                        "] lies outside the maintenance window [" +
                        format_double(spec.induction_end) + ", " + format_double(spec.horizon) +
                        "]");
    if (!std::isfinite(ev.amplitude)) throw ConfigError(who + ": amplitude must be finite");
    if (ev.shape == EventShape::ramp_hold_decay && !(ev.ramp >= 0))
      throw ConfigError(who + ": ramp must be >= 0");
  }
  if (spec.noise) {
    if (!(spec.noise->std >= 0)) throw ConfigError("noise std must be >= 0");
    if (!(spec.noise->cutoff_per_min > 0)) throw ConfigError("noise cutoff must be positive");
  }
}

double disturbance_at(const std::vector<DisturbanceEvent>& events, double t) {
  double sum = 0.0;
  for (const auto& ev : events) sum += ev.value_at(t);
  return sum;
}

std::vector<DisturbanceEvent> standard_profile(double horizon) {
  using S = EventShape;
  constexpr double d_amp = 8.0;
  return {
      {'A', 15.0, 1.0, 10.0, S::pulse},           // intubation arousal
      {'B', 18.0, 3.0, 10.0, S::step},            // incision, then a quiet wait
      {'C', 26.0, 1.0, 15.0, S::pulse},           // abrupt stimulus after quiet
      {'D', 30.0, horizon - 30.0, d_amp, S::step}, // continuous surgical stimulation
      {'E', 35.0, 1.0, 15.0, S::pulse},
      {'F', 40.0, 1.0, 15.0, S::pulse},
      {'G', 45.0, 1.0, 15.0, S::pulse},
      {'H', 55.0, horizon - 55.0, -d_amp, S::step}, // withdrawal while closing
  };
}

NoiseStream::NoiseStream(const NoiseModel& model, double sample_period_min)
    : std_(model.std),
      a_(std::exp(-2.0 * std::numbers::pi * model.cutoff_per_min * sample_period_min)),
      innovation_(std::sqrt(1.0 - a_ * a_) * model.std),
      rng_(model.seed) {}

double NoiseStream::next() {
  if (std_ == 0.0) return 0.0;
  const double w = normal_(rng_);
  if (!started_) {
    state_ = std_ * w;
    started_ = true;
  } else {
    state_ = a_ * state_ + innovation_ * w;
  }
  return state_;
}

double noise_sample(const NoiseModel& model, double sample_period_min, std::size_t t_index) {
  NoiseStream s(model, sample_period_min);
  double v = 0.0;
  for (std::size_t i = 0; i <= t_index; ++i) v = s.next();
  return v;
}

std::string to_string(EventShape s) {
  switch (s) {
  case EventShape::step: return "step";
  case EventShape::pulse: return "pulse";
  case EventShape::ramp_hold_decay: return "ramp-up-hold-decay";
  }
  return "step";
}

EventShape parse_event_shape(const std::string& s) {
  if (s == "step") return EventShape::step;
  if (s == "pulse") return EventShape::pulse;
  if (s == "ramp-up-hold-decay" || s == "ramp_hold_decay") return EventShape::ramp_hold_decay;
  throw ConfigError("unknown event shape '" + s + "'");
}

std::optional<ScenarioSpec> builtin_scenario(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "induction" || name == "induction-noisy") {
    s.horizon = 10.0;
    s.induction_end = s.horizon; // induction only
  } else if (name == "standard" || name == "standard-noisy") {
    s.horizon = 60.0;
    s.induction_end = 10.0;
    s.events = standard_profile(s.horizon);
  } else {
    return std::nullopt;
  }
  if (name.ends_with("-noisy")) s.noise = NoiseModel{};
  return s;
}

std::vector<std::string> builtin_scenario_names() {
  return {"induction", "induction-noisy", "standard", "standard-noisy"};
}

} // namespace bisloop
