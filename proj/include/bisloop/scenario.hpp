// SPDX-License-Identifier: Apache-2.0
//
// Simulation timelines: induction window, surgical-stimulation disturbances
// added to the BIS output, and band-limited measurement noise.
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bisloop {

enum class EventShape { step, pulse, ramp_hold_decay };

struct DisturbanceEvent {
  char label = 'A';
  double start = 0.0;     // min
  double duration = 1.0;  // min
  double amplitude = 0.0; // BIS units, added to the clean output
  EventShape shape = EventShape::step;
  double ramp = 0.5; // min; rise/fall time for ramp_hold_decay

  /// Contribution at time t (min); active on [start, start + duration).
  double value_at(double t) const;
  double end() const { return start + duration; }
};

/// First-order low-pass filtered Gaussian noise.
struct NoiseModel {
  double std = 2.0;            // stationary standard deviation, BIS units
  double cutoff_per_min = 6.0; // corner frequency, cycles/min
  std::uint64_t seed = 0;
};

struct ScenarioSpec {
  std::string name = "scenario";
  double horizon = 10.0;       // min
  double target_bis = 50.0;
  double induction_end = 10.0; // min; maintenance starts here
  std::vector<DisturbanceEvent> events;
  std::optional<NoiseModel> noise;
  std::optional<int> patient_id;
  double coast = 0.0;          // min of zero-infusion tail after the horizon
};

/// Throws ConfigError naming the offending field or event label.
void validate(const ScenarioSpec& spec);

/// Sum of active event contributions at t.
double disturbance_at(const std::vector<DisturbanceEvent>& events, double t);

/// Eight-event surgical stimulation profile A..H. The default amplitudes and
/// timings are not taken from a published table; they are configurable
/// defaults spanning a 60-min run.
std::vector<DisturbanceEvent> standard_profile(double horizon = 60.0);

/// AR(1) realization of NoiseModel sampled every `sample_period_min`.
/// Starts in the stationary distribution so every sample has std `model.std`.
class NoiseStream {
public:
  NoiseStream(const NoiseModel& model, double sample_period_min);
  double next();
  double coefficient() const { return a_; }

private:
  double std_;
  double a_;
  double innovation_;
  double state_ = 0.0;
  bool started_ = false;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Sample number `t_index` of a fresh stream (index 0 is the first sample).
double noise_sample(const NoiseModel& model, double sample_period_min, std::size_t t_index);

std::string to_string(EventShape s);
EventShape parse_event_shape(const std::string& s);

/// Built-in scenarios: induction, induction-noisy, standard, standard-noisy.
std::optional<ScenarioSpec> builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

} // namespace bisloop
