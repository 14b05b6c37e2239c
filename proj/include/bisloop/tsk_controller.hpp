// SPDX-License-Identifier: Apache-2.0
//
// Single-input TSK fuzzy controller with critic-driven online adaptation of
// its consequent parameters.
//
// Rules (i = Ne, Ze, Po):  IF e is F_i THEN C_i(e) = a_i e + b_i
// Output:                  u_raw = mu^T alpha X,  X = (e, 1)^T
// Adaptation (Euler):      alpha <- alpha - eta dt (s k r + K u) mu X^T
//
// s is the sign of dr/dE * dE/du: -1 in the literal law (SignMode::paper),
// +1 when both physical derivatives are negative (SignMode::physical).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "bisloop/error.hpp"

namespace bisloop {

/// Grades (Ne, Ze, Po).
template <typename Scalar>
using Grades = Eigen::Matrix<Scalar, 3, 1>;

/// Consequent coefficients, one row (a_i, b_i) per rule.
template <typename Scalar>
using TskParams = Eigen::Matrix<Scalar, 3, 2>;

template <typename Scalar>
using Regressor = Eigen::Matrix<Scalar, 2, 1>;

enum class SignMode { paper, physical };

/// Which infusion enters the K_u penalty: the commanded u_raw or the
/// saturated, delivered u.
enum class PenaltyInput { commanded, delivered };

struct ControllerConfig {
  double eta = 2.0;
  double k = 150.0;
  double k_u = 0.13;
  double em = 0.5;
  double u_min = 0.0;  // mg/min
  double u_max = 50.0; // mg/min
  double sample_period_s = 1.0;
  double target_bis = 50.0;
  std::uint64_t seed = 1;
  SignMode sign_mode = SignMode::physical;
  PenaltyInput penalty_input = PenaltyInput::commanded;
  double divergence_limit = 1e6;
  double init_range = 2.0; // alpha entries drawn from [-init_range, init_range]

  double sample_period_min() const { return sample_period_s / 60.0; }
};

inline void validate(const ControllerConfig& c) {
  if (!(c.u_min < c.u_max)) throw ConfigError("u_min must be < u_max");
  if (c.u_min < 0) throw ConfigError("u_min must be >= 0 (infusion cannot be negative)");
  if (!(c.sample_period_s > 0)) throw ConfigError("sample_period_s must be positive");
  if (!(c.em > 0)) throw ConfigError("em must be positive");
  if (!(c.eta >= 0)) throw ConfigError("eta must be >= 0");
  if (!(c.k > 0)) throw ConfigError("k must be positive");
  if (!(c.k_u >= 0)) throw ConfigError("K_u must be >= 0");
  if (!(c.target_bis > 0 && c.target_bis <= 100)) throw ConfigError("target_bis must lie in (0, 100]");
  if (!(c.divergence_limit > 0)) throw ConfigError("divergence_limit must be positive");
  if (!(c.init_range >= 0)) throw ConfigError("init_range must be >= 0");
}

inline const char* to_string(SignMode m) { return m == SignMode::paper ? "paper" : "physical"; }

inline SignMode parse_sign_mode(const std::string& s) {
  if (s == "paper") return SignMode::paper;
  if (s == "physical") return SignMode::physical;
  throw ConfigError("unknown sign_mode '" + s + "' (expected paper | physical)");
}

inline const char* to_string(PenaltyInput p) {
  return p == PenaltyInput::commanded ? "commanded" : "delivered";
}

inline PenaltyInput parse_penalty_input(const std::string& s) {
  if (s == "commanded") return PenaltyInput::commanded;
  if (s == "delivered") return PenaltyInput::delivered;
  throw ConfigError("unknown penalty_input '" + s + "' (expected commanded | delivered)");
}

/// e = (target - measured) / 100
template <typename Scalar>
Scalar normalized_error(Scalar measured_bis, Scalar target_bis) {
  return (target_bis - measured_bis) / Scalar(100);
}

/// Shoulder ramps for Ne and Po, triangle for Ze; the grades always sum to 1.
template <typename Scalar>
struct MembershipSet {
  Scalar em = Scalar(0.5);

  Grades<Scalar> operator()(Scalar e) const {
    using std::abs;
    using std::max;
    using std::min;
    const Scalar x = e / em;
    const Scalar ax = abs(x);
    const Scalar zero(0), one(1);
    Grades<Scalar> g;
    g(0) = min(one, max(zero, Scalar(-x)));
    g(1) = max(zero, Scalar(one - ax));
    g(2) = min(one, max(zero, x));
    return g;
  }
};

template <typename Scalar>
Grades<Scalar> membership_grades(const MembershipSet<Scalar>& ms, Scalar e) {
  return ms(e);
}

template <typename Scalar>
Regressor<Scalar> regressor(Scalar e) {
  return Regressor<Scalar>(e, Scalar(1));
}

template <typename Scalar>
Scalar tsk_output(const TskParams<Scalar>& params, const Grades<Scalar>& grades, Scalar e) {
  return grades.dot(params * regressor(e));
}

/// d u_raw / d alpha = mu X^T, a 3x2 outer product.
template <typename Scalar>
TskParams<Scalar> output_gradient(const Grades<Scalar>& grades, Scalar e) {
  return grades * regressor(e).transpose();
}

template <typename Scalar>
Scalar saturate(Scalar u_raw, const ControllerConfig& cfg) {
  return std::clamp(u_raw, Scalar(cfg.u_min), Scalar(cfg.u_max));
}

/// The reinforcement signal is the normalized error itself.
template <typename Scalar>
Scalar critic_signal(Scalar e) {
  return e;
}

template <typename Scalar>
Scalar cost(Scalar r, Scalar u, const ControllerConfig& cfg) {
  return Scalar(0.5) * Scalar(cfg.k) * r * r + Scalar(0.5) * Scalar(cfg.k_u) * u * u;
}

inline double sensitivity_sign(SignMode m) { return m == SignMode::paper ? -1.0 : 1.0; }

/// Scalar factor (s k r + K u) of the steepest-descent update.
template <typename Scalar>
Scalar learning_signal(Scalar r, Scalar u, const ControllerConfig& cfg) {
  return Scalar(sensitivity_sign(cfg.sign_mode)) * Scalar(cfg.k) * r + Scalar(cfg.k_u) * u;
}

/// One explicit Euler step of the parameter dynamics; dt is the sample
/// period in seconds. Throws DivergenceError on non-finite or runaway
/// parameters.
template <typename Scalar>
TskParams<Scalar> update_params(const TskParams<Scalar>& params, const Grades<Scalar>& grades,
                                Scalar e, Scalar r, Scalar u, const ControllerConfig& cfg) {
  const Scalar step = Scalar(cfg.eta) * Scalar(cfg.sample_period_s) * learning_signal(r, u, cfg);
  TskParams<Scalar> next = params - step * output_gradient(grades, e);
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    using std::abs;
    using std::isfinite;
    const Scalar v = next.data()[i];
    if (!isfinite(v) || abs(v) > Scalar(cfg.divergence_limit))
      throw DivergenceError("controller parameters diverged (|alpha| > " +
                            std::to_string(cfg.divergence_limit) + " or non-finite)");
  }
  return next;
}

/// Uniform draw on [-range, range] for each of the six entries, row-major.
inline TskParams<double> init_params(std::uint64_t seed, double range = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  TskParams<double> p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) p(i, j) = dist(rng);
  return p;
}

template <typename Scalar>
struct ControllerState {
  TskParams<Scalar> params;
  Scalar last_u = Scalar(0);
  Scalar last_e = Scalar(0);
};

template <typename Scalar>
struct ControllerStep {
  Scalar u;     // saturated infusion to apply, mg/min
  Scalar u_raw; // TSK output before saturation
  Scalar e;
  Scalar r;
  Scalar cost;
  Grades<Scalar> grades;
  TskParams<Scalar> params_used; // alpha that produced u_raw (pre-update)
};

/// One controller instance per patient run; not shared between threads.
template <typename Scalar = double>
class TskController {
public:
  explicit TskController(ControllerConfig cfg)
      : TskController(cfg, init_params(cfg.seed, cfg.init_range).template cast<Scalar>()) {}

  TskController(ControllerConfig cfg, TskParams<Scalar> initial)
      : cfg_(std::move(cfg)), membership_{Scalar(cfg_.em)} {
    validate(cfg_);
    state_.params = std::move(initial);
  }

  /// e -> grades -> u_raw -> u -> r -> parameter update.
  ControllerStep<Scalar> step(Scalar measured_bis) {
    ControllerStep<Scalar> out;
    out.e = normalized_error(measured_bis, Scalar(cfg_.target_bis));
    out.grades = membership_(out.e);
    out.params_used = state_.params;
    out.u_raw = tsk_output(state_.params, out.grades, out.e);
    out.u = saturate(out.u_raw, cfg_);
    out.r = critic_signal(out.e);
    const Scalar penalized = cfg_.penalty_input == PenaltyInput::commanded ? out.u_raw : out.u;
    out.cost = cost(out.r, penalized, cfg_);
    state_.params = update_params(state_.params, out.grades, out.e, out.r, penalized, cfg_);
    state_.last_u = out.u;
    state_.last_e = out.e;
    return out;
  }

  const ControllerState<Scalar>& state() const { return state_; }
  const ControllerConfig& config() const { return cfg_; }

private:
  ControllerConfig cfg_;
  MembershipSet<Scalar> membership_;
  ControllerState<Scalar> state_;
};

} // namespace bisloop
