// SPDX-License-Identifier: Apache-2.0
//
// Three-compartment propofol PK with an effect-site compartment, simulated
// as one 4-state LTI system in compartment concentrations
//
//   d/dt [x1 x2 x3 xe]^T = A_aug [x1 x2 x3 xe]^T + B_aug * I(t)
//
// plus the Hill sensor map from effect-site concentration to BIS.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bisloop/error.hpp"
#include "bisloop/patient_model.hpp"

namespace bisloop {

/// (x1, x2, x3, xe) in ug/ml.
template <typename Scalar>
using PkState = Eigen::Matrix<Scalar, 4, 1>;

template <typename Scalar = double>
struct PkModel {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;
  using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

  PkParams params;
  HillParams hill;
  Matrix3 a;     // PK system matrix
  Vector3 b;     // (1/v1, 0, 0)
  Scalar ke0;

  Matrix4 augmented_a() const {
    Matrix4 m = Matrix4::Zero();
    m.template topLeftCorner<3, 3>() = a;
    m(3, 0) = ke0;
    m(3, 3) = -ke0;
    return m;
  }

  Vector4 augmented_b() const {
    Vector4 v = Vector4::Zero();
    v.template head<3>() = b;
    return v;
  }

  /// Drug mass held in the three PK compartments, mg.
  Scalar body_mass(const PkState<Scalar>& s) const {
    return Scalar(params.v1) * s(0) + Scalar(params.v2) * s(1) + Scalar(params.v3) * s(2);
  }
};

template <typename Scalar = double>
PkModel<Scalar> make_pk_model(const PkParams& p, const HillParams& hill) {
  PkModel<Scalar> m;
  m.params = p;
  m.hill = hill;
  // Concentration form: the back-transfer into the central compartment is
  // cl_i / v1 (= k12, k13), the uptake into a peripheral one cl_i / v_i.
  // This keeps v1 x1 + v2 x2 + v3 x3 equal to the administered mass when
  // k10 = 0; x1 and xe are the same as in the amount form.
  m.a << -(p.k12 + p.k13 + p.k10), p.k12, p.k13,
          p.k21, -p.k21, 0,
          p.k31, 0, -p.k31;
  m.b << Scalar(1) / Scalar(p.v1), 0, 0;
  m.ke0 = Scalar(p.ke0);
  return m;
}

template <typename Scalar = double>
PkModel<Scalar> make_pk_model(const PatientRecord& patient, ParamMode mode = ParamMode::corrected) {
  return make_pk_model<Scalar>(derive_pk(patient.demographics, mode), patient.hill);
}

/// Right-hand side of the mass balance plus effect-site equilibration.
template <typename Scalar>
PkState<Scalar> derivatives(const PkModel<Scalar>& m, const PkState<Scalar>& s, Scalar infusion) {
  PkState<Scalar> d;
  d.template head<3>() = m.a * s.template head<3>() + m.b * infusion;
  d(3) = m.ke0 * (s(0) - s(3));
  return d;
}

enum class StepScheme { exact, rk4 };

inline const char* to_string(StepScheme s) { return s == StepScheme::exact ? "exact" : "rk4"; }

inline StepScheme parse_step_scheme(const std::string& s) {
  if (s == "exact") return StepScheme::exact;
  if (s == "rk4") return StepScheme::rk4;
  throw ConfigError("unknown scheme '" + s + "' (expected exact | rk4)");
}

/// Classical fourth-order Runge-Kutta over one step with the infusion held.
template <typename Scalar>
PkState<Scalar> step_rk4(const PkModel<Scalar>& m, const PkState<Scalar>& s, Scalar infusion,
                         Scalar dt) {
  const PkState<Scalar> k1 = derivatives(m, s, infusion);
  const PkState<Scalar> k2 = derivatives(m, PkState<Scalar>(s + dt / 2 * k1), infusion);
  const PkState<Scalar> k3 = derivatives(m, PkState<Scalar>(s + dt / 2 * k2), infusion);
  const PkState<Scalar> k4 = derivatives(m, PkState<Scalar>(s + dt * k3), infusion);
  return s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// Zero-order-hold transition pair for a fixed step: s' = phi s + gamma u.
template <typename Scalar>
struct ZohTransition {
  Eigen::Matrix<Scalar, 4, 4> phi;
  Eigen::Matrix<Scalar, 4, 1> gamma;
};

/// exp([A B; 0 0] dt) yields phi and gamma in one matrix exponential.
template <typename Scalar>
ZohTransition<Scalar> zoh_transition(const PkModel<Scalar>& m, Scalar dt) {
  Eigen::Matrix<Scalar, 5, 5> aug = Eigen::Matrix<Scalar, 5, 5>::Zero();
  aug.template topLeftCorner<4, 4>() = m.augmented_a() * dt;
  aug.template topRightCorner<4, 1>() = m.augmented_b() * dt;
  const Eigen::Matrix<Scalar, 5, 5> e = aug.exp();
  return {e.template topLeftCorner<4, 4>(), e.template topRightCorner<4, 1>()};
}

template <typename Scalar>
PkState<Scalar> step_exact(const ZohTransition<Scalar>& t, const PkState<Scalar>& s,
                           Scalar infusion) {
  return t.phi * s + t.gamma * infusion;
}

/// Advances a model on a fixed internal grid with either scheme. The ZOH
/// operators are computed once at construction.
template <typename Scalar = double>
class PlantStepper {
public:
  PlantStepper(PkModel<Scalar> model, StepScheme scheme, Scalar dt)
      : model_(std::move(model)), scheme_(scheme), dt_(dt) {
    if (!(dt > 0)) throw ConfigError("plant step must be positive");
    if (scheme_ == StepScheme::exact) zoh_ = zoh_transition(model_, dt_);
  }

  PkState<Scalar> step(const PkState<Scalar>& s, Scalar infusion) const {
    if (scheme_ == StepScheme::exact) return step_exact(zoh_, s, infusion);
    return step_rk4(model_, s, infusion, dt_);
  }

  const PkModel<Scalar>& model() const { return model_; }
  StepScheme scheme() const { return scheme_; }
  Scalar dt() const { return dt_; }

private:
  PkModel<Scalar> model_;
  StepScheme scheme_;
  Scalar dt_;
  ZohTransition<Scalar> zoh_;
};

/// Generic one-off step; builds the transition on each call for `exact`.
template <typename Scalar>
PkState<Scalar> step(const PkModel<Scalar>& m, const PkState<Scalar>& s, Scalar infusion,
                     Scalar dt, StepScheme scheme) {
  if (scheme == StepScheme::exact) return step_exact(zoh_transition(m, dt), s, infusion);
  return step_rk4(m, s, infusion, dt);
}

/// Unclamped Hill response. Negative concentrations are treated as zero.
template <typename Scalar>
Scalar bis_unclamped(const HillParams& h, Scalar ce) {
  using std::pow;
  if (!(ce > Scalar(0))) return Scalar(h.e0);
  const Scalar cg = pow(ce, Scalar(h.gamma));
  const Scalar eg = pow(Scalar(h.ec50), Scalar(h.gamma));
  return Scalar(h.e0) - Scalar(h.emax) * cg / (cg + eg);
}

inline double clamp_bis(double v) { return std::clamp(v, 0.0, 100.0); }

struct BisReading {
  double clean;   // Hill output before clamping
  double clamped; // sensor value on [0, 100]
};

inline BisReading bis(const HillParams& h, double ce) {
  const double v = bis_unclamped(h, ce);
  return {v, clamp_bis(v)};
}

struct OpenLoopSample {
  double t;        // min
  double infusion; // mg/min held over [t, t + dt)
  PkState<double> state;
  double bis_clean;
  double bis;
  double administered; // mg delivered over [0, t]
};

using InfusionProfile = std::function<double(double t_min)>;

/// Runs the plant open loop on the internal grid. The profile is sampled
/// at the left edge of each step and held.
inline std::vector<OpenLoopSample> simulate_open_loop(const PkModel<double>& m,
                                                      const InfusionProfile& profile,
                                                      double horizon, StepScheme scheme,
                                                      double dt) {
  if (!(horizon > 0)) throw ConfigError("horizon must be positive");
  PlantStepper<double> stepper(m, scheme, dt);
  const auto n = static_cast<long>(std::llround(horizon / dt));
  std::vector<OpenLoopSample> out;
  out.reserve(static_cast<size_t>(n) + 1);
  PkState<double> s = PkState<double>::Zero();
  double administered = 0.0;
  for (long i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double u = i < n ? profile(t) : 0.0;
    if (u < 0) throw ConfigError("infusion profile must be nonnegative");
    const auto r = bis(m.hill, s(3));
    out.push_back({t, u, s, r.clean, r.clamped, administered});
    if (i < n) {
      s = stepper.step(s, u);
      administered += u * dt;
    }
  }
  return out;
}

} // namespace bisloop
