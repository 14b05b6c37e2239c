// SPDX-License-Identifier: Apache-2.0
//
// Patient covariates, Hill parameters and the covariate-driven propofol
// PK parameterization (lean body mass, volumes, clearances, rate constants).
//
// Units: time in minutes, volumes in liters, clearances in l/min,
// concentrations in ug/ml (= mg/l).
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bisloop {

enum class Sex { male, female };

struct Demographics {
  int age = 0;            // years
  double height_cm = 0.0;
  double weight_kg = 0.0;
  Sex sex = Sex::female;
};

struct HillParams {
  double e0 = 100.0;   // baseline BIS
  double emax = 100.0; // maximal drug effect, BIS units
  double ec50 = 1.0;   // ug/ml
  double gamma = 1.0;  // slope
};

struct PatientRecord {
  int id = 0;
  Demographics demographics;
  HillParams hill;
};

/// `corrected` uses 2.562 as the cl2 intercept; `paper_literal` keeps
/// 0.018, which is negative for every adult age.
enum class ParamMode { corrected, paper_literal };

struct Volumes {
  double v1, v2, v3;
};

struct Clearances {
  double cl1, cl2, cl3;
  std::vector<std::string> warnings; // only populated in paper_literal mode
};

struct PkParams {
  double v1 = 0, v2 = 0, v3 = 0;
  double cl1 = 0, cl2 = 0, cl3 = 0;
  double k10 = 0, k12 = 0, k13 = 0, k21 = 0, k31 = 0;
  double ke0 = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kPropofolKe0 = 0.456; // 1/min

void validate(const Demographics& d);
void validate(const HillParams& h);

/// Unchecked sex-specific formula; may be zero or negative for degenerate input.
double lean_body_mass_formula(const Demographics& d) noexcept;

/// Lean body mass in kg. Throws ConfigError for invalid demographics or a
/// nonpositive result.
double lean_body_mass(const Demographics& d);

Volumes compartment_volumes(const Demographics& d);

Clearances clearances(const Demographics& d, ParamMode mode = ParamMode::corrected);

/// Rate constants use the standard mapping: outflow constants over v1,
/// back-transfer constants over the destination volume.
PkParams derive_pk(const Demographics& d, ParamMode mode = ParamMode::corrected);

/// The 13-patient reference cohort; id 13 is the nominal patient.
const std::vector<PatientRecord>& builtin_cohort();

/// Looks up a built-in patient by 1-based id.
std::optional<PatientRecord> find_patient(int id);

inline constexpr int kNominalPatientId = 13;
inline constexpr int kSensitivePatientId = 9;

std::string to_string(Sex s);
std::string to_string(ParamMode m);
ParamMode parse_param_mode(const std::string& s);

// Cohort text format: header row
// id,age,height_cm,weight_kg,sex,ec50,e0,emax,gamma
void write_cohort_csv(std::ostream& os, const std::vector<PatientRecord>& cohort);
std::vector<PatientRecord> read_cohort_csv(std::istream& is);

} // namespace bisloop
