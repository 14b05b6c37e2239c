// SPDX-License-Identifier: Apache-2.0
#include "bisloop/patient_model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "bisloop/error.hpp"
#include "bisloop/format.hpp"

namespace bisloop {

namespace {

constexpr double kCl2InterceptCorrected = 2.562;
constexpr double kCl2InterceptLiteral = 0.018;

std::vector<PatientRecord> make_cohort() {
  using S = Sex;
  // id, age, height, weight, sex, ec50, e0, emax, gamma
  struct Row {
    int id, age;
    double h, w;
    S sex;
    double ec50, e0, emax, gamma;
  };
  const Row rows[] = {
      {1, 40, 163, 54, S::female, 6.33, 98.8, 94.1, 2.24},
      {2, 36, 163, 50, S::female, 6.76, 98.6, 86, 4.29},
      {3, 28, 164, 52, S::female, 8.44, 91.2, 80.7, 4.1},
      {4, 50, 163, 83, S::female, 6.44, 95.9, 102, 2.18},
      {5, 28, 164, 60, S::male, 4.93, 94.7, 85.3, 2.46},
      {6, 43, 163, 59, S::female, 12.1, 90.2, 147, 2.42},
      {7, 37, 187, 75, S::male, 8.02, 92, 104, 2.10},
      {8, 38, 174, 80, S::female, 6.56, 95.5, 76.4, 4.12},
      {9, 41, 170, 70, S::female, 6.15, 89.2, 63.8, 6.89},
      {10, 37, 167, 58, S::female, 13.7, 83.1, 151, 1.65},
      {11, 42, 179, 78, S::male, 4.82, 91.8, 77.9, 1.85},
      {12, 34, 172, 58, S::female, 4.95, 96.2, 90.8, 1.84},
      {13, 38, 169, 65, S::female, 7.42, 93.1, 96.6, 3},
  };
  std::vector<PatientRecord> out;
  for (const auto& r : rows)
    out.push_back({r.id, {r.age, r.h, r.w, r.sex}, {r.e0, r.emax, r.ec50, r.gamma}});
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

} // namespace

void validate(const Demographics& d) {
  if (d.age < 0) throw ConfigError("age must be >= 0");
  if (!(d.height_cm > 0)) throw ConfigError("height must be > 0");
  if (!(d.weight_kg > 0)) throw ConfigError("weight must be > 0");
}

void validate(const HillParams& h) {
  if (!(h.ec50 > 0)) throw ConfigError("ec50 must be > 0");
  if (!(h.gamma > 0)) throw ConfigError("gamma must be > 0");
  if (!(h.e0 > 0 && h.e0 <= 100)) throw ConfigError("e0 must lie in (0, 100]");
  if (!std::isfinite(h.emax)) throw ConfigError("emax must be finite");
}

double lean_body_mass_formula(const Demographics& d) noexcept {
  const double ratio = d.weight_kg / d.height_cm;
  if (d.sex == Sex::male) return 1.1 * d.weight_kg - 128.0 * ratio * ratio;
  return 1.07 * d.weight_kg - 148.0 * ratio * ratio;
}

double lean_body_mass(const Demographics& d) {
  validate(d);
  const double lbm = lean_body_mass_formula(d);
  if (!(lbm > 0))
    throw ConfigError("degenerate demographics: lean body mass " + format_double(lbm) + " kg");
  return lbm;
}

Volumes compartment_volumes(const Demographics& d) {
  validate(d);
  const Volumes v{4.27, 39.623 - 0.391 * d.age, 238.0};
  if (!(v.v2 > 0))
    throw ConfigError("v2 = 39.623 - 0.391*" + std::to_string(d.age) + " is not positive");
  return v;
}

Clearances clearances(const Demographics& d, ParamMode mode) {
  const double lbm = lean_body_mass(d);
  const double intercept =
      mode == ParamMode::corrected ? kCl2InterceptCorrected : kCl2InterceptLiteral;
  Clearances c{0.0456 * d.weight_kg + 0.0264 * d.height_cm - 0.0681 * lbm - 2.271,
               intercept - 0.024 * d.age, 0.836, {}};

  auto report = [&](const std::string& msg) {
    if (mode == ParamMode::corrected) throw ConfigError(msg);
    c.warnings.push_back(msg);
  };
  if (!(c.cl1 > 0)) report("cl1 = " + format_double(c.cl1) + " is not positive");
  if (!(c.cl2 > 0)) {
    std::ostringstream msg;
    msg << "cl2 = " << format_double(intercept) << " - 0.024*" << d.age << " = "
        << format_double(c.cl2) << " < 0";
    report(msg.str());
  }
  return c;
}

PkParams derive_pk(const Demographics& d, ParamMode mode) {
  const Volumes v = compartment_volumes(d);
  Clearances c = clearances(d, mode);
  PkParams p;
  p.v1 = v.v1;
  p.v2 = v.v2;
  p.v3 = v.v3;
  p.cl1 = c.cl1;
  p.cl2 = c.cl2;
  p.cl3 = c.cl3;
  p.k10 = c.cl1 / v.v1;
  p.k12 = c.cl2 / v.v1;
  p.k13 = c.cl3 / v.v1;
  p.k21 = c.cl2 / v.v2;
  p.k31 = c.cl3 / v.v3;
  p.ke0 = kPropofolKe0;
  p.warnings = std::move(c.warnings);
  return p;
}

const std::vector<PatientRecord>& builtin_cohort() {
  static const std::vector<PatientRecord> cohort = make_cohort();
  return cohort;
}

std::optional<PatientRecord> find_patient(int id) {
  for (const auto& p : builtin_cohort())
    if (p.id == id) return p;
  return std::nullopt;
}

std::string to_string(Sex s) { return s == Sex::male ? "M" : "F"; }

std::string to_string(ParamMode m) {
  return m == ParamMode::corrected ? "corrected" : "paper-literal";
}

ParamMode parse_param_mode(const std::string& s) {
  if (s == "corrected") return ParamMode::corrected;
  if (s == "paper-literal" || s == "paper_literal") return ParamMode::paper_literal;
  throw ConfigError("unknown param_mode '" + s + "' (expected corrected | paper-literal)");
}

void write_cohort_csv(std::ostream& os, const std::vector<PatientRecord>& cohort) {
  os << "id,age,height_cm,weight_kg,sex,ec50,e0,emax,gamma\n";
  for (const auto& p : cohort) {
    const auto& d = p.demographics;
    const auto& h = p.hill;
    os << p.id << ',' << d.age << ',' << format_double(d.height_cm) << ','
       << format_double(d.weight_kg) << ',' << to_string(d.sex) << ',' << format_double(h.ec50)
       << ',' << format_double(h.e0) << ',' << format_double(h.emax) << ','
       << format_double(h.gamma) << '\n';
  }
}

std::vector<PatientRecord> read_cohort_csv(std::istream& is) {
  static const std::vector<std::string> header = {"id",  "age", "height_cm", "weight_kg", "sex",
                                                  "ec50", "e0",  "emax",      "gamma"};
  std::string line;
  int lineno = 0;
  bool seen_header = false;
  std::vector<PatientRecord> out;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_csv_line(line);
    for (auto& c : cells) c = trim(c);
    if (!seen_header) {
      if (cells != header)
        throw IoError("cohort file: expected header 'id,age,height_cm,weight_kg,sex,ec50,e0,emax,gamma'");
      seen_header = true;
      continue;
    }
    if (cells.size() != header.size())
      throw IoError("cohort file line " + std::to_string(lineno) + ": expected 9 fields");
    try {
      PatientRecord p;
      p.id = static_cast<int>(parse_double(cells[0]));
      p.demographics.age = static_cast<int>(parse_double(cells[1]));
      p.demographics.height_cm = parse_double(cells[2]);
      p.demographics.weight_kg = parse_double(cells[3]);
      if (cells[4] == "M" || cells[4] == "m" || cells[4] == "male")
        p.demographics.sex = Sex::male;
      else if (cells[4] == "F" || cells[4] == "f" || cells[4] == "female")
        p.demographics.sex = Sex::female;
      else
        throw IoError("unknown sex '" + cells[4] + "'");
      p.hill = {parse_double(cells[6]), parse_double(cells[7]), parse_double(cells[5]),
                parse_double(cells[8])};
      validate(p.demographics);
      validate(p.hill);
      out.push_back(p);
    } catch (const Error& e) {
      throw IoError("cohort file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!seen_header) throw IoError("cohort file: missing header row");
  return out;
}

} // namespace bisloop
