// SPDX-License-Identifier: Apache-2.0
#include "bisloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "bisloop/error.hpp"
#include "bisloop/patient_model.hpp"

namespace bisloop {

double iae(std::span<const double> bis, double target, double dt) {
  if (bis.empty()) throw Error("iae: empty series");
  double sum = 0.0;
  for (size_t i = 1; i < bis.size(); ++i)
    sum += 0.5 * (std::abs(target - bis[i - 1]) + std::abs(target - bis[i]));
  return sum * dt;
}

double tv(std::span<const double> u) {
  double sum = 0.0;
  for (size_t i = 1; i < u.size(); ++i) sum += std::abs(u[i] - u[i - 1]);
  return sum;
}

std::vector<double> pe_series(std::span<const double> bis, double target) {
  if (!(target > 0)) throw Error("pe_series: target must be positive");
  std::vector<double> pe;
  pe.reserve(bis.size());
  for (double b : bis) pe.push_back((b - target) / target * 100.0);
  return pe;
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of empty series");
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mdpe(std::span<const double> pe) { return median({pe.begin(), pe.end()}); }

double mdape(std::span<const double> pe) {
  std::vector<double> a;
  a.reserve(pe.size());
  for (double p : pe) a.push_back(std::abs(p));
  return median(std::move(a));
}

namespace {
double median_abs_dev(std::span<const double> pe, double center) {
  std::vector<double> a;
  a.reserve(pe.size());
  for (double p : pe) a.push_back(std::abs(p - center));
  return median(std::move(a));
}
} // namespace

double wobble(std::span<const double> pe) { return median_abs_dev(pe, mdape(pe)); }

double wobble_mdpe(std::span<const double> pe) { return median_abs_dev(pe, mdpe(pe)); }

double total_drug(std::span<const double> u, double dt_min) {
  double sum = 0.0;
  for (size_t i = 0; i + 1 < u.size(); ++i) sum += u[i];
  return sum * dt_min;
}

namespace {

PhaseMetrics phase_metrics(std::span<const double> bis, std::span<const double> u, double target,
                           double ts_min) {
  PhaseMetrics m;
  if (bis.empty()) return m;
  m.empty = false;
  m.iae_bis_s = iae(bis, target, ts_min * 60.0);
  m.tv = tv(u);
  m.q_mg = total_drug(u, ts_min);
  const auto pe = pe_series(bis, target);
  m.mdpe = mdpe(pe);
  m.mdape = mdape(pe);
  m.wobble = wobble(pe);
  return m;
}

} // namespace

MetricsReport evaluate(const SimTrace& trace, const MetricsOptions& opts) {
  const double ts = trace.sample_period_min();
  const double target = trace.target();
  const double horizon = trace.scenario.horizon;
  const double ind_end = trace.scenario.induction_end;
  const double eps = 1e-9 * ts;

  // induction_end == horizon marks an induction-only run
  const bool induction_only = ind_end >= horizon - eps;

  std::vector<double> bis, u, bis_ind, u_ind, bis_main, u_main;
  for (const auto& rec : trace.records) {
    if (rec.t > horizon + eps) break;
    bis.push_back(rec.bis_measured);
    u.push_back(rec.u);
    if (induction_only || rec.t < ind_end - eps) {
      bis_ind.push_back(rec.bis_measured);
      u_ind.push_back(rec.u);
    } else {
      bis_main.push_back(rec.bis_measured);
      u_main.push_back(rec.u);
    }
  }
  if (bis.empty()) throw Error("evaluate: empty trace");

  MetricsReport r;
  r.patient_id = trace.patient.id;
  r.aborted = trace.aborted;
  r.iae_bis_s = iae(bis, target, ts * 60.0);
  r.iae_bis_min = iae(bis, target, ts);
  r.tv = tv(u);
  r.q_mg = total_drug(u, ts);

  const bool full = opts.pe_full_run || bis_main.empty();
  const auto pe = pe_series(full ? std::span<const double>(bis) : std::span<const double>(bis_main),
                            target);
  r.mdpe = mdpe(pe);
  r.mdape = mdape(pe);
  r.wobble = wobble(pe);
  r.wobble_mdpe = wobble_mdpe(pe);

  r.settling_time_min = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < bis.size(); ++i) {
    if (std::abs(bis[i] - target) <= opts.settling_band) {
      r.settling_time_min = static_cast<double>(i) * ts;
      break;
    }
  }
  r.undershoot_depth = std::max(0.0, target - *std::min_element(bis.begin(), bis.end()));

  r.induction = phase_metrics(bis_ind, u_ind, target, ts);
  r.maintenance = phase_metrics(bis_main, u_main, target, ts);
  return r;
}

namespace {

struct MetricDef {
  std::string name;
  std::function<double(const MetricsReport&)> get;
  bool worst_by_magnitude;
};

const std::vector<MetricDef>& metric_defs() {
  static const std::vector<MetricDef> defs = {
      {"iae_bis_s", [](const MetricsReport& r) { return r.iae_bis_s; }, false},
      {"iae_bis_min", [](const MetricsReport& r) { return r.iae_bis_min; }, false},
      {"mdpe_pct", [](const MetricsReport& r) { return r.mdpe; }, true},
      {"mdape_pct", [](const MetricsReport& r) { return r.mdape; }, false},
      {"wobble_pct", [](const MetricsReport& r) { return r.wobble; }, false},
      {"wobble_mdpe_pct", [](const MetricsReport& r) { return r.wobble_mdpe; }, false},
      {"tv_mg_min", [](const MetricsReport& r) { return r.tv; }, false},
      {"q_mg", [](const MetricsReport& r) { return r.q_mg; }, false},
      {"settling_time_min", [](const MetricsReport& r) { return r.settling_time_min; }, false},
      {"undershoot_bis", [](const MetricsReport& r) { return r.undershoot_depth; }, false},
  };
  return defs;
}

} // namespace

const std::vector<std::string>& summary_metric_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& d : metric_defs()) n.push_back(d.name);
    return n;
  }();
  return names;
}

double metric_value(const MetricsReport& r, const std::string& name) {
  for (const auto& d : metric_defs())
    if (d.name == name) return d.get(r);
  throw Error("unknown metric '" + name + "'");
}

CohortSummary summarize_cohort(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw Error("summarize_cohort: no reports");
  CohortSummary s;
  s.reports = reports;
  const double n = static_cast<double>(reports.size());
  for (const auto& def : metric_defs()) {
    MetricStat st;
    st.name = def.name;
    double sum = 0.0;
    for (const auto& r : reports) sum += def.get(r);
    st.mean = sum / n;
    double ss = 0.0;
    for (const auto& r : reports) {
      const double d = def.get(r) - st.mean;
      ss += d * d;
    }
    st.std = reports.size() > 1 ? std::sqrt(ss / n) : 0.0;
    const MetricsReport* worst = &reports.front();
    for (const auto& r : reports) {
      const double a = def.worst_by_magnitude ? std::abs(def.get(r)) : def.get(r);
      const double b = def.worst_by_magnitude ? std::abs(def.get(*worst)) : def.get(*worst);
      if (a > b) worst = &r;
    }
    st.worst = def.get(*worst);
    st.worst_patient = worst->patient_id;
    s.stats.push_back(st);
  }
  for (const auto& r : reports) {
    if (r.patient_id == kNominalPatientId) s.nominal_iae_bis_s = r.iae_bis_s;
    if (r.patient_id == kSensitivePatientId) s.sensitive_patient = r.patient_id;
  }
  return s;
}

} // namespace bisloop
