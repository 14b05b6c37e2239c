// SPDX-License-Identifier: Apache-2.0
//
// Clinical control-performance indices: IAE, TV, PE/MDPE/MDAPE/WOBBLE,
// administered drug Q, and cohort aggregation.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bisloop/trace.hpp"

namespace bisloop {

/// Trapezoidal integral of |target - bis| with uniform spacing dt. The
/// result carries the units of dt (pass seconds for BIS*s).
double iae(std::span<const double> bis, double target, double dt);

/// Sum of |u_k - u_{k-1}|; zero for fewer than two samples.
double tv(std::span<const double> u);

/// 100 * (bis - target) / target per sample.
std::vector<double> pe_series(std::span<const double> bis, double target);

/// Mean of the two central order statistics for even lengths. Throws on empty input.
double median(std::vector<double> values);

double mdpe(std::span<const double> pe);
double mdape(std::span<const double> pe);
/// Median of |PE - MDAPE|.
double wobble(std::span<const double> pe);
/// Median of |PE - MDPE|.
double wobble_mdpe(std::span<const double> pe);

/// Left Riemann sum of a zero-order-held infusion: sum of u_k * dt over all
/// but the last sample (the last sample is never held over an interval).
double total_drug(std::span<const double> u, double dt_min);

struct PhaseMetrics {
  bool empty = true;
  double iae_bis_s = 0;
  double tv = 0;
  double q_mg = 0;
  double mdpe = 0, mdape = 0, wobble = 0;
};

struct MetricsReport {
  int patient_id = 0;
  bool aborted = false;
  double iae_bis_s = 0;   // full run
  double iae_bis_min = 0; // full run
  double mdpe = 0, mdape = 0, wobble = 0, wobble_mdpe = 0; // PE window
  double tv = 0;          // full run
  double q_mg = 0;        // full run, delivered infusion
  double settling_time_min = 0; // first entry into target +/- 5; +inf if never
  double undershoot_depth = 0;  // max(0, target - min BIS)
  PhaseMetrics induction;
  PhaseMetrics maintenance;
};

struct MetricsOptions {
  /// PE-family window: maintenance only (default) or the whole run.
  bool pe_full_run = false;
  double settling_band = 5.0;
};

/// Metrics over t <= horizon on bis_measured; the coast tail is ignored.
MetricsReport evaluate(const SimTrace& trace, const MetricsOptions& opts = {});

struct MetricStat {
  std::string name;
  double mean = 0;
  double std = 0; // population standard deviation
  double worst = 0;
  int worst_patient = 0;
};

struct CohortSummary {
  std::vector<MetricsReport> reports;
  std::vector<MetricStat> stats;
  std::optional<double> nominal_iae_bis_s;
  std::optional<int> sensitive_patient;
};

/// Names and accessors of the summarized metrics, in table order.
const std::vector<std::string>& summary_metric_names();
double metric_value(const MetricsReport& r, const std::string& name);

CohortSummary summarize_cohort(const std::vector<MetricsReport>& reports);

} // namespace bisloop
