// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include "bisloop/metrics.hpp"

using namespace bisloop;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SimTrace synthetic_trace(const std::vector<double>& bis, const std::vector<double>& u,
                         double induction_end, double horizon) {
  SimTrace t;
  t.patient.id = 4;
  t.scenario.horizon = horizon;
  t.scenario.induction_end = induction_end;
  t.scenario.target_bis = 50;
  t.controller.sample_period_s = 60; // one sample per minute keeps the arithmetic readable
  for (size_t i = 0; i < bis.size(); ++i) {
    TraceRecord r;
    r.t = static_cast<double>(i);
    r.bis_measured = bis[i];
    r.u = u[i];
    t.records.push_back(r);
  }
  return t;
}

} // namespace

TEST_CASE("IAE") {
  const std::vector<double> on(31, 50.0);
  CHECK(iae(on, 50.0, 1.0) == 0.0);
  const std::vector<double> off(6, 60.0);
  CHECK(iae(off, 50.0, 1.0) == 50.0); // 10 BIS over 5 min
  CHECK(iae(off, 50.0, 60.0) == 3000.0);
  CHECK(iae(std::vector<double>{70.0}, 50.0, 1.0) == 0.0);
  CHECK_THROWS(iae(std::vector<double>{}, 50.0, 1.0));
}

TEST_CASE("total variation") {
  CHECK(tv(std::vector<double>(9, 3.0)) == 0.0);
  CHECK(tv(std::vector<double>{0, 5, 3}) == 7.0);
  for (int n : {2, 5, 101}) {
    std::vector<double> ramp(n);
    for (int i = 0; i < n; ++i) ramp[i] = 10.0 * i / (n - 1);
    CHECK_THAT(tv(ramp), WithinAbs(10.0, 1e-12));
  }
  CHECK(tv(std::vector<double>{4.0}) == 0.0);
}

TEST_CASE("performance error family") {
  CHECK(pe_series(std::vector<double>{50, 55, 45}, 50) == std::vector<double>{0, 10, -10});

  const std::vector<double> zeros{0, 0, 0};
  CHECK(mdpe(zeros) == 0);
  CHECK(mdape(zeros) == 0);
  CHECK(wobble(zeros) == 0);

  const std::vector<double> pe{-2, 1, 3};
  CHECK(mdpe(pe) == 1);
  CHECK(mdape(pe) == 2);
  CHECK(wobble(pe) == 1);
  CHECK(wobble_mdpe(pe) == 2); // |-2-1|, |1-1|, |3-1| -> median 2

  const std::vector<double> one{5};
  CHECK(mdpe(one) == 5);
  CHECK(mdape(one) == 5);
  CHECK(wobble(one) == 0);

  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("administered drug") {
  CHECK(total_drug(std::vector<double>(50, 0.0), 1.0) == 0.0);
  // 20 min at 6 mg/min sampled each second: 1201 samples, the last one is not held
  CHECK_THAT(total_drug(std::vector<double>(1201, 6.0), 1.0 / 60), WithinRel(120.0, 1e-12));
}

TEST_CASE("random series against brute-force oracles") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 400);
  std::uniform_real_distribution<double> val(0.0, 100.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(static_cast<size_t>(len(rng)));
    for (auto& v : x) v = val(rng);
    REQUIRE(median(x) == sorted_median(x));

    double tv_ref = 0;
    for (size_t i = 1; i < x.size(); ++i) tv_ref += std::abs(x[i] - x[i - 1]);
    REQUIRE(tv(x) == tv_ref);

    long double iae_ref = 0;
    for (size_t i = 1; i < x.size(); ++i)
      iae_ref += (std::abs(50.0L - x[i - 1]) + std::abs(50.0L - x[i])) / 2;
    const double got = iae(x, 50.0, 1.0);
    REQUIRE(std::abs(got - static_cast<double>(iae_ref)) <= 1e-9 * std::max(1.0, got));
  }
}

TEST_CASE("evaluate splits phases and ignores the coast tail") {
  // minutes 0..4 induction, 5..10 maintenance, 11..12 coast
  std::vector<double> bis{95, 80, 60, 52, 50, 50, 55, 45, 50, 50, 50, 90, 95};
  std::vector<double> u{50, 50, 20, 10, 10, 10, 12, 8, 10, 10, 10, 0, 0};
  const auto r = evaluate(synthetic_trace(bis, u, 5.0, 10.0));
  CHECK_FALSE(r.induction.empty);
  CHECK_FALSE(r.maintenance.empty);
  // maintenance PE: 0,0,10,-10,0,0 -> MDPE 0, MDAPE 0
  CHECK(r.mdpe == 0.0);
  CHECK(r.mdape == 0.0);
  CHECK(r.settling_time_min == 3.0);
  CHECK(r.undershoot_depth == 5.0);
  const std::vector<double> within(bis.begin(), bis.begin() + 11);
  CHECK(r.iae_bis_min == iae(within, 50.0, 1.0));
  CHECK(r.iae_bis_s == iae(within, 50.0, 60.0));
  const std::vector<double> u_within(u.begin(), u.begin() + 11);
  CHECK(r.q_mg == total_drug(u_within, 1.0));

  const auto full = evaluate(synthetic_trace(bis, u, 5.0, 10.0), {.pe_full_run = true});
  CHECK(full.mdape > r.mdape);

  // induction-only run: PE falls back to the full run
  const auto ind = evaluate(synthetic_trace(bis, u, 10.0, 10.0));
  CHECK(ind.mdape == full.mdape);
}

TEST_CASE("never settling reports infinity") {
  const auto r = evaluate(synthetic_trace({90, 90, 90}, {0, 0, 0}, 2.0, 2.0));
  CHECK(std::isinf(r.settling_time_min));
}

TEST_CASE("cohort aggregation") {
  MetricsReport a, b;
  a.patient_id = 3;
  a.iae_bis_s = 100;
  a.mdpe = -7;
  b.patient_id = kNominalPatientId;
  b.iae_bis_s = 300;
  b.mdpe = 2;
  const auto s = summarize_cohort({a, b});
  const auto& iae_stat = s.stats.front();
  CHECK(iae_stat.name == "iae_bis_s");
  CHECK(iae_stat.mean == 200);
  CHECK(iae_stat.std == 100);
  CHECK(iae_stat.worst == 300);
  CHECK(iae_stat.worst_patient == kNominalPatientId);
  CHECK(s.nominal_iae_bis_s == 300);
  CHECK_FALSE(s.sensitive_patient);
  for (const auto& st : s.stats)
    if (st.name == "mdpe_pct") CHECK(st.worst == -7); // bias is judged by magnitude

  const auto same = summarize_cohort({a, a, a});
  for (const auto& st : same.stats) CHECK(st.std == 0.0);

  MetricsReport nine = a;
  nine.patient_id = kSensitivePatientId;
  CHECK(summarize_cohort({nine}).sensitive_patient == kSensitivePatientId);
  CHECK_THROWS(summarize_cohort({}));
}
