// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Usage: acceptance <ID|all> [--cli PATH] [--workdir DIR]
// Prints one "ID PASS|FAIL: ..." line per check; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bisloop/loop_engine.hpp"
#include "bisloop/metrics.hpp"
#include "bisloop/pkpd.hpp"

namespace fs = std::filesystem;
using namespace bisloop;

namespace {

std::string g_cli;
fs::path g_workdir = "acceptance_work";

bool report(const std::string& id, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", id.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  return ok;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Cached standard-scenario cohort, shared by the AC8 sub-checks.
const CohortResult& standard_cohort() {
  static const CohortResult res =
      run_cohort(ControllerConfig{}, *builtin_scenario("standard"), builtin_cohort(), 42);
  return res;
}

bool ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_exact = 0, worst_rk4 = 0;
  const double dt = 0.1 / 60.0;
  for (const auto& p : builtin_cohort()) {
    PkParams pk = derive_pk(p.demographics);
    pk.k10 = 0.0;
    const auto m = make_pk_model<double>(pk, p.hill);
    for (auto scheme : {StepScheme::exact, StepScheme::rk4}) {
      const auto tr = simulate_open_loop(m, [](double) { return 10.0; }, 20.0, scheme, dt);
      double& worst = scheme == StepScheme::exact ? worst_exact : worst_rk4;
      for (const auto& s : tr)
        if (s.administered > 0)
          worst = std::max(worst, std::abs(m.body_mass(s.state) - s.administered) / s.administered);
    }
  }
  const double elapsed = seconds_since(t0);
  return report("AC1", worst_exact < 1e-6 && worst_rk4 < 1e-4 && elapsed < 1.0,
                "mass balance rel. err exact " + fmt("%.2e", worst_exact) + " (< 1e-6), rk4 " +
                    fmt("%.2e", worst_rk4) + " (< 1e-4), " + fmt("%.3f", elapsed) + " s (< 1 s)");
}

bool ac2() {
  double max_re = -1e300;
  for (const auto& p : builtin_cohort()) {
    const auto m = make_pk_model<double>(p);
    const Eigen::Vector3cd ev = m.a.eigenvalues();
    max_re = std::max(max_re, ev.real().maxCoeff());
  }
  int flagged = 0;
  for (const auto& p : builtin_cohort()) {
    const auto pk = derive_pk(p.demographics, ParamMode::paper_literal);
    const bool warned = std::any_of(pk.warnings.begin(), pk.warnings.end(),
                                    [](const std::string& w) { return w.rfind("cl2 = ", 0) == 0; });
    if (pk.cl2 < 0 && warned) ++flagged;
  }
  return report("AC2", max_re < 0 && flagged == 13,
                "corrected: max Re(eig A) = " + fmt("%.3e", max_re) +
                    " over 13 patients; paper-literal: " + std::to_string(flagged) +
                    "/13 negative-clearance patients flagged");
}

bool ac3() {
  bool base = true, half = true, strict = true, nonincreasing = true;
  double worst_half = 0;
  const int n = 10000;
  for (const auto& p : builtin_cohort()) {
    const auto& h = p.hill;
    base &= bis_unclamped(h, 0.0) == h.e0;
    const double err = std::abs(bis_unclamped(h, h.ec50) - (h.e0 - h.emax / 2));
    worst_half = std::max(worst_half, err);
    half &= err <= 1e-12;
    // Strictness is checked on [EC50/10, 10 EC50]. Closer to zero the drug
    // effect of a steep patient (gamma ~ 7) drops below one ulp of E0.
    double prev = bis_unclamped(h, 0.0);
    for (int i = 0; i < n; ++i) {
      const double ce = h.ec50 * std::pow(10.0, -1.0 + 2.0 * i / (n - 1));
      const double v = bis_unclamped(h, ce);
      strict &= v < prev;
      prev = v;
    }
    prev = bis_unclamped(h, 0.0);
    for (int i = 1; i <= n; ++i) {
      const double v = bis_unclamped(h, 10.0 * h.ec50 * i / n);
      nonincreasing &= v <= prev;
      prev = v;
    }
  }
  return report("AC3", base && half && strict && nonincreasing,
                std::string("bis(0) == E0 ") + (base ? "yes" : "no") + "; |bis(EC50) - (E0 - Emax/2)| max " +
                    fmt("%.1e", worst_half) + "; strictly decreasing on a 1e4-point grid over [EC50/10, 10 EC50] " +
                    (strict ? "yes" : "no") + "; nonincreasing on a uniform 1e4-point grid over [0, 10 EC50] " +
                    (nonincreasing ? "yes" : "no"));
}

struct InductionStats {
  double entry_s = -1;     // first sample inside [45, 55]
  double min_bis = 1e300;  // whole run
  bool left_band = false;  // outside [40, 60] after entry
};

InductionStats induction_stats(const SimTrace& tr) {
  InductionStats s;
  for (const auto& r : tr.records) {
    const double b = r.bis_measured;
    s.min_bis = std::min(s.min_bis, b);
    if (s.entry_s < 0) {
      if (b >= 45 && b <= 55) s.entry_s = r.t * 60.0;
    } else if (b < 40 || b > 60) {
      s.left_band = true;
    }
  }
  return s;
}

bool ac4() {
  const auto spec = *builtin_scenario("induction");
  bool ok = true;
  double worst_entry = 0, min_bis = 1e300, slowest = 0;
  int fails = 0;
  // seed 42 is the reference run; the others guard against a lucky draw
  for (std::uint64_t seed : {42ULL, 1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run_cohort(ControllerConfig{}, spec, builtin_cohort(), seed);
    slowest = std::max(slowest, seconds_since(t0));
    if (!res.failures.empty() || res.traces.size() != 13) ok = false;
    for (const auto& tr : res.traces) {
      const auto s = induction_stats(tr);
      const bool pass = s.entry_s >= 0 && s.entry_s <= 240 && !s.left_band && s.min_bis >= 40;
      if (!pass) {
        ++fails;
        std::printf("  seed %llu patient %d: entry %.0f s, min BIS %.2f, left band %d\n",
                    static_cast<unsigned long long>(seed), tr.patient.id, s.entry_s, s.min_bis,
                    s.left_band);
      }
      worst_entry = std::max(worst_entry, s.entry_s < 0 ? 1e9 : s.entry_s);
      min_bis = std::min(min_bis, s.min_bis);
    }
  }
  ok = ok && fails == 0 && slowest < 5.0;
  return report("AC4", ok,
                "13 patients x 6 master seeds: latest band entry " + fmt("%.0f", worst_entry) +
                    " s (<= 240), min BIS " + fmt("%.2f", min_bis) + " (>= 40), " +
                    std::to_string(fails) + " failures, cohort runtime " + fmt("%.2f", slowest) +
                    " s (< 5 s)");
}

bool ac5() {
  size_t samples = 0, saturated = 0;
  bool ok = true;
  for (const auto& name : builtin_scenario_names()) {
    for (std::uint64_t seed : {42ULL, 7ULL, 1234ULL}) {
      const auto res = run_cohort(ControllerConfig{}, *builtin_scenario(name), builtin_cohort(), seed);
      for (const auto& tr : res.traces)
        for (const auto& r : tr.records) {
          ++samples;
          if (r.u_raw < 0 || r.u_raw > 50) ++saturated;
          ok &= r.u >= 0.0 && r.u <= 50.0;
        }
    }
  }
  return report("AC5", ok && saturated > 0,
                std::to_string(samples) + " infusion samples over 4 scenarios x 3 seeds x 13 patients all in [0, 50]; " +
                    std::to_string(saturated) + " raw outputs were clipped");
}

bool ac6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ue(-0.9, 0.9), ua(-2.0, 2.0), uu(0.0, 50.0);
  const MembershipSet<double> ms{0.5};
  double worst_fd = 0, worst_update = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double e = ue(rng);
    TskParams<double> alpha;
    for (int i = 0; i < 6; ++i) alpha.data()[i] = ua(rng);
    const auto grades = ms(e);
    const auto g = output_gradient(grades, e);
    for (int i = 0; i < 6; ++i) {
      const double h = 1e-5;
      TskParams<double> up = alpha, dn = alpha;
      up.data()[i] += h;
      dn.data()[i] -= h;
      const double fd = (tsk_output(up, grades, e) - tsk_output(dn, grades, e)) / (2 * h);
      const double scale = std::max(std::abs(g.data()[i]), 1e-3);
      worst_fd = std::max(worst_fd, std::abs(fd - g.data()[i]) / scale);
    }
    for (auto mode : {SignMode::paper, SignMode::physical}) {
      ControllerConfig cfg;
      cfg.sign_mode = mode;
      const double u = uu(rng);
      const double s = mode == SignMode::paper ? -1.0 : 1.0;
      const auto next = update_params(alpha, grades, e, e, u, cfg);
      for (int i = 0; i < 6; ++i) {
        const double expect = alpha.data()[i] - cfg.eta * (s * cfg.k * e + cfg.k_u * u) *
                                                    grades(i % 3) * (i < 3 ? e : 1.0) * cfg.sample_period_s;
        const double err = std::abs(next.data()[i] - expect) / std::max(1.0, std::abs(expect));
        worst_update = std::max(worst_update, err);
      }
    }
  }
  return report("AC6", worst_fd < 1e-6 && worst_update <= 4 * std::numeric_limits<double>::epsilon(),
                "finite-difference vs mu X^T max rel. err " + fmt("%.2e", worst_fd) +
                    " at 100 points (< 1e-6); update vs closed form max rel. err " +
                    fmt("%.2e", worst_update) + " (machine precision)");
}

// Recovery after one event: once BIS leaves [45, 55] after onset, it must
// be back inside before onset + 5 min.
bool recovered(const SimTrace& tr, const DisturbanceEvent& ev, double* worst_out_min) {
  const double ts = tr.sample_period_min();
  const auto n0 = static_cast<size_t>(std::llround(ev.start / ts));
  const auto n1 = std::min(tr.records.size() - 1, static_cast<size_t>(std::llround((ev.start + 5.0) / ts)));
  bool out = false;
  size_t left = 0;
  for (size_t i = n0; i <= n1; ++i) {
    const double b = tr.records[i].bis_disturbed;
    const bool in = b >= 45 && b <= 55;
    if (!out && !in) {
      out = true;
      left = i;
    }
    if (out && in) {
      *worst_out_min = std::max(*worst_out_min, static_cast<double>(i - left) * ts);
      return true;
    }
  }
  return !out;
}

bool ac7() {
  bool all = true;
  std::string detail;
  for (const char* name : {"standard", "standard-noisy"}) {
    const auto spec = *builtin_scenario(name);
    const auto res = run_cohort(ControllerConfig{}, spec, builtin_cohort(), 42);
    int misses = 0;
    double worst = 0;
    bool complete = res.failures.empty() && res.traces.size() == 13;
    for (const auto& tr : res.traces) {
      complete &= !tr.aborted && tr.records.size() == 3601;
      for (const auto& ev : spec.events)
        if (!recovered(tr, ev, &worst)) {
          ++misses;
          std::printf("  %s patient %d event %c not back in [45, 55] within 5 min\n", name,
                      tr.patient.id, ev.label);
        }
    }
    all &= complete && misses == 0;
    detail += std::string(detail.empty() ? "" : "; ") + name + ": " + std::to_string(13 * 8 - misses) +
              "/104 events recovered, longest excursion " + fmt("%.2f", worst) + " min, " +
              (complete ? "no divergence" : "INCOMPLETE RUN");
  }
  return report("AC7", all, detail);
}

bool ac8_iae() {
  const auto& s = standard_cohort().summary;
  const double v = s.nominal_iae_bis_s.value_or(NAN);
  return report("AC8-iae", v >= 1000 && v <= 5000,
                "nominal-patient IAE " + fmt("%.1f", v) + " BIS*s, band [1000, 5000], reference 2215.9");
}

bool ac8_q() {
  const auto& s = standard_cohort().summary;
  for (const auto& st : s.stats)
    if (st.name == "q_mg")
      return report("AC8-q", st.mean >= 60 && st.mean <= 320,
                    "cohort Q " + fmt("%.1f", st.mean) + " +/- " + fmt("%.1f", st.std) +
                        " mg, band [60, 320], reference 120.67 +/- 24.38");
  return report("AC8-q", false, "q_mg missing from summary");
}

bool ac8_pe(const char* id, const char* metric) {
  const auto& s = standard_cohort().summary;
  double worst = 0, mean = 0;
  for (const auto& r : s.reports) worst = std::max(worst, metric_value(r, metric));
  for (const auto& st : s.stats)
    if (st.name == metric) mean = st.mean;
  return report(id, worst < 5.0,
                std::string("maintenance ") + metric + " cohort mean " + fmt("%.2f", mean) +
                    ", worst patient " + fmt("%.2f", worst) + " (< 5)");
}

bool ac9() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(1, 500);
  std::normal_distribution<double> noise(0.0, 15.0);
  double worst_int = 0;
  bool exact = true;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> bis(static_cast<size_t>(len(rng)));
    std::vector<double> u(bis.size());
    for (auto& b : bis) b = std::clamp(50.0 + noise(rng), 0.0, 100.0);
    for (auto& x : u) x = std::clamp(20.0 + noise(rng), 0.0, 50.0);

    auto sorted_median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const size_t n = v.size();
      return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
    };
    const auto pe = pe_series(bis, 50.0);
    std::vector<double> ape, dev, devp;
    for (double p : pe) ape.push_back(std::abs(p));
    const double md = sorted_median(pe), mda = sorted_median(ape);
    for (double p : pe) dev.push_back(std::abs(p - mda));
    for (double p : pe) devp.push_back(std::abs(p - md));
    exact &= mdpe(pe) == md && mdape(pe) == mda && wobble(pe) == sorted_median(dev) &&
             wobble_mdpe(pe) == sorted_median(devp);

    double tv_ref = 0;
    for (size_t i = 1; i < u.size(); ++i) tv_ref += std::abs(u[i] - u[i - 1]);
    exact &= tv(u) == tv_ref;

    long double iae_ref = 0, q_ref = 0;
    for (size_t i = 1; i < bis.size(); ++i)
      iae_ref += 0.5L * (std::abs(50.0L - bis[i - 1]) + std::abs(50.0L - bis[i]));
    for (size_t i = 0; i + 1 < u.size(); ++i) q_ref += u[i];
    auto rel = [](double got, long double ref) {
      return std::abs(static_cast<long double>(got) - ref) / std::max(1.0L, std::abs(ref));
    };
    worst_int = std::max(worst_int, static_cast<double>(rel(iae(bis, 50.0, 1.0), iae_ref)));
    worst_int = std::max(worst_int, static_cast<double>(rel(total_drug(u, 1.0), q_ref)));
  }
  return report("AC9", exact && worst_int < 1e-9,
                std::string("1000 random series: medians/MDPE/MDAPE/WOBBLE/TV exact ") +
                    (exact ? "yes" : "no") + ", IAE/Q max rel. err " + fmt("%.1e", worst_int) + " (< 1e-9)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ac10() {
  if (g_cli.empty()) return report("AC10", false, "no --cli path given");
  const fs::path base = g_workdir / "ac10";
  fs::remove_all(base);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"a", "--jobs 1"}, {"b", "--jobs 1"}, {"c", "--jobs 4"}};
  for (const auto& [dir, jobs] : runs) {
    const std::string cmd = g_cli + " run --scenario standard-noisy --patients all --seed 42 -q " +
                            jobs + " --out " + (base / dir).string();
    if (std::system(cmd.c_str()) != 0) return report("AC10", false, "run failed: " + cmd);
  }
  size_t files = 0, same = 0;
  for (const auto& e : fs::directory_iterator(base / "a")) {
    ++files;
    const std::string ref = slurp(e.path());
    if (ref == slurp(base / "b" / e.path().filename()) && ref == slurp(base / "c" / e.path().filename()))
      ++same;
  }
  return report("AC10", files == 15 && same == files,
                std::to_string(same) + "/" + std::to_string(files) +
                    " output files byte-identical across two serial runs and one --jobs 4 run");
}

bool ac11() {
  const auto& p = *find_patient(kNominalPatientId);
  ControllerConfig cfg;
  cfg.seed = patient_seed(42, p.id);
  const auto spec = *builtin_scenario("standard");
  EngineOptions exact, rk4;
  rk4.scheme = StepScheme::rk4;
  const auto a = run(p, cfg, spec, exact);
  const auto b = run(p, cfg, spec, rk4);
  if (a.records.size() != b.records.size() || a.aborted || b.aborted)
    return report("AC11", false, "runs differ in length or aborted");
  double worst = 0;
  for (size_t i = 0; i < a.records.size(); ++i)
    worst = std::max(worst, std::abs(a.records[i].bis_measured - b.records[i].bis_measured));
  return report("AC11", worst < 1e-4,
                "nominal patient, 60 min closed loop: max |BIS exact - BIS rk4| = " + fmt("%.2e", worst) +
                    " (< 1e-4)");
}

} // namespace

int main(int argc, char** argv) {
  std::vector<std::string> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) g_cli = argv[++i];
    else if (a == "--workdir" && i + 1 < argc) g_workdir = argv[++i];
    else ids.push_back(a);
  }
  const std::vector<std::pair<std::string, std::function<bool()>>> checks = {
      {"AC1", ac1},
      {"AC2", ac2},
      {"AC3", ac3},
      {"AC4", ac4},
      {"AC5", ac5},
      {"AC6", ac6},
      {"AC7", ac7},
      {"AC8-iae", ac8_iae},
      {"AC8-q", ac8_q},
      {"AC8-mdape", [] { return ac8_pe("AC8-mdape", "mdape_pct"); }},
      {"AC8-wobble", [] { return ac8_pe("AC8-wobble", "wobble_pct"); }},
      {"AC9", ac9},
      {"AC10", ac10},
      {"AC11", ac11},
  };
  if (ids.empty() || (ids.size() == 1 && ids[0] == "all")) {
    ids.clear();
    for (const auto& c : checks) ids.push_back(c.first);
  }
  fs::create_directories(g_workdir);
  bool ok = true;
  for (const auto& id : ids) {
    auto it = std::find_if(checks.begin(), checks.end(), [&](const auto& c) { return c.first == id; });
    if (it == checks.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
    ok &= it->second();
  }
  return ok ? 0 : 1;
}
