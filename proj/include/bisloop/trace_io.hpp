// SPDX-License-Identifier: Apache-2.0
//
// Delimited-text trace files, cohort summaries and plot-data export. Every
// file opens with a '#' comment block that echoes the effective
// configuration and master seed.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bisloop/config_io.hpp"
#include "bisloop/metrics.hpp"
#include "bisloop/trace.hpp"

namespace bisloop {

/// Column names of a trace file, in order.
const std::vector<std::string>& trace_columns();

/// Metadata document embedded in the `# meta:` header line.
Json trace_meta(const SimTrace& trace);

void write_trace(std::ostream& os, const SimTrace& trace);
SimTrace read_trace(std::istream& is);

void write_trace_file(const std::filesystem::path& path, const SimTrace& trace);
SimTrace read_trace_file(const std::filesystem::path& path);

/// Run-level context echoed in summary and plot files.
struct RunContext {
  std::string scenario_name;
  std::uint64_t master_seed = 0;
  Json config; // controller (without the per-patient seed), engine, scenario
};

/// Context shared by a set of traces. Throws ConfigError if the traces
/// disagree on target BIS, scenario, controller or engine settings.
RunContext run_context(const std::vector<SimTrace>& traces);

/// Metric x patient table followed by mean, std and worst rows.
void write_summary_csv(std::ostream& os, const CohortSummary& summary, const RunContext& ctx);

Json metrics_json(const CohortSummary& summary, const RunContext& ctx);

/// Human-readable performance-index column (mean +/- std, or plain values
/// for a single trace).
std::string format_report_table(const CohortSummary& summary);

/// Wide-format files for plotting: one time column and one column per
/// patient. Returns the written paths.
std::vector<std::filesystem::path> write_plot_data(const std::filesystem::path& dir,
                                                   const std::vector<SimTrace>& traces,
                                                   const RunContext& ctx);

std::string trace_file_name(const std::string& scenario, int patient_id);
std::string summary_file_name(const std::string& scenario);
std::string metrics_file_name(const std::string& scenario);

} // namespace bisloop
