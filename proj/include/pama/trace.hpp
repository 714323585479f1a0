#pragma once

#include "pama/diagnostics.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pama {

// One row of a solver trace. PAMA and PALM share the schema so curves can be
// overlaid directly; columns that do not apply to a solver stay at zero.
struct TraceRecord
{
  int k = 0;
  double objective = 0.0;     // at the iterate the stopping rule watches
  double objective_hat = 0.0; // after the first block update of the iteration
  double step_u = 0.0;
  double step_v = 0.0;
  double rel_change = 0.0;    // ||X^k - X^{k-1}||_F / ||X^k||_F
  long rank = 0;
  double time_s = 0.0;        // cumulative solver wall time
  int backtracks = 0;         // line-search inflations (PALM only)
  std::optional<DiagnosticReport> diagnostics;
};

std::string trace_csv_header(bool with_diagnostics);
std::string trace_csv_row(const TraceRecord &rec, bool with_diagnostics, bool with_time = true);
void write_trace_csv(std::ostream &os, const std::vector<TraceRecord> &trace,
                     bool with_time = true);

} // namespace pama
