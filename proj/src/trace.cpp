#include "pama/trace.hpp"

#include <fmt/format.h>

#include <ostream>

namespace pama {

std::string trace_csv_header(bool with_diagnostics)
{
  std::string h = "k,objective,objective_hat,step_u,step_v,rel_change,rank,time_s,backtracks";
  if (with_diagnostics)
    h += "," + DiagnosticReport::csv_header();
  return h;
}

std::string trace_csv_row(const TraceRecord &rec, bool with_diagnostics, bool with_time)
{
  std::string row =
      fmt::format("{},{:.12g},{:.12g},{:.6e},{:.6e},{:.6e},{},{:.6f},{}", rec.k, rec.objective,
                  rec.objective_hat, rec.step_u, rec.step_v, rec.rel_change, rec.rank,
                  with_time ? rec.time_s : 0.0, rec.backtracks);
  if (with_diagnostics) {
    row += ',';
    row += rec.diagnostics ? rec.diagnostics->csv_row() : std::string(",,,,,");
  }
  return row;
}

void write_trace_csv(std::ostream &os, const std::vector<TraceRecord> &trace, bool with_time)
{
  bool diag = false;
  for (const auto &rec : trace)
    diag = diag || rec.diagnostics.has_value();
  os << trace_csv_header(diag) << '\n';
  for (const auto &rec : trace)
    os << trace_csv_row(rec, diag, with_time) << '\n';
}

} // namespace pama
