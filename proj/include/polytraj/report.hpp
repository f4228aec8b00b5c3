#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>

#include "polytraj/metrics.hpp"
#include "polytraj/studies.hpp"

namespace polytraj::eval {

/// One row per offset per method:
/// study,method,offset_frames,offset_s,ade_m,rmse_m,samples,skipped
void write_csv(std::ostream& os, const StudyReport& report, double frame_rate = 10.0);

/// Static line chart of ADE against offset, one polyline per method.
void write_svg(std::ostream& os, const StudyReport& report, double frame_rate = 10.0);

/// Writes <dir>/<name>_<fingerprint>.csv and .svg; returns the CSV path.
std::filesystem::path write_report_files(const std::filesystem::path& dir, const StudyReport& report,
                                         double frame_rate = 10.0);

/// Published RMSE (m) at 1..5 s for the polynomial and coordinate models and two
/// reference methods, in table column order.
struct ReferenceRow {
  int seconds;
  double coords;
  double poly;
  double cs_lstm_m;
  double mfp_1;
};
std::span<const ReferenceRow> reference_table();

/// Prints RMSE at 1..5 s in the reference table's row layout. Either report may
/// be null; missing entries print as "-".
void print_rmse_table(std::ostream& os, const EvalReport* coords, const EvalReport* poly, double frame_rate = 10.0);

}  // namespace polytraj::eval
