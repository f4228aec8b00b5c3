#include "polytraj/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "polytraj/checkpoint.hpp"
#include "polytraj/errors.hpp"

namespace polytraj::eval {

void write_csv(std::ostream& os, const StudyReport& report, double frame_rate) {
  os << "study,method,offset_frames,offset_s,ade_m,rmse_m,samples,skipped\n";
  for (const auto& c : report.curves) {
    for (std::size_t k = 0; k < c.offsets.size(); ++k) {
      os << report.name << ',' << c.method << ',' << c.offsets[k] << ','
         << ad::format_double(c.offsets[k] / frame_rate) << ',' << ad::format_double(c.ade[k]) << ','
         << ad::format_double(c.rmse[k]) << ',' << c.samples << ',' << c.skipped << '\n';
    }
  }
}

void write_svg(std::ostream& os, const StudyReport& report, double frame_rate) {
  constexpr double width = 640, height = 400, left = 60, right = 150, top = 30, bottom = 50;
  constexpr std::array<const char*, 6> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double t_max = 0.0, e_max = 0.0;
  for (const auto& c : report.curves) {
    for (std::size_t k = 0; k < c.offsets.size(); ++k) {
      t_max = std::max(t_max, c.offsets[k] / frame_rate);
      e_max = std::max(e_max, c.ade[k]);
    }
  }
  if (t_max <= 0.0) t_max = 1.0;
  if (e_max <= 0.0) e_max = 1.0;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double t) { return left + pw * t / t_max; };
  auto py = [&](double e) { return top + ph * (1.0 - e / e_max); };

  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\" font-family=\"sans-serif\">" << report.name
    << " (" << report.fingerprint << ")</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = t_max * i / 4.0, e = e_max * i / 4.0;
    s << "<text x=\"" << px(t) << "\" y=\"" << top + ph + 18 << "\" font-size=\"11\" text-anchor=\"middle\">" << t
      << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << py(e) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << e
      << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10
    << "\" font-size=\"12\" text-anchor=\"middle\">offset (s)</text>\n";
  s << "<text x=\"14\" y=\"" << top + ph / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << top + ph / 2
    << ")\" text-anchor=\"middle\">ADE (m)</text>\n";
  for (std::size_t i = 0; i < report.curves.size(); ++i) {
    const auto& c = report.curves[i];
    const char* color = colors[i % colors.size()];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < c.offsets.size(); ++k) {
      s << (k ? " " : "") << px(c.offsets[k] / frame_rate) << ',' << py(c.ade[k]);
    }
    s << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(i);
    s << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << c.method << "</text>\n";
  }
  s << "</svg>\n";
  os << s.str();
}

std::filesystem::path write_report_files(const std::filesystem::path& dir, const StudyReport& report,
                                         double frame_rate) {
  const std::string stem = report.name + "_" + report.fingerprint;
  const auto csv = dir / (stem + ".csv");
  const auto svg = dir / (stem + ".svg");
  std::ofstream c(csv), v(svg);
  if (!c || !v) throw DataError("cannot write report files in " + dir.string());
  write_csv(c, report, frame_rate);
  write_svg(v, report, frame_rate);
  return csv;
}

std::span<const ReferenceRow> reference_table() {
  static constexpr std::array<ReferenceRow, 5> rows{{{1, 0.43, 0.55, 0.62, 0.54},
                                                     {2, 1.00, 0.93, 1.27, 1.16},
                                                     {3, 1.72, 1.64, 2.09, 1.90},
                                                     {4, 2.76, 2.64, 3.10, 2.78},
                                                     {5, 3.98, 3.85, 4.37, 3.83}}};
  return rows;
}

void print_rmse_table(std::ostream& os, const EvalReport* coords, const EvalReport* poly, double frame_rate) {
  auto cell = [&](const EvalReport* r, int seconds) -> std::string {
    if (!r) return "-";
    const int frames = static_cast<int>(std::lround(seconds * frame_rate));
    auto it = std::find(r->offsets.begin(), r->offsets.end(), frames);
    if (it == r->offsets.end()) return "-";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << r->rmse[static_cast<std::size_t>(it - r->offsets.begin())];
    return s.str();
  };
  os << std::left << std::setw(14) << "Offset (sec)" << std::setw(18) << "Coords baseline" << std::setw(14)
     << "Poly" << std::setw(14) << "CS-LSTM (M)" << std::setw(8) << "MFP-1" << '\n';
  for (const auto& row : reference_table()) {
    std::ostringstream ref1, ref2;
    ref1 << std::fixed << std::setprecision(2) << row.cs_lstm_m;
    ref2 << std::fixed << std::setprecision(2) << row.mfp_1;
    os << std::left << std::setw(14) << row.seconds << std::setw(18) << cell(coords, row.seconds) << std::setw(14)
       << cell(poly, row.seconds) << std::setw(14) << ref1.str() << std::setw(8) << ref2.str() << '\n';
  }
}

}  // namespace polytraj::eval
