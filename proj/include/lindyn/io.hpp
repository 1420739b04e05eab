#ifndef LINDYN_IO_HPP
#define LINDYN_IO_HPP

#include "lindyn/analysis.hpp"
#include "lindyn/rrr.hpp"
#include "lindyn/spectral.hpp"
#include "lindyn/trajectory.hpp"

#include <string>
#include <vector>

namespace lindyn {

/// Shortest text that reads back to the same double ("%.17g").
std::string format_real(double v);

/// Writes `content` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& content);

/// Columns [step,] t, mode_1..mode_k, sq_norm, nuclear_norm, rank, loss. The step column is
/// present when the record carries steps; `modes` caps the number of mode columns.
std::string trajectory_csv(const std::string& header, const TrajectoryRecord<double>& traj,
                           const std::vector<MetricsRow<double>>& metrics, int modes);

/// Plain numeric table with a comment header and a column-name line.
std::string table_csv(const std::string& header, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows);

std::string matrix_csv(const std::string& header, const Matrix<double>& m);

// JSON documents carry the command line under "command", their first key.
std::string assumption_json(const std::string& header, const AssumptionReport& rep,
                            const std::vector<std::pair<std::string, std::string>>& extra = {});
std::string rrr_json(const std::string& header, const RRRSolution<double>& sol);
std::string plateau_json(const std::string& header,
                         const std::vector<std::pair<std::string, PlateauReport>>& reports,
                         const std::vector<PlateauDistance<double>>& distances = {});

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
};

/// Minimal SVG line plot. The command line goes in a <desc> element right after the root,
/// since XML comments cannot hold the "--" of flag names.
std::string svg_plot(const std::string& header, const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace lindyn

#endif  // LINDYN_IO_HPP
