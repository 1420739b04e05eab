#include "lindyn/io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lindyn {

using ordered_json = nlohmann::ordered_json;

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw Error("write to " + path + " failed");
}

namespace {

void put_header(std::ostringstream& os, const std::string& header) { os << "# " << header << '\n'; }

void put_row(std::ostringstream& os, const std::vector<double>& row) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j) os << ',';
    os << format_real(row[j]);
  }
  os << '\n';
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// nlohmann writes NaN and infinities as null; keep them visible as strings instead.
ordered_json real(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

std::string trajectory_csv(const std::string& header, const TrajectoryRecord<double>& traj,
                           const std::vector<MetricsRow<double>>& metrics, int modes) {
  if (metrics.size() != traj.size()) throw ShapeError("metrics do not align with the trajectory");
  const bool with_steps = !traj.steps.empty();
  int k = 0;
  if (!traj.mode_values.empty()) k = std::min<int>(modes, static_cast<int>(traj.mode_values.front().size()));

  std::ostringstream os;
  put_header(os, header);
  if (with_steps) os << "step,";
  os << 't';
  for (int i = 1; i <= k; ++i) os << ",mode_" << i;
  os << ",sq_norm,nuclear_norm,rank,loss\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    if (with_steps) os << traj.steps[s] << ',';
    os << format_real(traj.times[s]);
    for (int i = 0; i < k; ++i) os << ',' << format_real(traj.mode_values[s](i));
    os << ',' << format_real(metrics[s].sq_frobenius) << ',' << format_real(metrics[s].nuclear_norm) << ','
       << metrics[s].effective_rank << ',' << format_real(traj.losses[s]) << '\n';
  }
  return os.str();
}

std::string table_csv(const std::string& header, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  put_header(os, header);
  for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << columns[j];
  os << '\n';
  for (const auto& r : rows) {
    if (r.size() != columns.size()) throw ShapeError("table row has the wrong number of columns");
    put_row(os, r);
  }
  return os.str();
}

std::string matrix_csv(const std::string& header, const Matrix<double>& m) {
  std::ostringstream os;
  put_header(os, header);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_real(m(i, j));
    os << '\n';
  }
  return os.str();
}

std::string assumption_json(const std::string& header, const AssumptionReport& rep,
                            const std::vector<std::pair<std::string, std::string>>& extra) {
  ordered_json j;
  j["command"] = header;
  for (const auto& [k, v] : extra) j[k] = v;
  j["delta_xy"] = real(rep.delta_xy);
  j["delta_x"] = real(rep.delta_x);
  j["r_xy"] = rep.r_xy;
  j["r_x"] = rep.r_x;
  j["epsilon"] = real(rep.epsilon);
  return dump(j);
}

std::string rrr_json(const std::string& header, const RRRSolution<double>& sol) {
  ordered_json j;
  j["command"] = header;
  j["k"] = sol.k;
  j["residual"] = real(sol.residual);
  j["rank"] = sol.rank;
  return dump(j);
}

std::string plateau_json(const std::string& header,
                         const std::vector<std::pair<std::string, PlateauReport>>& reports,
                         const std::vector<PlateauDistance<double>>& distances) {
  ordered_json j;
  j["command"] = header;
  ordered_json all = ordered_json::object();
  for (const auto& [name, rep] : reports) {
    ordered_json r;
    r["transition_times"] = ordered_json::array();
    for (double t : rep.transition_times) r["transition_times"].push_back(real(t));
    r["plateau_values"] = ordered_json::array();
    for (double v : rep.plateau_values) r["plateau_values"].push_back(real(v));
    r["plateau_windows"] = ordered_json::array();
    for (const auto& [a, b] : rep.plateau_windows) r["plateau_windows"].push_back({real(a), real(b)});
    r["abs_tol"] = real(rep.abs_tol);
    all[name] = r;
  }
  j["plateaus"] = all;
  if (!distances.empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : distances) {
      ordered_json e;
      e["k"] = d.k;
      e["t_mid"] = real(d.t_mid);
      e["t_sample"] = real(d.t_sample);
      e["distance"] = real(d.distance);
      e["reached"] = d.reached;
      arr.push_back(e);
    }
    j["rrr_distances"] = arr;
  }
  return dump(j);
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string svg_plot(const std::string& header, const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  const double width = 640, height = 420, left = 70, right = 150, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  auto tx = [&](double x) { return spec.log_x ? std::log10(x) : x; };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("plot series '" + s.label + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_x && !(s.x[i] > 0))) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<desc>" << xml_escape(header) << "</desc>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << xml_escape(spec.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks: decades on a log axis, five even steps otherwise.
  std::vector<double> xticks;
  if (spec.log_x) {
    for (double e = std::ceil(x0); e <= std::floor(x1) + 1e-12; e += 1) xticks.push_back(std::pow(10.0, e));
  } else {
    for (int i = 0; i <= 5; ++i) xticks.push_back(x0 + (x1 - x0) * i / 5);
  }
  for (double t : xticks) {
    const double x = px(t);
    os << "<line x1=\"" << fixed(x) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(x) << "\" y2=\""
       << top + ph + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << tick_label(t) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double v = y0 + (y1 - y0) * i / 5;
    const double y = py(v);
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(y) << "\" x2=\"" << left << "\" y2=\"" << fixed(y)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
       << tick_label(v) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << xml_escape(spec.x_label) << (spec.log_x ? " (log)" : "") << "</text>\n";
  os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\" "
     << "font-size=\"12\">" << xml_escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_x && !(s.x[i] > 0))) continue;
      os << (first ? "" : " ") << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 16 + 18 * k;
    os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 34 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << xml_escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lindyn
