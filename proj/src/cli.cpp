#include "lindyn/cli.hpp"

#include "lindyn/analysis.hpp"
#include "lindyn/continuous.hpp"
#include "lindyn/datasets.hpp"
#include "lindyn/discrete.hpp"
#include "lindyn/io.hpp"
#include "lindyn/rrr.hpp"
#include "lindyn/spectral.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace lindyn::cli {

namespace {

enum class Kind { Real, RealOrAuto, Int, IntOrAuto, RealList, Path, Choice, Text };

struct FlagSpec {
  std::string name;
  std::string default_value;
  Kind kind;
  std::string help;
  std::vector<std::string> choices = {};
  bool required = false;
};

struct VerbSpec {
  std::string name;
  std::string summary;
  std::vector<FlagSpec> flags;
};

bool parse_real(const std::string& s, double& v) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  return !s.empty() && res.ec == std::errc() && res.ptr == last && std::isfinite(v);
}

bool parse_integer(const std::string& s, long& v) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size() && v >= 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) out.push_back(item);
  return out;
}

std::vector<FlagSpec> data_flags(bool required) {
  return {
      {"x", "", Kind::Path, "features file (CSV, or IDX images)", {}, required},
      {"labels", "", Kind::Path, "targets file; one-hot encoded when --classes > 0, else used as is"},
      {"classes", "0", Kind::Int, "number of classes for one-hot targets (0: raw targets)"},
      {"format", "auto", Kind::Choice, "features file format", {"auto", "csv", "idx"}},
  };
}

std::vector<FlagSpec> synthetic_flags() {
  return {
      {"n", "1000", Kind::Int, "synthetic sample count (used without --x)"},
      {"noise", "0.001", Kind::Real, "synthetic noise scale (used without --x)"},
  };
}

template <typename... Parts>
std::vector<FlagSpec> concat(Parts&&... parts) {
  std::vector<FlagSpec> out;
  (out.insert(out.end(), parts.begin(), parts.end()), ...);
  return out;
}

const std::vector<VerbSpec>& verb_specs() {
  static const std::vector<VerbSpec> specs = {
      {"diagnose", "commutativity diagnostics and joint spectrum of a dataset",
       concat(data_flags(true), std::vector<FlagSpec>{{"rank-tol", "1e-10", Kind::Real, "relative rank tolerance"}})},
      {"simulate", "discrete or continuous training run with trajectory metrics and plateau report",
       concat(data_flags(false), synthetic_flags(),
              std::vector<FlagSpec>{
                  {"dynamics", "discrete", Kind::Choice, "gradient descent or RK4 gradient flow",
                   {"discrete", "continuous"}},
                  {"depth", "2", Kind::Int, "number of layers L"},
                  {"width", "auto", Kind::IntOrAuto, "hidden width (auto: min(d, p))"},
                  {"delta", "10", Kind::Real, "initialization scale exponent; product starts at exp(-2 delta)"},
                  {"modes", "auto", Kind::IntOrAuto, "modes tracked (auto: sigma_i > 1e-4 sigma_1)"},
                  {"eta", "auto", Kind::RealOrAuto, "step-size (auto: half the step-size gate minimum)"},
                  {"steps", "auto", Kind::IntOrAuto, "descent steps (auto: 2 delta / (eta sigma_modes))"},
                  {"horizon", "auto", Kind::RealOrAuto, "flow horizon (auto: 2 delta / sigma_modes)"},
                  {"dt", "auto", Kind::RealOrAuto, "RK4 step (auto: 0.05 / sigma_1)"},
                  {"stride", "auto", Kind::IntOrAuto, "record every this many steps (auto: about 2000 records)"},
                  {"rank-tol", "0.001", Kind::Real, "effective rank threshold relative to the largest singular value"},
                  {"flatness-tol", "0.01", Kind::Real, "plateau flatness relative to the series range"},
              })},
      {"closed-form", "per-mode closed forms; with --eta the discrete recursion and its envelope",
       {
           {"sigma", "0.1,0.01,0.001", Kind::RealList, "comma-separated singular values"},
           {"lambda", "1", Kind::RealList, "comma-separated lambda_i (one value is broadcast)"},
           {"delta", "10", Kind::Real, "initialization exponent; w0 = exp(-2 delta)"},
           {"eta", "none", Kind::RealOrAuto, "step-size for the discrete recursion (none: continuous)"},
           {"t-max", "auto", Kind::RealOrAuto, "continuous horizon (auto: 2 delta / sigma_min)"},
           {"points", "1001", Kind::Int, "continuous grid points"},
           {"steps", "auto", Kind::IntOrAuto, "discrete steps (auto: 2 delta / (eta sigma_min))"},
       }},
      {"rrr", "reduced-rank regression solution",
       concat(data_flags(false), synthetic_flags(),
              std::vector<FlagSpec>{{"k", "1", Kind::Int, "rank constraint"}})},
      {"figure1", "closed-form squared norms for L = 1 and L = 2 on a three-mode design",
       {
           {"delta", "30", Kind::Real, "initialization exponent"},
           {"covariance", "autoencoder", Kind::Choice,
            "autoencoder: Sigma_x = Sigma_xy; identity: Sigma_x = I", {"autoencoder", "identity"}},
           {"t-min", "1", Kind::Real, "first rescaled time"},
           {"t-max", "10000", Kind::Real, "last rescaled time"},
           {"points", "2000", Kind::Int, "log-spaced grid points"},
       }},
      {"figure2", "trace norm and reconstruction error of L = 1 and L = 2 descent on synthetic data",
       concat(synthetic_flags(),
              std::vector<FlagSpec>{
                  {"delta", "10", Kind::Real, "initialization exponent"},
                  {"eta", "auto", Kind::RealOrAuto, "step-size (auto: half the gate minimum)"},
                  {"steps", "auto", Kind::IntOrAuto, "descent steps (auto: 2 delta / (eta sigma_5))"},
                  {"stride", "auto", Kind::IntOrAuto, "record stride (auto: about 2000 records)"},
              })},
      {"table1", "Delta_xy and Delta_x report for a dataset",
       concat(data_flags(true),
              std::vector<FlagSpec>{{"name", "dataset", Kind::Text, "dataset label in the report"},
                                    {"rank-tol", "1e-10", Kind::Real, "relative rank tolerance"}})},
  };
  return specs;
}

const VerbSpec* find_verb(const std::string& name) {
  for (const auto& v : verb_specs())
    if (v.name == name) return &v;
  return nullptr;
}

CLI::Validator validator_for(const FlagSpec& f) {
  const Kind kind = f.kind;
  const std::string name = f.name;  // copied into the closure
  return CLI::Validator(
      [kind](std::string& s) -> std::string {
        double r = 0;
        long i = 0;
        switch (kind) {
          case Kind::Real:
            return parse_real(s, r) ? "" : "not a finite number: '" + s + "'";
          case Kind::RealOrAuto:
            return (s == "auto" || s == "none" || parse_real(s, r)) ? "" : "not a number or 'auto': '" + s + "'";
          case Kind::Int:
            return parse_integer(s, i) ? "" : "not a nonnegative integer: '" + s + "'";
          case Kind::IntOrAuto:
            return (s == "auto" || parse_integer(s, i)) ? "" : "not an integer or 'auto': '" + s + "'";
          case Kind::RealList:
            for (const auto& item : split_list(s))
              if (!parse_real(item, r)) return "not a comma-separated list of numbers: '" + s + "'";
            return s.empty() ? "empty list" : "";
          case Kind::Path:
            if (!s.empty() && !std::filesystem::is_regular_file(s)) return "file not found: " + s;
            return "";
          case Kind::Choice:
          case Kind::Text:
            return "";
        }
        return "";
      },
      "", name);
}

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  return std::any_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\\' || c == '#'; });
}

std::string quote(const std::string& s) {
  if (!needs_quotes(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::vector<int> widths_for(Eigen::Index d, Eigen::Index p, int depth, int width) {
  if (depth < 1) throw UsageError("--depth must be at least 1");
  std::vector<int> w{static_cast<int>(d)};
  for (int l = 1; l < depth; ++l) w.push_back(width);
  w.push_back(static_cast<int>(p));
  return w;
}

struct Dataset {
  DataMatrixPair<double> data;
  std::string source;
  std::optional<Matrix<double>> signal;  ///< B D B^T for synthetic data
};

Dataset load_dataset(const Command& c, bool allow_synthetic) {
  Dataset out;
  const std::string& x = c.get("x");
  if (x.empty()) {
    if (!allow_synthetic) throw UsageError("--x is required");
    SyntheticSpec spec;
    spec.n = static_cast<int>(c.integer("n"));
    spec.noise_scale = c.real("noise");
    spec.seed = c.seed();
    auto syn = generate_synthetic<double>(spec);
    out.signal = syn.signal_covariance();
    out.data = std::move(syn.data);
    out.source = "synthetic";
    return out;
  }
  FileFormat fmt;
  if (c.is("format", "auto")) {
    try {
      fmt = format_from_path(x);
    } catch (const ParseError& e) {
      throw UsageError(std::string("--x: ") + e.what() + " (pass --format)");
    }
  } else {
    fmt = c.is("format", "csv") ? FileFormat::Csv : FileFormat::Idx;
  }
  const std::string& labels = c.get("labels");
  const long classes = c.integer("classes");
  if (classes > 0 && labels.empty()) throw UsageError("--classes needs --labels");
  const TargetEncoding enc = classes > 0 ? TargetEncoding::one_hot(static_cast<int>(classes)) : TargetEncoding::raw();
  out.data = ingest_dataset(x, fmt, labels.empty() ? std::nullopt : std::optional<std::string>(labels), enc);
  out.source = x;
  return out;
}

std::string path_in(const Command& c, const std::string& file) {
  return (std::filesystem::path(c.out_dir) / file).string();
}

std::string shape_text(const DataMatrixPair<double>& d) {
  return "n=" + std::to_string(d.n()) + " d=" + std::to_string(d.d()) + " p=" + std::to_string(d.p());
}

std::vector<double> top_sigmas(const JointSpectrum<double>& js, int k) {
  std::vector<double> s;
  for (int i = 0; i < k; ++i) s.push_back(js.sigma(i));
  return s;
}

double gate_eta(const std::vector<double>& sigmas) {
  try {
    const auto gate = stepsize_gate(sigmas, 0.0);
    double lo = INFINITY;
    for (const auto& b : gate.bounds) lo = std::min(lo, b.bound);
    return 0.5 * lo;
  } catch (const DomainError&) {
    return 0.25 / sigmas.front();
  }
}

void warn_gate(const std::vector<double>& sigmas, double eta, std::ostream& err) {
  try {
    const auto gate = stepsize_gate(sigmas, eta);
    if (!gate.pass) {
      for (const auto& b : gate.bounds)
        if (b.margin <= 0)
          err << "lindyn: warning: eta=" << format_real(eta) << " violates " << b.name << " (mode " << b.index + 1
              << ", bound " << format_real(b.bound) << ")\n";
    }
  } catch (const DomainError& e) {
    err << "lindyn: warning: step-size gate not applicable: " << e.what() << '\n';
  }
}

long auto_stride(long steps) { return std::max(1L, steps / 2000); }

std::vector<double> log_grid(double a, double b, long n) {
  std::vector<double> t(n);
  for (long i = 0; i < n; ++i) t[i] = n == 1 ? a : a * std::pow(b / a, double(i) / double(n - 1));
  return t;
}

std::vector<double> series_of(const std::vector<MetricsRow<double>>& rows, double MetricsRow<double>::*field) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.*field);
  return out;
}

// --- verbs -----------------------------------------------------------------

int run_diagnose(Command c, std::ostream& out) {
  const auto ds = load_dataset(c, false);
  const double tol = c.real("rank-tol");
  const auto rep = assumption_metrics(ds.data, tol);
  const auto js = joint_decompose(compute_moments(ds.data), tol);
  const std::string h = c.header();
  write_text_file(path_in(c, "diagnose.json"), assumption_json(h, rep, {{"source", ds.source}, {"shape", shape_text(ds.data)}}));
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < js.r_xy; ++i) rows.push_back({double(i + 1), js.sigma(i), js.lambda(i)});
  write_text_file(path_in(c, "spectrum.csv"), table_csv(h, {"i", "sigma", "lambda"}, rows));
  out << "delta_xy " << format_real(rep.delta_xy) << "\ndelta_x " << format_real(rep.delta_x) << "\nr_xy "
      << rep.r_xy << "\nr_x " << rep.r_x << "\nepsilon " << format_real(rep.epsilon) << '\n';
  return 0;
}

int run_table1(Command c, std::ostream& out) {
  const auto ds = load_dataset(c, false);
  const auto rep = assumption_metrics(ds.data, c.real("rank-tol"));
  write_text_file(path_in(c, "table1.json"),
                  assumption_json(c.header(), rep,
                                  {{"name", c.get("name")}, {"source", ds.source}, {"shape", shape_text(ds.data)}}));
  out << c.get("name") << ": delta_xy " << format_real(rep.delta_xy) << ", delta_x " << format_real(rep.delta_x)
      << '\n';
  return 0;
}

int run_simulate(Command c, std::ostream& out, std::ostream& err) {
  const auto ds = load_dataset(c, true);
  const auto m = compute_moments(ds.data);
  const auto js = joint_decompose(m);
  if (js.r_xy == 0) throw DomainError("Sigma_xy is zero; nothing to learn");
  int modes = 0;
  if (c.is("modes", "auto")) {
    while (modes < js.r_xy && js.sigma(modes) > 1e-4 * js.sigma(0)) ++modes;
    c.set("modes", std::to_string(modes));
  } else {
    modes = static_cast<int>(std::min<long>(c.integer("modes"), js.r_xy));
    if (modes < 1) throw UsageError("--modes must be at least 1");
  }
  if (c.is("width", "auto")) c.set("width", std::to_string(std::min(m.d(), m.p())));
  const auto widths = widths_for(m.d(), m.p(), static_cast<int>(c.integer("depth")), static_cast<int>(c.integer("width")));
  const double delta = c.real("delta");
  const auto sig = top_sigmas(js, modes);
  const bool discrete = c.is("dynamics", "discrete");
  // Flags of the other dynamics do not apply; record them as such.
  if (discrete) {
    c.set("horizon", "auto");
    c.set("dt", "auto");
  } else {
    c.set("eta", "auto");
    c.set("steps", "auto");
  }

  TrajectoryRecord<double> rec;
  if (discrete) {
    if (c.is("eta", "auto")) c.set("eta", format_real(gate_eta(sig)));
    const double eta = c.real("eta");
    warn_gate(sig, eta, err);
    if (c.is("steps", "auto")) c.set("steps", std::to_string(static_cast<long>(std::ceil(2 * delta / (eta * sig.back())))));
    const long steps = c.integer("steps");
    if (c.is("stride", "auto")) c.set("stride", std::to_string(auto_stride(steps)));
    GDConfig<double> cfg;
    cfg.widths = widths;
    cfg.init = Thm1Init<double>{delta, {}};
    cfg.eta = eta;
    cfg.steps = steps;
    cfg.record_stride = std::max(1L, c.integer("stride"));
    rec = run_gd(m, cfg, &js);
  } else {
    if (c.is("horizon", "auto")) c.set("horizon", format_real(2 * delta / sig.back()));
    if (c.is("dt", "auto")) c.set("dt", format_real(0.05 / sig.front()));
    const double horizon = c.real("horizon"), dt = c.real("dt");
    if (c.is("stride", "auto")) c.set("stride", std::to_string(auto_stride(static_cast<long>(horizon / dt))));
    FlowConfig<double> cfg;
    cfg.widths = widths;
    cfg.init = Thm1Init<double>{delta, {}};
    cfg.horizon = horizon;
    cfg.step = dt;
    cfg.record_every = std::max(1L, c.integer("stride"));
    rec = integrate_flow(m, cfg, &js);
  }

  MetricsOptions<double> mopt;
  mopt.rank_tol = c.real("rank-tol");
  const auto metrics = trajectory_metrics(rec, mopt);
  const std::string h = c.header();
  write_text_file(path_in(c, "trajectory.csv"), trajectory_csv(h, rec, metrics, modes));
  PlateauOptions popt;
  popt.flatness_tol = c.real("flatness-tol");
  const auto plateaus = detect_plateaus(series_of(metrics, &MetricsRow<double>::time),
                                        series_of(metrics, &MetricsRow<double>::sq_frobenius), popt);
  const auto dist = compare_plateaus_to_rrr(rec, js, m, delta, modes);
  write_text_file(path_in(c, "plateaus.json"), plateau_json(h, {{"sq_norm", plateaus}}, dist));
  out << "records " << rec.size() << ", plateaus " << plateaus.size() << ", final sq_norm "
      << format_real(metrics.back().sq_frobenius) << '\n';
  if (rec.halted) {
    err << "lindyn: error: non-finite values after t=" << format_real(rec.last_valid_time)
        << "; trajectory truncated\n";
    return 1;
  }
  return 0;
}

int run_closed_form(Command c, std::ostream& out, std::ostream& err) {
  const auto sig = c.reals("sigma");
  auto lam = c.reals("lambda");
  if (lam.size() == 1) lam.assign(sig.size(), lam.front());
  if (lam.size() != sig.size()) throw UsageError("--lambda needs one value or as many as --sigma");
  const double delta = c.real("delta");
  const double w0 = std::exp(-2 * delta);
  const double smin = *std::min_element(sig.begin(), sig.end());
  const std::size_t k = sig.size();
  std::vector<std::string> cols;
  std::vector<std::vector<double>> rows;

  if (c.is("eta", "none") || c.is("eta", "auto")) {
    c.set("eta", "none");
    c.set("steps", "auto");
    if (c.is("t-max", "auto")) c.set("t-max", format_real(2 * delta / smin));
    const double tmax = c.real("t-max");
    const long points = c.integer("points");
    if (points < 2) throw UsageError("--points must be at least 2");
    cols = {"t"};
    for (std::size_t i = 1; i <= k; ++i) cols.push_back("mode_" + std::to_string(i));
    cols.push_back("sq_norm");
    for (long s = 0; s < points; ++s) {
      const double t = tmax * double(s) / double(points - 1);
      std::vector<double> row{t};
      double sq = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const double w = closed_form_mode(ModeParams{sig[i], lam[i], w0, delta}, t);
        row.push_back(w);
        sq += w * w;
      }
      row.push_back(sq);
      rows.push_back(std::move(row));
    }
  } else {
    c.set("t-max", "auto");
    const double eta = c.real("eta");
    if (sig.size() > 1) warn_gate(sig, eta, err);
    if (c.is("steps", "auto")) c.set("steps", std::to_string(static_cast<long>(std::ceil(2 * delta / (eta * smin)))));
    const long steps = c.integer("steps");
    std::vector<ModeTrace> traces;
    std::vector<Envelope> envs;
    for (std::size_t i = 0; i < k; ++i) {
      traces.push_back(mode_recursion(sig[i], lam[i], w0, eta, steps));
      envs.push_back(thm3_envelope(sig[i], lam[i], w0, eta, steps));
    }
    cols = {"step", "t"};
    for (std::size_t i = 1; i <= k; ++i) {
      cols.push_back("mode_" + std::to_string(i));
      cols.push_back("lower_" + std::to_string(i));
      cols.push_back("upper_" + std::to_string(i));
    }
    for (long s = 0; s <= steps; ++s) {
      std::vector<double> row{double(s), double(s) * eta};
      for (std::size_t i = 0; i < k; ++i) {
        row.push_back(traces[i].w[s]);
        row.push_back(envs[i].lower[s]);
        row.push_back(envs[i].upper[s]);
      }
      rows.push_back(std::move(row));
    }
  }
  write_text_file(path_in(c, "closed_form.csv"), table_csv(c.header(), cols, rows));
  out << "rows " << rows.size() << '\n';
  return 0;
}

int run_rrr(Command c, std::ostream& out) {
  const auto ds = load_dataset(c, true);
  const auto m = compute_moments(ds.data);
  const long k = c.integer("k");
  if (k < 1) throw UsageError("--k must be at least 1");
  const auto sol = rrr_solve(m, static_cast<int>(k));
  const std::string h = c.header();
  write_text_file(path_in(c, "rrr.csv"), matrix_csv(h, sol.w));
  write_text_file(path_in(c, "rrr.json"), rrr_json(h, sol));
  out << "k " << sol.k << ", rank " << sol.rank << ", residual " << format_real(sol.residual) << '\n';
  return 0;
}

int run_figure1(Command c, std::ostream& out) {
  const double delta = c.real("delta");
  const double t0 = c.real("t-min"), t1 = c.real("t-max");
  if (!(t0 > 0 && t1 > t0)) throw UsageError("need 0 < --t-min < --t-max");
  const long points = c.integer("points");
  if (points < 2) throw UsageError("--points must be at least 2");
  const bool autoenc = c.is("covariance", "autoencoder");
  const double sig[3] = {0.1, 0.01, 0.001};
  MomentPair<double> m{Matrix<double>::Identity(3, 3), Matrix<double>::Zero(3, 3)};
  for (int i = 0; i < 3; ++i) m.sigma_xy(i, i) = sig[i];
  if (autoenc) m.sigma_x = m.sigma_xy;
  const Matrix<double> w0 = std::exp(-2 * delta) * Matrix<double>::Identity(3, 3);

  const auto t = log_grid(t0, t1, points);
  std::vector<double> l1, l2;
  std::vector<std::vector<double>> rows;
  for (double s : t) {
    const double a = closed_form_linear(m, w0, delta * s).squaredNorm();
    double b = 0;
    for (int i = 0; i < 3; ++i) {
      const double w = closed_form_mode(ModeParams::from_delta(sig[i], m.sigma_x(i, i), delta), delta * s);
      b += w * w;
    }
    l1.push_back(a);
    l2.push_back(b);
    rows.push_back({s, a, b});
  }
  const std::string h = c.header();
  write_text_file(path_in(c, "fig1.csv"), table_csv(h, {"t", "sqnorm_L1", "sqnorm_L2"}, rows));
  write_text_file(path_in(c, "fig1.svg"),
                  svg_plot(h, {"squared norm of W(delta t)", "t", "squared Frobenius norm", true},
                           {{"L=1", t, l1}, {"L=2", t, l2}}));
  const auto p1 = detect_plateaus(t, l1), p2 = detect_plateaus(t, l2);
  write_text_file(path_in(c, "fig1_plateaus.json"), plateau_json(h, {{"sqnorm_L1", p1}, {"sqnorm_L2", p2}}));
  out << "L=2 plateaus";
  for (double v : p2.plateau_values) out << ' ' << format_real(v);
  out << "\nL=2 transitions";
  for (double v : p2.transition_times) out << ' ' << format_real(v);
  out << "\nL=1 plateaus " << p1.size() << '\n';
  return 0;
}

int run_figure2(Command c, std::ostream& out, std::ostream& err) {
  SyntheticSpec spec;
  spec.n = static_cast<int>(c.integer("n"));
  spec.noise_scale = c.real("noise");
  spec.seed = c.seed();
  const auto syn = generate_synthetic<double>(spec);
  const auto m = compute_moments(syn.data);
  const auto js = joint_decompose(m);
  const int r = std::min(spec.r, js.r_xy);
  const auto sig = top_sigmas(js, r);
  const double delta = c.real("delta");
  if (c.is("eta", "auto")) c.set("eta", format_real(gate_eta(sig)));
  const double eta = c.real("eta");
  warn_gate(sig, eta, err);
  if (c.is("steps", "auto")) c.set("steps", std::to_string(static_cast<long>(std::ceil(2 * delta / (eta * sig.back())))));
  const long steps = c.integer("steps");
  if (c.is("stride", "auto")) c.set("stride", std::to_string(auto_stride(steps)));

  GDConfig<double> cfg;
  cfg.init = Thm1Init<double>{delta, {}};
  cfg.eta = eta;
  cfg.steps = steps;
  cfg.record_stride = std::max(1L, c.integer("stride"));
  cfg.widths = {spec.d, spec.p};
  const auto one = run_gd(m, cfg, &js);
  cfg.widths = {spec.d, spec.d, spec.p};
  const auto two = run_gd(m, cfg, &js);

  const Matrix<double> target = syn.signal_covariance();
  MetricsOptions<double> mopt;
  mopt.target = &target;
  const auto m1 = trajectory_metrics(one, mopt), m2 = trajectory_metrics(two, mopt);
  std::vector<std::vector<double>> rows;
  std::vector<double> t, tr1, tr2, re1, re2;
  for (std::size_t i = 0; i < std::min(m1.size(), m2.size()); ++i) {
    rows.push_back({double(one.steps[i]), one.times[i], m1[i].nuclear_norm, m2[i].nuclear_norm,
                    *m1[i].reconstruction_error, *m2[i].reconstruction_error});
    t.push_back(double(one.steps[i]));
    tr1.push_back(m1[i].nuclear_norm);
    tr2.push_back(m2[i].nuclear_norm);
    re1.push_back(*m1[i].reconstruction_error);
    re2.push_back(*m2[i].reconstruction_error);
  }
  const std::string h = c.header();
  write_text_file(path_in(c, "fig2.csv"),
                  table_csv(h, {"step", "t", "trace_L1", "trace_L2", "recon_L1", "recon_L2"}, rows));
  // Step 0 has no place on a log axis and is dropped by the plot.
  write_text_file(path_in(c, "fig2_trace.svg"),
                  svg_plot(h, {"trace norm", "iteration", "nuclear norm", true}, {{"L=1", t, tr1}, {"L=2", t, tr2}}));
  write_text_file(path_in(c, "fig2_recon.svg"),
                  svg_plot(h, {"reconstruction error", "iteration", "|W - B D B^T|_F", true},
                           {{"L=1", t, re1}, {"L=2", t, re2}}));
  out << "steps " << steps << ", eta " << format_real(eta) << ", final trace L1 " << format_real(tr1.back())
      << ", L2 " << format_real(tr2.back()) << '\n';
  if (one.halted || two.halted) {
    err << "lindyn: error: descent produced non-finite values; curves truncated\n";
    return 1;
  }
  return 0;
}

}  // namespace

std::uint64_t Command::seed() const { return static_cast<std::uint64_t>(integer("seed")); }

const std::string& Command::get(const std::string& name) const {
  for (const auto& [k, v] : flags)
    if (k == name) return v;
  throw Error("internal: verb " + verb + " has no flag --" + name);
}

void Command::set(const std::string& name, const std::string& value) {
  for (auto& [k, v] : flags)
    if (k == name) {
      v = value;
      return;
    }
  throw Error("internal: verb " + verb + " has no flag --" + name);
}

double Command::real(const std::string& name) const {
  double v = 0;
  if (!parse_real(get(name), v)) throw UsageError("--" + name + ": not a number: '" + get(name) + "'");
  return v;
}

long Command::integer(const std::string& name) const {
  long v = 0;
  if (!parse_integer(get(name), v)) throw UsageError("--" + name + ": not a nonnegative integer: '" + get(name) + "'");
  return v;
}

std::vector<double> Command::reals(const std::string& name) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(name))) {
    double v = 0;
    if (!parse_real(item, v)) throw UsageError("--" + name + ": not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string Command::header() const {
  std::string h = "lindyn " + verb;
  for (const auto& [k, v] : flags)
    if (!v.empty()) h += " --" + k + " " + quote(v);
  return h;
}

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& v : verb_specs()) n.push_back(v.name);
    return n;
  }();
  return names;
}

std::string verb_table() {
  std::ostringstream os;
  os << "usage: lindyn <verb> [--flag value ...] [--out DIR]\n\nverbs:\n";
  for (const auto& v : verb_specs()) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-12s %s\n", v.name.c_str(), v.summary.c_str());
    os << buf;
  }
  os << "\nRun 'lindyn <verb> --help' for the flags of a verb. Every verb takes --seed (default 0)\n"
        "and --out (default the current directory).\n";
  return os.str();
}

Command parse(const std::vector<std::string>& args) {
  if (args.empty()) throw UsageError("no verb given\n" + verb_table());
  if (args[0] == "-h" || args[0] == "--help") throw HelpRequested{verb_table()};
  const VerbSpec* spec = find_verb(args[0]);
  if (!spec) throw UsageError("unknown verb '" + args[0] + "'\n" + verb_table());

  CLI::App app{spec->summary, "lindyn " + spec->name};
  std::map<std::string, std::string> store;
  std::string out_dir = ".";
  store["seed"] = "0";
  app.add_option("--seed", store["seed"], "random seed")->check(validator_for({"seed", "0", Kind::Int, ""}))->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  for (const auto& f : spec->flags) {
    store[f.name] = f.default_value;
    auto* opt = app.add_option("--" + f.name, store[f.name], f.help)->capture_default_str();
    if (f.kind == Kind::Choice) {
      opt->check(CLI::IsMember(f.choices));
    } else {
      opt->check(validator_for(f));
    }
    if (f.required) opt->required();
  }
  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);  // CLI11 consumes from the back
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  Command cmd;
  cmd.verb = spec->name;
  cmd.out_dir = out_dir;
  cmd.flags.push_back({"seed", store["seed"]});
  for (const auto& f : spec->flags) cmd.flags.push_back({f.name, store[f.name]});
  return cmd;
}

int execute(const Command& cmd, std::ostream& out, std::ostream& err) {
  if (cmd.verb == "diagnose") return run_diagnose(cmd, out);
  if (cmd.verb == "simulate") return run_simulate(cmd, out, err);
  if (cmd.verb == "closed-form") return run_closed_form(cmd, out, err);
  if (cmd.verb == "rrr") return run_rrr(cmd, out);
  if (cmd.verb == "figure1") return run_figure1(cmd, out);
  if (cmd.verb == "figure2") return run_figure2(cmd, out, err);
  if (cmd.verb == "table1") return run_table1(cmd, out);
  throw UsageError("unknown verb '" + cmd.verb + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse(args);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const UsageError& e) {
    err << "lindyn: error: " << e.what() << '\n';
    return 2;
  }
  try {
    return execute(cmd, out, err);
  } catch (const UsageError& e) {
    err << "lindyn: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "lindyn: error: " << e.what() << '\n';
    return 1;
  }
}

std::vector<std::string> split_command_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false, in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '\\' && i + 1 < line.size()) {
        cur += line[++i];
      } else if (ch == '"') {
        in_quotes = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      in_quotes = in_token = true;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      if (in_token) out.push_back(cur);
      cur.clear();
      in_token = false;
    } else {
      cur += ch;
      in_token = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quote in command line");
  if (in_token) out.push_back(cur);
  return out;
}

std::string read_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string first;
  std::getline(in, first);
  if (first.rfind("# ", 0) == 0) return first.substr(2);
  if (first.rfind("{", 0) == 0) {
    std::stringstream all;
    all << first << '\n' << in.rdbuf();
    const auto j = nlohmann::json::parse(all.str());
    return j.at("command").get<std::string>();
  }
  if (first.rfind("<svg", 0) == 0) {
    std::string second;
    std::getline(in, second);
    const auto a = second.find("<desc>"), b = second.find("</desc>");
    if (a == std::string::npos || b == std::string::npos) throw ParseError(path + ": no <desc> header");
    std::string s = second.substr(a + 6, b - a - 6), o;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '&') {
        o += s[i];
        continue;
      }
      const auto semi = s.find(';', i);
      const std::string ent = s.substr(i, semi - i + 1);
      o += ent == "&amp;" ? '&' : ent == "&lt;" ? '<' : ent == "&gt;" ? '>' : '"';
      i = semi;
    }
    return o;
  }
  throw ParseError(path + ": no lindyn header");
}

}  // namespace lindyn::cli
