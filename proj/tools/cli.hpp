#pragma once

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imchaos/imchaos.hpp"

#ifndef IMCHAOS_VERSION
#define IMCHAOS_VERSION "unknown"
#endif

namespace imchaos::cli {

using nlohmann::json;

inline constexpr const char* kSchema = "imchaos-report/1";
inline constexpr const char* kSubcommands[] = {"density",     "small-ball",   "moments",    "sobolev-ball",
                                               "phase-solve", "bessel-check", "phi0-check", "sample-field",
                                               "truncation-gap"};

enum Exit : int { kOk = 0, kComputeError = 1, kUsageError = 2 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string field = "circle";
  double beta = 0.5;
  int modes = 64;
  int modes_hi = 0;      // truncation-gap upper mode count; 0 = 2N
  std::size_t grid = 0;  // 0 = subcommand default
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;
  double z0_re = 0.0, z0_im = 0.0;
  std::vector<double> radii = default_radii();
  std::vector<double> p = {-2.5, -1.5, 0.0, 1.0, 2.0};
  std::optional<double> eta;
  double sobolev_s = 1.0;
  std::vector<int> n0 = {8, 32, 128};
  std::string f = "one";
  double window = 6.0;
  int bins = 48;
  double delta = 1.0;
  double t = 4.0;
  double seed_width = 0.5;

  std::size_t resolved_grid() const {
    if (grid != 0) return grid;
    if (command == "phase-solve") return 4097;
    if (field == "circle") return std::max<std::size_t>(256, 4 * static_cast<std::size_t>(std::max(modes, modes_hi)));
    return 257;
  }

  EnsembleConfig ensemble() const {
    EnsembleConfig c;
    c.field = field;
    c.modes = modes;
    c.grid = resolved_grid();
    c.beta = beta;
    c.f = f;
    c.samples = samples;
    c.seed = seed;
    c.workers = workers;
    c.delta = delta;
    c.t = t;
    c.seed_width = seed_width;
    return c;
  }
};

/// The resolved config as embedded in reports. Worker count and output path
/// are left out: they do not affect results, and reports must not differ
/// between worker counts.
inline json config_json(const RunConfig& c) {
  json j{{"command", c.command}, {"beta", c.beta}, {"f", c.f}};
  const std::string& cmd = c.command;
  const bool ensemble = cmd == "density" || cmd == "small-ball" || cmd == "moments" || cmd == "sobolev-ball" ||
                        cmd == "sample-field" || cmd == "truncation-gap";
  if (ensemble) {
    j["field"] = c.field;
    j["modes"] = c.modes;
    j["grid"] = c.resolved_grid();
    j["seed"] = c.seed;
    if (c.field != "circle") {
      j["delta"] = c.delta;
      j["t"] = c.t;
      j["seed_width"] = c.seed_width;
    }
    if (cmd != "sample-field") j["samples"] = c.samples;
  }
  if (cmd == "density") {
    j["window"] = c.window;
    j["bins"] = c.bins;
  }
  if (cmd == "small-ball") j["radii"] = c.radii;
  if (cmd == "small-ball" || cmd == "phase-solve") j["z0"] = {c.z0_re, c.z0_im};
  if (cmd == "moments") j["p"] = c.p;
  if (cmd == "sobolev-ball") {
    j["sobolev_s"] = c.sobolev_s;
    j["eta"] = c.eta ? json(*c.eta) : json("half-median");
  }
  if (cmd == "phase-solve") j["grid"] = c.resolved_grid();
  if (cmd == "phi0-check") j["n0"] = c.n0;
  if (cmd == "truncation-gap") j["modes_hi"] = c.modes_hi > 0 ? c.modes_hi : 2 * c.modes;
  if (cmd == "bessel-check") {
    j.erase("f");
    j.erase("beta");
  }
  return j;
}

inline std::string default_out(const std::string& command) { return command + ".json"; }

inline void check_writable(const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(dir) || ::access(dir.c_str(), W_OK) != 0)
    throw UsageError("--out: directory '" + dir.string() + "' is not writable");
  if (fs::exists(p) && ::access(p.c_str(), W_OK) != 0) throw UsageError("--out: '" + path + "' is not writable");
}

inline void validate(RunConfig& c) {
  // All supported fields live in dimension 1.
  const double d = 1.0;
  if (!(c.beta >= 0.0 && c.beta < std::sqrt(d)))
    throw UsageError("--beta: need 0 <= beta < sqrt(d) = 1 for field '" + c.field + "'");
  if (c.field != "circle" && c.field != "kl-grid" && c.field != "star-scale")
    throw UsageError("--field: expected circle, kl-grid or star-scale");
  if (c.samples < 1) throw UsageError("--samples: need at least 1 sample");
  if (c.modes < 1) throw UsageError("--modes: need at least 1 mode");
  if (c.workers < 1) throw UsageError("--workers: need at least 1 worker");
  if (c.command == "truncation-gap") {
    if (c.modes_hi == 0) c.modes_hi = 2 * c.modes;
    if (c.modes_hi <= c.modes) throw UsageError("--modes-hi: must exceed --modes");
    if (c.field != "circle") throw UsageError("--field: truncation-gap needs the circle field");
  }
  if (c.field == "circle" && c.command != "phase-solve") {
    const auto top = static_cast<std::size_t>(std::max(c.modes, c.modes_hi));
    if (c.resolved_grid() < 4 * top) throw UsageError("--grid: need grid >= 4N for the circle field");
  }
  if (c.command == "phase-solve" && c.resolved_grid() < 5) throw UsageError("--grid: need at least 5 points");
  if (c.field != "circle" && c.resolved_grid() < 3) throw UsageError("--grid: need at least 3 points");
  if (c.command == "density") {
    if (c.bins < 8) throw UsageError("--bins: need at least 8 bins");
    if (!(c.window > 0.0)) throw UsageError("--window: must be positive");
  }
  if (c.command == "small-ball") {
    if (c.radii.empty()) throw UsageError("--radii: need at least one radius");
    for (std::size_t k = 0; k < c.radii.size(); ++k) {
      if (!(c.radii[k] > 0.0)) throw UsageError("--radii: radii must be positive");
      if (k > 0 && !(c.radii[k] < c.radii[k - 1])) throw UsageError("--radii: radii must be sorted decreasing");
    }
  }
  if (c.command == "moments" && c.p.empty()) throw UsageError("--p: need at least one exponent");
  if (c.command == "sobolev-ball") {
    if (c.eta && !(*c.eta >= 0.0)) throw UsageError("--eta: must be nonnegative");
    if (!(c.sobolev_s > 0.5 * d)) throw UsageError("--sobolev-s: need s > d/2");
  }
  if (c.command == "phi0-check") {
    if (c.n0.empty()) throw UsageError("--n0: need at least one value");
    for (int n : c.n0)
      if (n < 2) throw UsageError("--n0: values must be >= 2");
  }
  if (c.out.empty()) c.out = default_out(c.command);
  check_writable(c.out);
}

/// Parses argv into a validated config. Throws UsageError; `help` is set when
/// usage text was requested.
inline RunConfig parse_and_validate(int argc, const char* const* argv, std::string* help = nullptr) {
  RunConfig c;
  CLI::App app{"Imaginary multiplicative chaos laboratory", "imchaos"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--field", c.field, "circle | kl-grid | star-scale");
  app.add_option("--beta", c.beta, "inverse temperature, 0 <= beta < sqrt(d)");
  app.add_option("--modes", c.modes, "Fourier modes N (circle) or KL mode cap");
  app.add_option("--modes-hi", c.modes_hi, "truncation-gap: upper mode count (default 2N)");
  app.add_option("--grid", c.grid, "grid points");
  app.add_option("--samples", c.samples, "Monte Carlo sample count M");
  app.add_option("--seed", c.seed, "u64 seed");
  app.add_option("--workers", c.workers, "worker threads");
  app.add_option("--out", c.out, "report path (default <subcommand>.json)");
  app.add_option("--z0-re", c.z0_re, "target real part");
  app.add_option("--z0-im", c.z0_im, "target imaginary part");
  app.add_option("--radii", c.radii, "small-ball radii, decreasing")->delimiter(',');
  app.add_option("--p", c.p, "moment exponents")->delimiter(',');
  app.add_option("--eta", c.eta, "Sobolev-ball radius (default: half the median norm)");
  app.add_option("--sobolev-s", c.sobolev_s, "Sobolev order s");
  app.add_option("--n0", c.n0, "phi0-check mode counts")->delimiter(',');
  app.add_option("--f", c.f, "test function: one | ramp | step-sign | bump | CSV path");
  app.add_option("--window", c.window, "density: half-width R of [-R,R]^2");
  app.add_option("--bins", c.bins, "density: bins per axis");
  app.add_option("--delta", c.delta, "star-scale: delta");
  app.add_option("--t", c.t, "star-scale: truncation scale t");
  app.add_option("--seed-width", c.seed_width, "star-scale: seed bump width");
  for (const char* name : kSubcommands) app.add_subcommand(name, "")->callback([&c, name] { c.command = name; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    if (help) *help = app.help();
    throw UsageError("help requested");
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\n" + app.help());
  }
  if (c.command.empty()) throw UsageError("missing subcommand\n" + app.help());
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns (result JSON, one-line summary).
// ---------------------------------------------------------------------------

struct Outcome {
  json result;
  std::string summary;
};

inline json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

inline json mean_json(const ChaosEnsemble& e) {
  std::vector<double> re(e.values.size()), im(e.values.size());
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = e.values[i].real();
    im[i] = e.values[i].imag();
  }
  const auto a = stats::mean_se(re);
  const auto b = stats::mean_se(im);
  return {{"mean", {a.mean, b.mean}}, {"se", {a.se, b.se}}, {"f_integral", complex_json(e.f_integral)}};
}

inline json streams_json(const RunConfig& c, std::uint64_t count) {
  return {{"seed", c.seed}, {"first", 0}, {"count", count}, {"rule", "sample i draws from Philox stream (seed, i)"}};
}

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

inline Outcome cmd_density(const RunConfig& c) {
  const auto e = run_chaos_ensemble(c.ensemble());
  const auto d = density_histogram(e.values, c.window, c.bins);
  json counts = json::array();
  for (int iy = 0; iy < d.bins; ++iy) {
    json row = json::array();
    for (int ix = 0; ix < d.bins; ++ix) row.push_back(d.counts[static_cast<std::size_t>(iy * d.bins + ix)]);
    counts.push_back(std::move(row));
  }
  json r{{"window", d.window},   {"bins", d.bins},   {"counts", counts},
         {"total", d.total},     {"outside", d.outside}, {"layout", "counts[iy][ix], x = Re, y = Im"},
         {"ensemble", mean_json(e)}, {"streams", streams_json(c, e.values.size())}};
  return {r, "density: " + std::to_string(d.total - d.outside) + "/" + std::to_string(d.total) + " samples in window"};
}

inline Outcome cmd_small_ball(const RunConfig& c) {
  const auto e = run_chaos_ensemble(c.ensemble());
  const auto s = small_ball(e.values, {c.z0_re, c.z0_im}, c.radii);
  json ci = json::array();
  for (const auto& iv : s.ci) ci.push_back({iv.lo, iv.hi});
  json r{{"z0", complex_json(s.z0)}, {"radii", s.radii},    {"hits", s.hits},
         {"trials", s.trials},       {"probability", s.probability}, {"estimates", s.scaled},
         {"ci", ci},                 {"ensemble", mean_json(e)}, {"streams", streams_json(c, e.values.size())}};
  std::string line = "small-ball:";
  for (std::size_t k = 0; k < s.radii.size(); ++k)
    line += " r=" + fmt(s.radii[k]) + " est=" + fmt(s.scaled[k]) + " hits=" + std::to_string(s.hits[k]);
  return {r, line};
}

inline Outcome cmd_moments(const RunConfig& c) {
  const auto e = run_chaos_ensemble(c.ensemble());
  const auto m = moment_estimate(e.values, c.p);
  json values = json::array(), growth = json::array(), flags = json::array();
  for (const auto& row : m.rows) {
    values.push_back(row.estimates);
    growth.push_back(row.growth);
    flags.push_back(row.divergent_suspect ? "divergent-suspect" : "");
  }
  json r{{"p", c.p},        {"prefixes", m.prefixes},       {"values", values},
         {"growth", growth}, {"flags", flags},               {"zero_samples", m.zero_samples},
         {"ensemble", mean_json(e)}, {"streams", streams_json(c, e.values.size())}};
  if (c.field == "circle") {
    const auto f = resolve_test_function(c.f, Grid::circle(c.resolved_grid()));
    r["second_moment_analytic"] = second_moment_analytic(f, CircleKernel{}, c.beta, c.modes);
  }
  std::string line = "moments:";
  for (const auto& row : m.rows) line += " p=" + fmt(row.p) + ":" + fmt(row.estimates.back());
  return {r, line};
}

inline Outcome cmd_sobolev_ball(const RunConfig& c) {
  const auto cfg = c.ensemble();
  const SobolevSpec spec{c.sobolev_s, 4};
  const auto norms = sobolev_norms(cfg, spec);
  const double median = stats::median(norms);
  const double eta = c.eta ? *c.eta : 0.5 * median;
  const auto s = sobolev_ball_probability(norms, eta);
  json r{{"eta", eta},       {"hits", s.hits}, {"trials", s.trials}, {"probability", s.probability},
         {"ci", {s.ci.lo, s.ci.hi}}, {"median_norm", median}, {"sobolev_s", spec.s}, {"padding", spec.padding},
         {"streams", streams_json(c, cfg.samples)}};
  return {r, "sobolev-ball: P(norm <= " + fmt(eta) + ") = " + fmt(s.probability) + " [" + fmt(s.ci.lo) + ", " +
                 fmt(s.ci.hi) + "]"};
}

inline Outcome cmd_phase_solve(const RunConfig& c, const std::string& out) {
  const Grid g = Grid::interval(c.resolved_grid());
  const auto f = resolve_test_function(c.f, g);
  const std::complex<double> z0{c.z0_re, c.z0_im};
  const auto p = phase_for_target(f, c.beta, z0);
  const double verify = verify_phase(f, c.beta, p, z0);

  namespace fs = std::filesystem;
  const auto csv = fs::path(out).replace_extension(".csv").string();
  std::ofstream os(csv);
  require(static_cast<bool>(os), Errc::IoError, "cannot open " + csv);
  os.precision(17);
  os << "x,a\n";
  for (std::size_t i = 0; i < g.size(); ++i) os << g.point(i)[0] << ',' << p.values[i] << '\n';

  json r{{"target", complex_json(z0)}, {"residual", p.residual},   {"verify_residual", verify},
         {"epsilon", p.epsilon},       {"s1", p.s1},               {"s2", p.s2},
         {"iterations", p.iterations}, {"phase_shift", p.phase_shift}, {"l1", f.l1},
         {"profile_csv", fs::path(csv).filename().string()}};
  return {r, "phase-solve: residual " + fmt(p.residual, 3) + " (verify " + fmt(verify, 3) + ")"};
}

/// Checks of the circle map around (j0, 0).
inline json bessel_report() {
  const double j0 = bessel_j0_root();
  const double J1 = bessel_j(1, j0);
  const double J2 = bessel_j(2, j0);
  const auto an = circle_map_jacobian(j0, 0.0);
  const auto fd = circle_map_jacobian_fd(j0, 0.0, 1e-5);
  double fd_error = 0.0;
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < 2; ++k)
      fd_error = std::max(fd_error, std::abs(an.m[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] -
                                             fd.m[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]));
  double ja = 0.0;
  for (int k = 0; k < 64; ++k) {
    const double s = 10.0 * k / 63.0;
    ja = std::max(ja, std::abs(circle_map_F(s, 0.0) - 2.0 * std::numbers::pi * bessel_j(0, s)));
  }
  const double det = an.det();
  const double radius = 0.3 * std::sqrt(std::abs(det));
  const auto centre = circle_map_F(j0, 0.0);
  double worst = 0.0;
  bool all = true;
  for (int k = 0; k < 16; ++k) {
    const auto z = centre + std::polar(radius, 2.0 * std::numbers::pi * k / 16.0);
    const auto inv = invert_circle_map(z, j0, 0.0);
    worst = std::max(worst, inv.parameter_error);
    all = all && inv.converged;
  }
  const double two_pi = 2.0 * std::numbers::pi;
  return {{"j0", j0},
          {"J0_at_j0", bessel_j(0, j0)},
          {"J1_at_j0", J1},
          {"J2_at_j0", J2},
          {"dF_ds1", complex_json(an.column(0))},
          {"dF_ds2", complex_json(an.column(1))},
          {"det_DF", det},
          {"det_expected", two_pi * two_pi * J1 * J2},
          {"fd_error", fd_error},
          {"jacobi_anger_max_error", ja},
          {"inversion_targets", 16},
          {"inversion_radius", radius},
          {"inversion_converged", all},
          {"inversion_max_error", worst}};
}

inline Outcome cmd_bessel_check() {
  auto r = bessel_report();
  return {r, "bessel-check: fd_error " + fmt(r["fd_error"].get<double>(), 3) + ", inversion error " +
                 fmt(r["inversion_max_error"].get<double>(), 3)};
}

inline Outcome cmd_phi0_check(const RunConfig& c) {
  json ks = json::array(), disc = json::array();
  std::string line = "phi0-check:";
  for (int n : c.n0) {
    const Phi0Map m(n, c.beta);
    const double d = m.discrepancy(3.0);
    ks.push_back(m.K());
    disc.push_back(d);
    line += " n0=" + std::to_string(n) + ":" + fmt(d, 3);
  }
  return {{{"n0", c.n0}, {"K", ks}, {"discrepancy", disc}, {"radius", 3.0}}, line};
}

inline Outcome cmd_sample_field(const RunConfig& c, const std::string& out) {
  const FieldSource src(c.ensemble());
  const auto fs = src.sample(c.seed, 0);
  namespace fsys = std::filesystem;
  const auto csv = fsys::path(out).replace_extension(".csv").string();
  std::ofstream os(csv);
  require(static_cast<bool>(os), Errc::IoError, "cannot open " + csv);
  write_csv(os, fs);
  const auto [lo, hi] = std::minmax_element(fs.values.begin(), fs.values.end());
  json r{{"points", fs.values.size()}, {"stream_id", fs.stream_id}, {"min", *lo}, {"max", *hi},
         {"variance_max", *std::max_element(fs.variance.begin(), fs.variance.end())},
         {"csv", fsys::path(csv).filename().string()}};
  return {r, "sample-field: " + std::to_string(fs.values.size()) + " points written to " + csv};
}

inline Outcome cmd_truncation_gap(const RunConfig& c) {
  auto cfg = c.ensemble();
  cfg.grid = c.resolved_grid();
  const auto f = resolve_test_function(c.f, Grid::circle(cfg.grid));
  const double analytic = truncation_gap(c.modes, c.modes_hi, f, c.beta);
  const auto gaps = coupled_truncation_gaps(cfg, c.modes, c.modes_hi);
  const auto ms = stats::mean_se(gaps);
  json r{{"N", c.modes},        {"M", c.modes_hi}, {"analytic", analytic},
         {"monte_carlo", ms.mean}, {"se", ms.se},  {"streams", streams_json(c, cfg.samples)}};
  return {r, "truncation-gap: analytic " + fmt(analytic) + ", MC " + fmt(ms.mean) + " +- " + fmt(ms.se)};
}

inline json envelope(const RunConfig& c) {
  return {{"schema", kSchema}, {"version", IMCHAOS_VERSION}, {"config", config_json(c)}};
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::IoError, "cannot open " + path);
  os << j.dump(2) << '\n';
  require(static_cast<bool>(os), Errc::IoError, "write failed for " + path);
}

inline int dispatch(const RunConfig& c, std::ostream& out, std::ostream& err) {
  json report = envelope(c);
  try {
    Outcome o;
    const auto& cmd = c.command;
    if (cmd == "density") o = cmd_density(c);
    else if (cmd == "small-ball") o = cmd_small_ball(c);
    else if (cmd == "moments") o = cmd_moments(c);
    else if (cmd == "sobolev-ball") o = cmd_sobolev_ball(c);
    else if (cmd == "phase-solve") o = cmd_phase_solve(c, c.out);
    else if (cmd == "bessel-check") o = cmd_bessel_check();
    else if (cmd == "phi0-check") o = cmd_phi0_check(c);
    else if (cmd == "sample-field") o = cmd_sample_field(c, c.out);
    else if (cmd == "truncation-gap") o = cmd_truncation_gap(c);
    else throw Error(Errc::InvalidArgument, "unknown subcommand " + cmd);
    report["result"] = std::move(o.result);
    write_json(c.out, report);
    out << o.summary << '\n';
    return kOk;
  } catch (const Error& e) {
    report["error"] = std::string(e.name());
    report["message"] = e.what();
    const auto text = report.dump();
    try {
      write_json(c.out, report);
    } catch (const Error&) {
    }
    err << text << '\n';
    return kComputeError;
  } catch (const std::exception& e) {
    report["error"] = "InternalError";
    report["message"] = e.what();
    err << report.dump() << '\n';
    return kComputeError;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig c;
  std::string help;
  try {
    c = parse_and_validate(argc, argv, &help);
  } catch (const UsageError& e) {
    if (!help.empty()) {
      out << help;
      return kOk;
    }
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }
  return dispatch(c, out, err);
}

}  // namespace imchaos::cli
