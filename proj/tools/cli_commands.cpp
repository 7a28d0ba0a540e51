#include "cli_commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "fluxmod/dephasing.hpp"
#include "fluxmod/errors.hpp"
#include "fluxmod/modulation.hpp"
#include "fluxmod/noise.hpp"
#include "fluxmod/parallel.hpp"
#include "fluxmod/rng.hpp"
#include "fluxmod/transmon.hpp"
#include "fluxmod/twoqubit.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header)
      : os_(open_out(path)) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      os_ << (i ? "," : "") << header[i];
    }
    os_ << '\n';
  }

  CsvWriter& num(double v) {
    if (std::isnan(v)) return cell("nan");
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return cell(std::string(buf, res.ptr));
  }
  CsvWriter& text(const std::string& s) { return cell(s); }
  void end() {
    os_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& cell(const std::string& s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }

  std::ofstream os_;
  bool first_ = true;
};

void write_json(const fs::path& path, const Json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

std::uint64_t master_seed(const Json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }
int threads(const Json& cfg) { return cfg.at("threads").get<int>(); }

using Files = std::vector<std::string>;

Files cmd_calibrate(const Json& cfg, const fs::path& out) {
  const Json& device = cfg.at("device");
  const auto params = device_params(device);
  const double f_max = angular_to_hz(transmon::frequency(params, 0.0));
  const double f_min = angular_to_hz(transmon::frequency(params, 0.5));
  const double eta0 = angular_to_hz(transmon::anharmonicity(params, 0.0));
  Json j;
  j["e_c_hz"] = angular_to_hz(params.e_c);
  j["e_j1_hz"] = angular_to_hz(params.e_j1);
  j["e_j2_hz"] = angular_to_hz(params.e_j2);
  j["xi_max"] = params.xi_max();
  j["forward"] = {{"f_max_hz", f_max}, {"f_min_hz", f_min}, {"eta0_hz", eta0}};
  if (!device.at("band").is_null()) {
    const Json& b = device.at("band");
    const double targets[] = {b.at("f_max_hz"), b.at("f_min_hz"), b.at("eta0_hz")};
    const double got[] = {f_max, f_min, eta0};
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(got[i] - targets[i]) / std::abs(targets[i]));
    }
    j["band"] = b;
    j["max_rel_error"] = worst;
  }
  write_json(out / "calibrate.json", j);
  return {"calibrate.json"};
}

Files cmd_spectrum(const Json& cfg, const fs::path& out) {
  const auto params = device_params(cfg.at("device"));
  const auto grid = flux_grid(cfg.at("spectrum"), "phi_dc");
  CsvWriter csv(out / "spectrum.csv", {"phi_dc_phi0", "f_hz", "eta_hz"});
  for (double phi : grid) {
    csv.num(phi)
        .num(angular_to_hz(transmon::frequency(params, phi)))
        .num(angular_to_hz(transmon::anharmonicity(params, phi)))
        .end();
  }
  // The band has its maxima at integer and its minima at half-integer flux.
  Json spots = Json::array();
  const double lo = grid.front();
  const double hi = grid.back();
  for (long k = static_cast<long>(std::ceil(2.0 * lo)); k <= std::floor(2.0 * hi); ++k) {
    const double phi = 0.5 * static_cast<double>(k);
    spots.push_back({{"phi_dc_phi0", phi},
                     {"f_hz", angular_to_hz(transmon::frequency(params, phi))},
                     {"kind", k % 2 == 0 ? "max" : "min"}});
  }
  write_json(out / "spectrum_sweet_spots.json", {{"dc_sweet_spots", spots}});
  return {"spectrum.csv", "spectrum_sweet_spots.json"};
}

Files cmd_fourier(const Json& cfg, const fs::path& out) {
  const auto params = device_params(cfg.at("device"));
  const auto coeffs = transmon::static_coeffs(params);
  const double phi_dc = cfg.at("modulation").at("phi_dc_phi0");
  const int K = cfg.at("fourier").at("harmonics");
  if (K < 1 || K > modulation::kMaxHarmonics) {
    throw ConfigError("fourier.harmonics must lie in [1, " +
                      std::to_string(modulation::kMaxHarmonics) + "]");
  }
  std::vector<std::string> header = {"phi_ac_phi0", "f_avg_hz", "eta_avg_hz",
                                     "dfavg_dphiac_hz_per_phi0"};
  for (int k = 0; k <= K; ++k) header.push_back("omega_" + std::to_string(k) + "_hz");
  for (int k = 0; k <= K; ++k) header.push_back("d_dc_" + std::to_string(k) + "_rad_s_per_phi0");
  for (int k = 0; k <= K; ++k) header.push_back("d_ac_" + std::to_string(k) + "_rad_s_per_phi0");
  CsvWriter csv(out / "fourier.csv", header);
  for (double phi_ac : flux_grid(cfg.at("grid"), "phi_ac")) {
    const auto s = modulation::fourier_series(coeffs, phi_dc, phi_ac, K);
    csv.num(phi_ac)
        .num(angular_to_hz(modulation::average_frequency(s)))
        .num(angular_to_hz(modulation::average_anharmonicity(params, phi_dc, phi_ac)))
        .num(angular_to_hz(modulation::average_frequency_ac_slope(coeffs, phi_dc, phi_ac)));
    for (int k = 0; k <= K; ++k) csv.num(angular_to_hz(s.omega[k]));
    for (int k = 0; k <= K; ++k) csv.num(s.d_dc[k]);
    for (int k = 0; k <= K; ++k) csv.num(s.d_ac[k]);
    csv.end();
  }
  return {"fourier.csv"};
}

Files cmd_sweet_spot(const Json& cfg, const fs::path& out) {
  const auto params = device_params(cfg.at("device"));
  const auto coeffs = transmon::static_coeffs(params);
  const Json& ss = cfg.at("sweet_spot");
  const double phi_dc = cfg.at("modulation").at("phi_dc_phi0");
  const double lo = ss.at("lo_phi0");
  const double hi = ss.at("hi_phi0");
  const double star = modulation::find_ac_sweet_spot(coeffs, phi_dc, lo, hi);
  const auto series = modulation::fourier_series(coeffs, phi_dc, star);
  Json j;
  j["phi_ac_star"] = star;
  j["phi_dc_phi0"] = phi_dc;
  j["bracket_phi0"] = {lo, hi};
  j["f_avg_hz"] = angular_to_hz(modulation::average_frequency(series));
  if (ss.at("joint").get<bool>()) {
    const auto js = modulation::find_joint_sweet_spot(
        coeffs, ss.at("joint_start_phi_dc_phi0"), ss.at("joint_start_phi_ac_phi0"));
    const auto js_series = modulation::fourier_series(coeffs, js.phi_dc, js.phi_ac);
    j["joint"] = {{"phi_dc_phi0", js.phi_dc},
                  {"phi_ac_phi0", js.phi_ac},
                  {"iterations", js.iterations},
                  {"f_avg_hz", angular_to_hz(modulation::average_frequency(js_series))}};
  }
  write_json(out / "sweet_spot.json", j);
  return {"sweet_spot.json"};
}

struct Traces {
  std::map<std::string, noise::NoiseTrace> by_name;
};

Traces make_traces(const Json& cfg) {
  const Json& t = cfg.at("trace");
  const std::string kind = t.at("kind");
  const std::size_t n = t.at("n_samples").get<std::size_t>();
  const double dt = t.at("dt_s");
  const double alpha = cfg.at("noise").at("alpha");
  if (!noise::is_power_of_two(n) || n < 1024) {
    throw ConfigError("trace.n_samples must be a power of two >= 1024");
  }
  if (!(dt > 0.0)) throw ConfigError("trace.dt_s must be positive");
  const auto seed = master_seed(cfg);
  Traces tr;
  if (kind != "white") {
    tr.by_name["pink"] = noise::synth_pink(t.at("a_pink_phi0"), alpha, dt, n,
                                           rng::derive_seed(seed, rng::Stream::dc_pink, 0));
  }
  if (kind != "pink") {
    tr.by_name["white"] = noise::synth_white(t.at("a_white_phi0_per_rthz"), dt, n,
                                             rng::derive_seed(seed, rng::Stream::dc_white, 0));
  }
  return tr;
}

Files cmd_noise_gen(const Json& cfg, const fs::path& out) {
  Files files;
  for (const auto& [name, trace] : make_traces(cfg).by_name) {
    const std::string file = "trace_" + name + ".csv";
    auto os = open_out(out / file);
    noise::write_trace_csv(os, trace);
    files.push_back(file);
  }
  return files;
}

Files cmd_noise_psd(const Json& cfg, const fs::path& out) {
  const int segments = cfg.at("trace").at("psd_segments");
  if (segments < 4) throw ConfigError("trace.psd_segments must be >= 4");
  auto traces = make_traces(cfg).by_name;
  if (traces.size() == 2) {
    noise::NoiseTrace total = traces.at("pink");
    const auto& w = traces.at("white").samples;
    for (std::size_t i = 0; i < total.samples.size(); ++i) total.samples[i] += w[i];
    traces["total"] = std::move(total);
  }
  Files files;
  for (const auto& [name, trace] : traces) {
    const std::string file = "psd_" + name + ".csv";
    auto os = open_out(out / file);
    noise::write_psd_csv(os, noise::estimate_psd(trace, segments));
    files.push_back(file);
  }
  return files;
}

Files cmd_dephasing(const Json& cfg, const fs::path& out) {
  const auto params = device_params(cfg.at("device"));
  const auto spec = noise_spec(cfg.at("noise"));
  const Json& d = cfg.at("dephasing");
  const std::string which = d.at("noise");
  const bool filter = d.at("filter");
  const auto mode = d.at("mode").get<std::string>() == "mc" ? dephasing::SweepMode::mc
                                                             : dephasing::SweepMode::analytic;
  const double f_m = cfg.at("modulation").at("f_m_hz");
  const auto grid = flux_grid(cfg.at("grid"), "phi_ac");

  dephasing::SweepOptions opts;
  opts.phi_dc = cfg.at("modulation").at("phi_dc_phi0");
  opts.theta_m = cfg.at("modulation").at("theta_m_rad");
  opts.seed = master_seed(cfg);
  opts.pink = which != "white";
  opts.white = which != "pink";
  opts.filtered = filter && which != "pink";

  std::vector<dephasing::SweepRow> rows;
  if (mode == dephasing::SweepMode::analytic) {
    rows = dephasing::sweep_dephasing(params, spec, f_m, grid, mode, opts);
  } else {
    // Pink and white runs use different window budgets.
    const Json& mc = cfg.at("mc");
    const int n_times = mc.at("n_times");
    rows.assign(grid.size(), {});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      rows[i].phi_ac = grid[i];
      rows[i].mode = mode;
      rows[i].tphi_pink = rows[i].tphi_white = rows[i].tphi_white_lp = rows[i].beta = kNan;
    }
    if (opts.pink) {
      auto o = opts;
      o.white = o.filtered = false;
      o.budget = mc_budget(mc.at("pink"), false, n_times, threads(cfg));
      const auto r = dephasing::sweep_dephasing(params, spec, f_m, grid, mode, o);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        rows[i].tphi_pink = r[i].tphi_pink;
        rows[i].beta = r[i].beta;
        rows[i].clamped |= r[i].clamped;
      }
    }
    if (opts.white || opts.filtered) {
      auto o = opts;
      o.pink = false;
      o.seed = rng::derive_seed(opts.seed, rng::Stream::dc_white, 0);
      o.budget = mc_budget(mc.at("white"), true, n_times, threads(cfg));
      const auto r = dephasing::sweep_dephasing(params, spec, f_m, grid, mode, o);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        rows[i].tphi_white = r[i].tphi_white;
        rows[i].tphi_white_lp = r[i].tphi_white_lp;
        rows[i].clamped |= r[i].clamped;
      }
    }
  }

  CsvWriter csv(out / "dephasing.csv", {"phi_ac_phi0", "tphi_pink_s", "tphi_white_s",
                                        "tphi_white_lp_s", "beta", "mode", "clamped"});
  for (const auto& r : rows) {
    csv.num(r.phi_ac)
        .num(r.tphi_pink)
        .num(r.tphi_white)
        .num(r.tphi_white_lp)
        .num(r.beta)
        .text(dephasing::sweep_mode_name(r.mode))
        .text(std::to_string(r.clamped))
        .end();
  }
  return {"dephasing.csv"};
}

twoqubit::EvolveOptions evolve_options(const Json& gate) {
  twoqubit::EvolveOptions e;
  e.ode.rtol = gate.at("rtol");
  e.ode.atol = gate.at("atol");
  return e;
}

Files cmd_gate_freqs(const Json& cfg, const fs::path& out) {
  const auto sys = two_qubit_system(cfg.at("two_qubit"));
  const auto coeffs = transmon::static_coeffs(sys.tunable);
  const double phi_dc = cfg.at("modulation").at("phi_dc_phi0");
  const Json& gf = cfg.at("gate_freqs");
  const Json& gate = cfg.at("gate");
  const bool numeric = gf.at("numeric_geff");
  const auto grid = flux_grid(gf, "phi_ac");

  struct Row {
    twoqubit::GateFrequencies f;
    double f_avg = 0.0;
    double g_closed = 0.0;
    double g_numeric = kNan;
    double f_res = kNan;
  };
  std::vector<Row> rows(grid.size());
  parallel_for(grid.size(), threads(cfg), [&](std::size_t i) {
    Row& r = rows[i];
    r.f = twoqubit::gate_frequencies(sys, coeffs, phi_dc, grid[i]);
    r.f_avg = angular_to_hz(
        modulation::average_frequency(modulation::fourier_series(coeffs, phi_dc, grid[i])));
    r.g_closed = angular_to_hz(
        twoqubit::effective_coupling_closed(sys, coeffs, phi_dc, grid[i], r.f.cz02));
    // Below this the sideband is too weak to resolve within the scan.
    if (numeric && r.g_closed > 1e-3 * angular_to_hz(sys.g)) {
      const auto fit = twoqubit::tune_resonance(
          sys, coeffs, phi_dc, grid[i], r.f.cz02, twoqubit::Gate::cz02,
          gate.at("scan_span_hz"), gate.at("scan_step_hz"), evolve_options(gate));
      r.g_numeric = angular_to_hz(fit.g_eff);
      r.f_res = fit.f_m;
    }
  });

  std::vector<std::string> header = {
      "phi_ac_phi0",   "f_avg_hz",       "f_cz02_hz",       "f_cz20_hz",
      "f_iswap_hz",    "f_cz02_h2_hz",   "f_cz20_h2_hz",    "f_iswap_h2_hz",
      "geff_closed_hz"};
  if (numeric) {
    header.push_back("geff_numeric_hz");
    header.push_back("f_m_resonant_hz");
  }
  CsvWriter csv(out / "gate_freqs.csv", header);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Row& r = rows[i];
    csv.num(grid[i])
        .num(r.f_avg)
        .num(r.f.cz02)
        .num(r.f.cz20)
        .num(r.f.iswap)
        .num(r.f.cz02_h2)
        .num(r.f.cz20_h2)
        .num(r.f.iswap_h2)
        .num(r.g_closed);
    if (numeric) csv.num(r.g_numeric).num(r.f_res);
    csv.end();
  }
  return {"gate_freqs.csv"};
}

Files cmd_gate_fidelity(const Json& cfg, const fs::path& out) {
  const auto sys = two_qubit_system(cfg.at("two_qubit"));
  const Json& g = cfg.at("gate");
  twoqubit::FidelitySweepConfig fc;
  fc.phi_dc = cfg.at("modulation").at("phi_dc_phi0");
  fc.gate = parse_gate(g.at("gate"));
  fc.noise = noise_spec(cfg.at("noise"));
  fc.noise.a_dc_pink = fc.noise.a_ac_pink = g.at("a_pink_phi0");
  fc.noise.a_dc_white = fc.noise.a_ac_white = g.at("a_white_phi0_per_rthz");
  fc.noise.lowpass_cutoff = 0.0;
  fc.lowpass_factor = g.at("lowpass_factor");
  fc.beta = g.at("beta");
  fc.tune.t_ramp = g.at("t_ramp_s");
  fc.tune.scan_span = g.at("scan_span_hz");
  fc.tune.scan_step = g.at("scan_step_hz");
  fc.tune.refine = g.at("refine");
  fc.tune.max_refine_evals = g.at("max_refine_evals");
  fc.tune.evolve = evolve_options(g);
  fc.threads = threads(cfg);
  const auto rows = twoqubit::fidelity_sweep(sys, flux_grid(g, "phi_ac"), fc);

  CsvWriter csv(out / "gate_fidelity.csv",
                {"phi_ac_phi0", "f_m_hz", "geff_hz", "tcz_s", "infidelity",
                 "infidelity_nodecoherence", "leakage", "gammaphi_w_per_s",
                 "gammaphi_pink_per_s"});
  for (const auto& r : rows) {
    csv.num(r.phi_ac)
        .num(r.f_m_hz)
        .num(r.geff_hz)
        .num(r.tcz_s)
        .num(r.infidelity)
        .num(r.infidelity_nodecoherence)
        .num(r.leakage)
        .num(r.gammaphi_w)
        .num(r.gammaphi_pink)
        .end();
  }
  return {"gate_fidelity.csv"};
}

Files cmd_appendix_c(const Json& cfg, const fs::path& out) {
  const auto params = device_params(cfg.at("device"));
  const Json& a = cfg.at("appendix_c");
  const double phi_dc = cfg.at("modulation").at("phi_dc_phi0");
  twoqubit::IdealGateNoise model;
  model.t_phi = a.at("t_phi_s");
  model.beta = a.at("beta");
  model.f_m = a.at("f_m_hz");
  model.kappa = twoqubit::qutrit_kappa(params, transmon::frequency(params, phi_dc));
  const auto ratios = a.at("tcz_over_tphi").get<std::vector<double>>();
  if (ratios.empty()) throw ConfigError("appendix_c.tcz_over_tphi is empty");
  std::vector<double> g_grid;
  for (double x : ratios) {
    if (!(x > 0.0)) throw ConfigError("appendix_c.tcz_over_tphi entries must be positive");
    g_grid.push_back(angular_to_hz(kPi / (x * model.t_phi)));
  }
  const int n_traj = a.at("n_traj");
  const int n_seg = a.at("n_segments");

  CsvWriter csv(out / "appendix_c.csv", {"tcz_over_tphi", "f_me", "f_avg_coherent",
                                         "f_asymptotic", "gate", "f_avg_std_error"});
  const twoqubit::Gate gates[] = {twoqubit::Gate::cz02, twoqubit::Gate::cz20};
  for (std::size_t gi = 0; gi < 2; ++gi) {
    model.gate = gates[gi];
    const auto rows = twoqubit::coherent_noise_average(
        model, g_grid, n_traj, n_seg,
        rng::derive_seed(master_seed(cfg), rng::Stream::trajectory, gi), threads(cfg));
    for (const auto& r : rows) {
      csv.num(r.tcz_over_tphi)
          .num(r.f_me)
          .num(r.f_avg_coherent)
          .num(r.f_asymptotic)
          .text(twoqubit::gate_name(r.gate))
          .num(r.f_avg_std_error)
          .end();
    }
  }
  return {"appendix_c.csv"};
}

using Handler = Files (*)(const Json&, const fs::path&);

const std::vector<std::pair<std::string, Handler>>& table() {
  static const std::vector<std::pair<std::string, Handler>> t = {
      {"calibrate", cmd_calibrate},     {"spectrum", cmd_spectrum},
      {"fourier", cmd_fourier},         {"sweet-spot", cmd_sweet_spot},
      {"noise-gen", cmd_noise_gen},     {"noise-psd", cmd_noise_psd},
      {"dephasing", cmd_dephasing},     {"gate-freqs", cmd_gate_freqs},
      {"gate-fidelity", cmd_gate_fidelity}, {"appendix-c", cmd_appendix_c},
  };
  return t;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : table()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<std::string> run_command(const std::string& name, const Json& cfg,
                                     const fs::path& out) {
  for (const auto& [n, fn] : table()) {
    if (n == name) return fn(cfg, out);
  }
  throw ConfigError("unknown command " + name);
}

}  // namespace fluxmod::cli
