#include "cli_config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fluxmod/errors.hpp"
#include "fluxmod/units.hpp"

namespace fluxmod::cli {

namespace {

Json band_block(double f_max, double f_min, double eta0) {
  return {{"f_max_hz", f_max}, {"f_min_hz", f_min}, {"eta0_hz", eta0}};
}

const char* kParamKeys[] = {"e_c_hz", "e_j1_hz", "e_j2_hz"};

bool is_device_block(const Json& j) {
  return j.is_object() && j.contains("band") && j.contains("params");
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) {
    return !(a.is_number_integer() || a.is_number_unsigned()) ||
           b.is_number_integer() || b.is_number_unsigned();
  }
  return a.type() == b.type();
}

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double number(const Json& block, const char* key, const std::string& where) {
  if (!block.contains(key) || !block.at(key).is_number()) {
    throw ConfigError("missing numeric key " + join(where, key));
  }
  return block.at(key).get<double>();
}

}  // namespace

Json default_config() {
  Json cfg;
  cfg["seed"] = 1;
  cfg["threads"] = 1;
  cfg["isa"] = "auto";
  cfg["out_dir"] = "out";

  cfg["device"] = {{"band", band_block(5.1e9, 4.1e9, 0.2e9)}, {"params", nullptr}};

  cfg["modulation"] = {
      {"phi_dc_phi0", 0.0},
      {"f_m_hz", 300e6},
      {"theta_m_rad", 0.0},
  };

  cfg["noise"] = {
      {"a_dc_pink_phi0", 0.0},
      {"a_ac_pink_phi0", 3.63e-6},
      {"a_dc_white_phi0_per_rthz", 0.0},
      {"a_ac_white_phi0_per_rthz", 0.0},
      {"alpha", 1.0},
      {"f_ir_hz", 1.0},
      {"f_uv_hz", 3e9},
      {"lowpass_cutoff_hz", 0.0},
      {"shared_filter", false},
  };

  cfg["grid"] = {
      {"phi_ac_min_phi0", 0.0},
      {"phi_ac_max_phi0", 0.7},
      {"n_points", 36},
      {"phi_ac_list_phi0", Json::array()},
  };

  cfg["spectrum"] = {
      {"phi_dc_min_phi0", -1.0},
      {"phi_dc_max_phi0", 1.0},
      {"n_points", 401},
  };

  cfg["fourier"] = {{"harmonics", 4}};

  cfg["sweet_spot"] = {
      {"lo_phi0", 0.4},
      {"hi_phi0", 0.8},
      {"joint", false},
      {"joint_start_phi_dc_phi0", 0.25},
      {"joint_start_phi_ac_phi0", 0.4},
  };

  cfg["trace"] = {
      {"n_samples", 1 << 16},
      {"dt_s", 50e-9},
      {"a_pink_phi0", 3.63e-6},
      {"a_white_phi0_per_rthz", 10e-9},
      {"psd_segments", 16},
      {"kind", "both"},
  };

  cfg["mc"] = {
      {"n_times", 200},
      {"pink", {{"n_windows", 4000}, {"window_len_s", 250e-6}, {"dt_s", 50e-9}, {"n_traces", 1}}},
      {"white", {{"n_windows", 2000}, {"window_len_s", 20e-6}, {"dt_s", 0.0}, {"n_traces", 1}}},
  };

  cfg["dephasing"] = {
      {"mode", "analytic"},
      {"noise", "both"},
      {"filter", false},
  };

  cfg["two_qubit"] = {
      {"tunable", {{"band", band_block(5.1e9, 4.5e9, 0.2e9)}, {"params", nullptr}}},
      {"fixed_f_hz", 4.0e9},
      {"fixed_eta_hz", 0.2e9},
      {"g_hz", 7e6},
      {"t1_f_s", 150e-6},
      {"t1_t_s", 150e-6},
      {"t2star_f_s", 150e-6},
      {"tphi_bkgd_s", 300e-6},
  };

  cfg["gate_freqs"] = {
      {"phi_ac_min_phi0", 0.0},
      {"phi_ac_max_phi0", 0.7},
      {"n_points", 36},
      {"phi_ac_list_phi0", Json::array()},
      {"numeric_geff", false},
  };

  cfg["gate"] = {
      {"gate", "cz02"},
      {"phi_ac_min_phi0", 0.1},
      {"phi_ac_max_phi0", 0.65},
      {"n_points", 12},
      {"phi_ac_list_phi0", Json::array()},
      {"a_pink_phi0", 3.63e-6},
      {"a_white_phi0_per_rthz", 50e-9},
      {"lowpass_factor", 0.0},
      {"beta", 2.0},
      {"t_ramp_s", 10e-9},
      {"scan_span_hz", 5e6},
      {"scan_step_hz", 0.1e6},
      {"refine", true},
      {"max_refine_evals", 60},
      {"rtol", 1e-9},
      {"atol", 1e-10},
  };

  cfg["appendix_c"] = {
      {"t_phi_s", 18e-6},
      {"beta", 1.9},
      {"f_m_hz", 300e6},
      {"tcz_over_tphi", {0.002, 0.005, 0.01, 0.015, 0.02}},
      {"n_traj", 20000},
      {"n_segments", 100},
  };
  return cfg;
}

void merge_strict(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) {
    throw ConfigError("expected an object at " + (where.empty() ? "<root>" : where));
  }
  if (is_device_block(base)) {
    const bool band = patch.contains("band") && !patch.at("band").is_null();
    const bool params = patch.contains("params") && !patch.at("params").is_null();
    if (band && params) {
      throw ConfigError(where + ": give either band or params, not both");
    }
    if (params) base["band"] = nullptr;
    if (band) base["params"] = nullptr;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = join(where, it.key());
    if (!base.contains(it.key())) throw ConfigError("unknown config key " + path);
    Json& dst = base[it.key()];
    const Json& src = it.value();
    if (is_device_block(base) && dst.is_null() && src.is_object()) {
      dst = Json::object();
      if (it.key() == "band") {
        dst = band_block(0.0, 0.0, 0.0);
      } else {
        for (const char* k : kParamKeys) dst[k] = 0.0;
      }
      merge_strict(dst, src, path);
    } else if (src.is_null() && is_device_block(base)) {
      dst = nullptr;
    } else if (dst.is_object()) {
      merge_strict(dst, src, path);
    } else if (dst.is_array()) {
      if (!src.is_array()) throw ConfigError("expected an array at " + path);
      for (const auto& v : src) {
        if (!v.is_number()) throw ConfigError("expected numbers in " + path);
      }
      dst = src;
    } else {
      if (!same_kind(dst, src)) {
        throw ConfigError("type mismatch at " + path + ": expected " +
                          std::string(dst.type_name()) + ", got " +
                          std::string(src.type_name()));
      }
      dst = src;
    }
  }
}

void apply_assignment(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("expected section.key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  std::stringstream ss(rest);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw ConfigError("empty key segment in '" + key + "'");
    parts.push_back(p);
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    Json wrap = Json::object();
    wrap[*it] = patch;
    patch = wrap;
  }
  merge_strict(cfg, patch, "");
}

void validate_config(const Json& cfg) {
  auto check_device = [](const Json& d, const std::string& where) {
    const bool band = !d.at("band").is_null();
    const bool params = !d.at("params").is_null();
    if (band == params) {
      throw ConfigError(where + ": exactly one of band or params is required");
    }
  };
  check_device(cfg.at("device"), "device");
  check_device(cfg.at("two_qubit").at("tunable"), "two_qubit.tunable");
  if (cfg.at("seed").get<double>() < 0) throw ConfigError("seed must be >= 0");
  if (cfg.at("threads").get<int>() < 1) throw ConfigError("threads must be >= 1");
  const std::string isa = cfg.at("isa");
  if (isa != "auto" && isa != "scalar" && isa != "avx2") {
    throw ConfigError("isa must be auto, scalar or avx2");
  }
  const std::string mode = cfg.at("dephasing").at("mode");
  if (mode != "analytic" && mode != "mc") {
    throw ConfigError("dephasing.mode must be analytic or mc");
  }
  const std::string which = cfg.at("dephasing").at("noise");
  if (which != "pink" && which != "white" && which != "both") {
    throw ConfigError("dephasing.noise must be pink, white or both");
  }
  const std::string kind = cfg.at("trace").at("kind");
  if (kind != "pink" && kind != "white" && kind != "both") {
    throw ConfigError("trace.kind must be pink, white or both");
  }
  parse_gate(cfg.at("gate").at("gate"));
  if (cfg.at("out_dir").get<std::string>().empty()) {
    throw ConfigError("out_dir must not be empty");
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  Json j = Json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return j;
}

transmon::TransmonParams device_params(const Json& device) {
  if (!device.at("band").is_null()) {
    const Json& b = device.at("band");
    transmon::QubitBand band{number(b, "f_max_hz", "band"), number(b, "f_min_hz", "band"),
                             number(b, "eta0_hz", "band")};
    band.validate();
    return transmon::calibrate(band);
  }
  const Json& p = device.at("params");
  transmon::TransmonParams params;
  params.e_c = hz_to_angular(number(p, "e_c_hz", "params"));
  params.e_j1 = hz_to_angular(number(p, "e_j1_hz", "params"));
  params.e_j2 = hz_to_angular(number(p, "e_j2_hz", "params"));
  params.validate();
  return params;
}

noise::NoiseSpec noise_spec(const Json& n) {
  noise::NoiseSpec s;
  s.a_dc_pink = n.at("a_dc_pink_phi0");
  s.a_ac_pink = n.at("a_ac_pink_phi0");
  s.a_dc_white = n.at("a_dc_white_phi0_per_rthz");
  s.a_ac_white = n.at("a_ac_white_phi0_per_rthz");
  s.alpha = n.at("alpha");
  s.f_ir = n.at("f_ir_hz");
  s.f_uv = n.at("f_uv_hz");
  s.lowpass_cutoff = n.at("lowpass_cutoff_hz");
  s.shared_filter = n.at("shared_filter");
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
  return s;
}

dephasing::McBudget mc_budget(const Json& block, bool white, int n_times,
                               int threads) {
  dephasing::McBudget b;
  b.n_windows = block.at("n_windows");
  b.window_len = block.at("window_len_s");
  if (white) {
    b.dt_white = block.at("dt_s");
  } else {
    b.dt = block.at("dt_s");
  }
  b.n_traces = block.at("n_traces");
  b.n_times = n_times;
  b.threads = threads;
  try {
    b.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("mc: ") + e.what());
  }
  return b;
}

twoqubit::TwoQubitSystem two_qubit_system(const Json& tq) {
  twoqubit::TwoQubitSystem sys;
  sys.tunable = device_params(tq.at("tunable"));
  sys.fixed_f = hz_to_angular(tq.at("fixed_f_hz").get<double>());
  sys.fixed_eta = hz_to_angular(tq.at("fixed_eta_hz").get<double>());
  sys.g = hz_to_angular(tq.at("g_hz").get<double>());
  twoqubit::CoherenceTimes times;
  times.t1_f = tq.at("t1_f_s");
  times.t1_t = tq.at("t1_t_s");
  times.t2star_f = tq.at("t2star_f_s");
  times.tphi_bkgd = tq.at("tphi_bkgd_s");
  twoqubit::apply_coherence_times(sys, times);
  sys.validate();
  return sys;
}

twoqubit::Gate parse_gate(const std::string& name) {
  if (name == "cz02") return twoqubit::Gate::cz02;
  if (name == "cz20") return twoqubit::Gate::cz20;
  if (name == "iswap") return twoqubit::Gate::iswap;
  throw ConfigError("unknown gate '" + name + "' (cz02, cz20, iswap)");
}

std::vector<double> flux_grid(const Json& block, const std::string& prefix) {
  const std::string list_key = prefix + "_list_phi0";
  if (block.contains(list_key) && !block.at(list_key).empty()) {
    return block.at(list_key).get<std::vector<double>>();
  }
  const double lo = block.at(prefix + "_min_phi0");
  const double hi = block.at(prefix + "_max_phi0");
  const int n = block.at("n_points");
  if (n < 1) throw ConfigError(prefix + " grid needs n_points >= 1");
  if (!(hi >= lo)) throw ConfigError(prefix + " grid needs max >= min");
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) {
    const double x = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    grid[i] = std::round(x * 1e12) / 1e12;
  }
  return grid;
}

}  // namespace fluxmod::cli
