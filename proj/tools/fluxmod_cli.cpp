#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_commands.hpp"
#include "cli_config.hpp"
#include "fluxmod/errors.hpp"
#include "fluxmod/simd/kernels.hpp"

namespace fs = std::filesystem;
using fluxmod::cli::Json;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kDomain = 3, kConvergence = 4 };

int report(const char* type, int code, const std::string& message) {
  Json err = {{"error", {{"type", type}, {"code", code}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return code;
}

std::string to_json_text(double v) { return Json(v).dump(); }

// A flag that overwrites one config key when given.
struct KeyFlag {
  std::string key;
  std::optional<std::string> value;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flux-modulated transmon dephasing and gate simulations"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> isa;
  std::vector<std::string> assignments;
  bool print_config = false;

  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--isa", isa, "auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
  app.add_option("--set", assignments, "override a config key: section.key=value");
  app.add_flag("--print-config", print_config,
               "print the resolved configuration and exit");

  std::vector<KeyFlag> key_flags;
  key_flags.reserve(64);
  auto key_option = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                        const std::string& help) {
    key_flags.push_back({key, std::nullopt});
    KeyFlag& kf = key_flags.back();
    sub->add_option_function<std::string>(
        flag, [&kf](const std::string& v) { kf.value = v; }, help);
  };
  auto numeric_option = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                            const std::string& help) {
    key_flags.push_back({key, std::nullopt});
    KeyFlag& kf = key_flags.back();
    sub->add_option_function<double>(
        flag, [&kf](double v) { kf.value = to_json_text(v); }, help);
  };
  auto bool_flag = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                       const std::string& help) {
    key_flags.push_back({key, std::nullopt});
    KeyFlag& kf = key_flags.back();
    sub->add_flag_callback(flag, [&kf] { kf.value = "true"; }, help);
  };
  auto grid_options = [&](CLI::App* sub, const std::string& section) {
    numeric_option(sub, "--phi-ac-min", section + ".phi_ac_min_phi0", "grid start (Phi0)");
    numeric_option(sub, "--phi-ac-max", section + ".phi_ac_max_phi0", "grid end (Phi0)");
    key_option(sub, "--n-points", section + ".n_points", "grid points");
  };
  auto modulation_options = [&](CLI::App* sub) {
    numeric_option(sub, "--phi-dc", "modulation.phi_dc_phi0", "parking flux (Phi0)");
    numeric_option(sub, "--f-m", "modulation.f_m_hz", "modulation frequency (Hz)");
  };

  struct Sub {
    std::string name;
    const char* help;
  };
  const std::vector<Sub> subs = {
      {"calibrate", "circuit energies from the band edges"},
      {"spectrum", "qubit frequency versus static flux"},
      {"fourier", "harmonics of the modulated frequency and their derivatives"},
      {"sweet-spot", "AC sweet spot of the average frequency"},
      {"noise-gen", "synthesized 1/f and white flux-noise traces"},
      {"noise-psd", "Welch PSD of the synthesized traces"},
      {"dephasing", "dephasing times versus modulation amplitude"},
      {"gate-freqs", "gate modulation frequencies and effective coupling"},
      {"gate-fidelity", "optimised two-qubit gate infidelity"},
      {"appendix-c", "master equation versus coherent noise average"},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) apps.push_back(app.add_subcommand(s.name, s.help));

  modulation_options(apps[2]);
  grid_options(apps[2], "grid");
  key_option(apps[2], "--harmonics", "fourier.harmonics", "highest harmonic");

  modulation_options(apps[3]);
  numeric_option(apps[3], "--lo", "sweet_spot.lo_phi0", "bracket start (Phi0)");
  numeric_option(apps[3], "--hi", "sweet_spot.hi_phi0", "bracket end (Phi0)");
  bool_flag(apps[3], "--joint", "sweet_spot.joint", "also locate the joint sweet spot");

  for (int i : {4, 5}) {
    key_option(apps[i], "--kind", "trace.kind", "pink, white or both");
    key_option(apps[i], "--n-samples", "trace.n_samples", "samples per trace");
  }

  modulation_options(apps[6]);
  grid_options(apps[6], "grid");
  key_option(apps[6], "--mode", "dephasing.mode", "analytic or mc");
  key_option(apps[6], "--noise", "dephasing.noise", "pink, white or both");
  bool_flag(apps[6], "--filter", "dephasing.filter", "add the lowpass-filtered white column");

  modulation_options(apps[7]);
  grid_options(apps[7], "gate_freqs");
  bool_flag(apps[7], "--numeric", "gate_freqs.numeric_geff",
            "add the effective coupling from simulated transfer");

  modulation_options(apps[8]);
  grid_options(apps[8], "gate");
  key_option(apps[8], "--gate", "gate.gate", "cz02, cz20 or iswap");
  numeric_option(apps[8], "--a-white", "gate.a_white_phi0_per_rthz",
                 "white amplitude on both lines (Phi0/sqrt(Hz))");
  numeric_option(apps[8], "--lowpass-factor", "gate.lowpass_factor",
                 "lowpass corner in units of f_m (0 disables)");

  key_option(apps[9], "--n-traj", "appendix_c.n_traj", "trajectories per point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("ConfigError", kConfig, e.what());
  }

  std::string command;
  for (auto* sub : apps) {
    if (sub->parsed()) command = sub->get_name();
  }

  try {
    Json cfg = fluxmod::cli::default_config();
    if (!config_path.empty()) {
      fluxmod::cli::merge_strict(cfg, fluxmod::cli::load_json_file(config_path), "");
    }
    for (const auto& a : assignments) fluxmod::cli::apply_assignment(cfg, a);
    for (const auto& kf : key_flags) {
      if (kf.value) fluxmod::cli::apply_assignment(cfg, kf.key + "=" + *kf.value);
    }
    if (out_dir) cfg["out_dir"] = *out_dir;
    if (seed) cfg["seed"] = *seed;
    if (threads) cfg["threads"] = *threads;
    if (isa) cfg["isa"] = *isa;
    fluxmod::cli::validate_config(cfg);

    if (print_config) {
      std::cout << cfg.dump(2) << '\n';
      return kOk;
    }

    const std::string isa_name = cfg.at("isa");
    if (isa_name != "auto") {
      fluxmod::simd::set_active_isa(isa_name == "avx2" ? fluxmod::simd::Isa::avx2
                                                       : fluxmod::simd::Isa::scalar);
    }

    const fs::path out = cfg.at("out_dir").get<std::string>();
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw fluxmod::ConfigError("cannot create " + out.string() + ": " + ec.message());

    Json run = {{"command", command},
                {"config", cfg},
                {"isa", fluxmod::simd::isa_name(fluxmod::simd::active_isa())}};
    {
      std::ofstream os(out / "run.json", std::ios::binary);
      if (!os) throw fluxmod::ConfigError("cannot write " + (out / "run.json").string());
      os << run.dump(2) << '\n';
    }

    const auto files = fluxmod::cli::run_command(command, cfg, out);
    for (const auto& f : files) std::cout << (out / f).string() << '\n';
    return kOk;
  } catch (const fluxmod::ConfigError& e) {
    return report("ConfigError", kConfig, e.what());
  } catch (const fluxmod::CalibrationError& e) {
    return report("CalibrationError", kConvergence, e.what());
  } catch (const fluxmod::ConvergenceError& e) {
    return report("ConvergenceError", kConvergence, e.what());
  } catch (const fluxmod::DomainError& e) {
    return report("DomainError", kDomain, e.what());
  } catch (const fluxmod::FitError& e) {
    return report("FitError", kDomain, e.what());
  } catch (const Json::exception& e) {
    return report("ConfigError", kConfig, e.what());
  } catch (const std::exception& e) {
    return report("InternalError", kInternal, e.what());
  }
}
