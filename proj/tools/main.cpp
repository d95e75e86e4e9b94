#include <iostream>

#include <CLI11.hpp>

#include "sfdi/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spatial frequency domain imaging from drifting interference fringes"};
  app.set_version_flag("--version", "sfdi 0.1.0");

  std::string mode;
  std::string config_path;
  std::vector<std::string> inputs;
  std::string out;
  std::uint64_t seed = 0;
  double fx = 0, wavelength = 0, working_distance = 0, sigma = 0, tol = 0, floor = 0;
  std::vector<std::string> refs;
  std::string lut;

  app.add_option("--mode", mode, "simulate | process | dual | lut | clinical")
      ->check(CLI::IsMember({"simulate", "process", "dual", "lut", "clinical"}));
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--input", inputs, "Input stack: .sfst file or directory of .pgm/.ppm frames");
  app.add_option("--out", out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  auto* fx_opt = app.add_option("--fx", fx, "Spatial frequency of the first channel, 1/mm");
  auto* wl_opt = app.add_option("--wavelength-nm", wavelength, "Wavelength of the first channel, nm");
  auto* wd_opt = app.add_option("--working-distance-mm", working_distance,
                                "Fiber tip to sample distance for every channel, mm");
  app.add_option("--ref", refs, "Reference capture as PATH,MU_A,MU_S[,WAVELENGTH_NM]; repeatable");
  app.add_option("--lut", lut, "Precomputed SFLU lookup table")->check(CLI::ExistingFile);
  auto* sigma_opt = app.add_option("--sigma-px", sigma, "Gaussian smoothing sigma, pixels (default 5)");
  auto* tol_opt = app.add_option("--phase-tol-deg", tol, "Triplet phase tolerance, degrees (default 10)");
  auto* floor_opt = app.add_option("--contrast-floor", floor,
                                   "Usable-frame contrast fraction of the zeroth frame (default 0.7)");

  CLI11_PARSE(app, argc, argv);

  sfdi::RunConfig cfg;
  try {
    if (!config_path.empty()) sfdi::load_config(config_path, cfg);
    // Flags win over the file.
    if (!mode.empty()) cfg.mode = mode;
    if (!inputs.empty()) cfg.inputs.assign(inputs.begin(), inputs.end());
    if (!out.empty()) cfg.out = out;
    if (*seed_opt) cfg.seed = seed;
    if (*fx_opt) cfg.channels.front().fx = fx;
    if (*wl_opt) cfg.channels.front().wavelength_nm = wavelength;
    if (*wd_opt)
      for (auto& ch : cfg.channels) ch.working_distance_mm = working_distance;
    if (!refs.empty()) {
      cfg.references.clear();
      for (const auto& r : refs) cfg.references.push_back(sfdi::parse_reference_arg(r));
    }
    if (!lut.empty()) cfg.lut_file = lut;
    if (*sigma_opt) cfg.sigma_px = sigma;
    if (*tol_opt) cfg.tracker.phase_tol_deg = tol;
    if (*floor_opt) cfg.tracker.contrast_floor = floor;
  } catch (const sfdi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }
  return sfdi::run(cfg, std::cerr);
}
