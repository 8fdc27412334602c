// semfusion command line: `run` drives the pipeline, `synth` writes synthetic
// sequences.

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "semfusion/errors.hpp"
#include "semfusion/pipeline.hpp"
#include "semfusion/synth.hpp"

using namespace semfusion;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitTracking = 3;
constexpr int kExitData = 4;

int fail(const std::string& kind, const std::string& msg, int code) {
  std::cerr << "error: " << kind << ": " << msg << '\n';
  return code;
}

std::vector<double> parse_omegas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("ablate: bad value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("ablate: no values");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance-aware surfel RGB-D SLAM"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Track, fuse and evaluate a TUM-layout sequence");
  std::string config_file, dataset, seg_dir, intrinsics, omega, frames, out, eval, ablate;
  int refine_n = 0, refine_sigma = 0, refine_adjacency = 0;
  bool no_refine = false;
  run->add_option("--config", config_file, "key=value configuration file")->check(CLI::ExistingFile);
  run->add_option("--dataset", dataset, "sequence directory (rgb.txt, depth.txt)");
  run->add_option("--seg-dir", seg_dir, "segmentation sidecar directory (default <dataset>/seg)");
  run->add_option("--intrinsics", intrinsics, "fx,fy,cx,cy (default: <dataset>/camera.txt)");
  run->add_option("--omega", omega, "const:<v> | sidecar | off");
  run->add_option("--frames", frames, "inclusive frame range a:b");
  run->add_option("--out", out, "output directory");
  run->add_option("--eval", eval, "comma list of ate,recon,iou,mem");
  run->add_option("--ablate", ablate, "comma list of omega values, one run each");
  run->add_option("--refine-n", refine_n, "refinement window n");
  run->add_option("--refine-sigma", refine_sigma, "promotion threshold");
  run->add_option("--refine-adjacency", refine_adjacency, "pixel neighbourhood, 4 or 8");
  run->add_flag("--no-refine", no_refine, "disable boundary refinement");

  // synth
  auto* syn = app.add_subcommand("synth", "Render a synthetic sequence with segmentation sidecars");
  std::string scene_name = "textured_plane_with_spheres", synth_out, noise_name = "none";
  int synth_frames = 50, width = 320, height = 240, erode_px = 0;
  double step_mm = 5.0, step_deg = 0.5, band_prob = 0.45;
  std::uint64_t seed = 1;
  const std::map<std::string, synth::Scene (*)()> scenes{
      {"textured_plane_with_spheres", synth::textured_plane_with_spheres},
      {"textureless_wall", synth::textureless_wall},
      {"colorless_structured", synth::colorless_structured},
      {"objects_on_plane", synth::objects_on_plane}};
  std::vector<std::string> scene_names;
  for (const auto& [n, f] : scenes) scene_names.push_back(n);
  syn->add_option("--scene", scene_name, "preset scene")->check(CLI::IsMember(scene_names));
  syn->add_option("--out", synth_out, "output directory")->required();
  syn->add_option("--frames", synth_frames, "frame count")->check(CLI::PositiveNumber);
  syn->add_option("--step-mm", step_mm, "translation per frame in millimetres");
  syn->add_option("--step-deg", step_deg, "rotation per frame in degrees");
  syn->add_option("--noise", noise_name, "none | structured_light")->check(CLI::IsMember({"none", "structured_light"}));
  syn->add_option("--erode", erode_px, "erode segmentation masks by this many pixels");
  syn->add_option("--band-prob", band_prob, "soft probability of the eroded band");
  syn->add_option("--seed", seed, "noise seed");
  syn->add_option("--width", width, "image width")->check(CLI::PositiveNumber);
  syn->add_option("--height", height, "image height")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (*syn) {
    try {
      const auto scene = scenes.at(scene_name)();
      synth::NoiseSpec noise = noise_name == "structured_light" ? synth::NoiseSpec::structured_light() : synth::NoiseSpec{};
      noise.seed = seed;
      noise.mask_erode_px = erode_px;
      noise.band_prob = band_prob;
      const Pose step = scene_name == "textureless_wall"
                            ? synth::TrajectorySpec::body_step({1, 0.5, 0}, step_mm * 1e-3, {0, 0, 1}, step_deg)
                            : synth::TrajectorySpec::body_step({1, 0.5, 0.3}, step_mm * 1e-3, {0.3, 0.3, 1}, step_deg);
      const auto traj = synth::TrajectorySpec::constant_velocity(Pose::identity(), step, synth_frames);
      synth::render_sequence(scene, traj, synth::default_intrinsics(width, height), synth_frames, noise, synth_out);
      std::cout << "wrote " << synth_frames << " frames of " << scene_name << " to " << synth_out << '\n';
      return 0;
    } catch (const std::exception& e) {
      return fail("synth", e.what(), kExitData);
    }
  }

  RunConfig cfg;
  try {
    if (!config_file.empty()) cfg = load_config(config_file);
    if (!dataset.empty()) cfg.dataset = dataset;
    if (!seg_dir.empty()) cfg.seg_dir = seg_dir;
    if (!intrinsics.empty()) cfg.intrinsics = parse_intrinsics(intrinsics);
    if (!omega.empty()) cfg.omega = OmegaSetting::parse(omega);
    if (!frames.empty()) cfg.frames = parse_frame_range(frames);
    if (!out.empty()) cfg.out = out;
    if (!eval.empty()) cfg.eval = EvalToggles::parse(eval);
    if (run->count("--refine-n")) cfg.refine.window = refine_n;
    if (run->count("--refine-sigma")) cfg.refine.threshold = refine_sigma;
    if (run->count("--refine-adjacency")) apply_config_value(cfg, "refine_adjacency", std::to_string(refine_adjacency));
    if (no_refine) cfg.refine_enabled = false;
    cfg.validate();
  } catch (const MissingFileError& e) {
    return fail("dataset", e.what(), kExitData);
  } catch (const std::exception& e) {
    return fail("config", e.what(), kExitUsage);
  }

  try {
    if (!ablate.empty()) {
      const auto rows = run_ablation(cfg, parse_omegas(ablate));
      std::cout << format_ablation(rows);
      return 0;
    }
    const auto res = run_pipeline(cfg);
    std::cout << res.report.to_text();
    if (res.exit_code != 0) return fail("tracking-lost", res.message, kExitTracking);
    return 0;
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what(), kExitUsage);
  } catch (const ParseError& e) {
    return fail("dataset", e.what(), kExitData);
  } catch (const IoError& e) {
    return fail("io", e.what(), kExitData);
  } catch (const std::exception& e) {
    return fail("dataset", e.what(), kExitData);
  }
}
