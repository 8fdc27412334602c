#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semfusion/dataset.hpp"
#include "semfusion/evaluation.hpp"
#include "semfusion/instance_fusion.hpp"
#include "semfusion/registration.hpp"
#include "semfusion/seg_refine.hpp"
#include "semfusion/surfel_map.hpp"

namespace semfusion {

/// Where the per-frame photometric weight comes from.
struct OmegaSetting {
  enum class Mode { Constant, Sidecar, Off };
  Mode mode = Mode::Sidecar;
  double value = 0.1;

  /// "const:<v>", "sidecar" or "off". Throws std::invalid_argument.
  static OmegaSetting parse(const std::string& text);
  std::string str() const;
};

struct EvalToggles {
  bool ate = true;
  bool recon = true;
  bool iou = true;
  bool mem = true;

  /// Comma list drawn from ate, recon, iou, mem. Throws std::invalid_argument.
  static EvalToggles parse(const std::string& text);
};

struct RunConfig {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> seg_dir;
  std::optional<Intrinsics> intrinsics;  // width/height taken from the frames
  RegistrationConfig registration;
  RefineConfig refine;
  bool refine_enabled = true;
  FusionParams fusion;
  SemanticParams semantic;
  OmegaSetting omega;
  std::filesystem::path out = "out";
  EvalToggles eval;
  std::optional<std::pair<int, int>> frames;  // inclusive
  double max_time_gap = 0.02;
  double depth_max = kDefaultDepthMax;

  /// Throws std::invalid_argument or MissingFileError.
  void validate() const;
};

/// Applies one key=value setting. Throws std::invalid_argument on unknown keys
/// or malformed values.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat key=value file; '#' starts a comment. Throws ParseError.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// "fx,fy,cx,cy"
Intrinsics parse_intrinsics(const std::string& text);
/// "a:b", inclusive
std::pair<int, int> parse_frame_range(const std::string& text);

struct RunResult {
  int exit_code = 0;  // 0 ok, 3 tracking lost
  std::string message;
  std::optional<int> failed_frame;
  Trajectory trajectory;
  EvalReport report;
  std::size_t surfels = 0;
  std::size_t instances = 0;
  std::size_t promotions = 0;
};

/// Load -> segment-ingest -> track -> fuse -> refine -> evaluate -> export.
/// Writes trajectory.txt, surfels.ply, instances.txt, promotions.log,
/// report.txt and report.kv under cfg.out. Dataset and I/O failures throw.
RunResult run_pipeline(const RunConfig& cfg);

struct AblationRow {
  double omega = 0;
  bool ok = false;
  std::optional<double> ate;
  std::optional<double> recon;
  std::string error;
};

/// One pipeline run per constant omega, each under <out>/omega_<v>/; a
/// failing run is recorded in its row. Writes <out>/ablation.txt.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<double>& omegas);
std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace semfusion
