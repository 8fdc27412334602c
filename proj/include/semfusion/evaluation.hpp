#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semfusion/dataset.hpp"
#include "semfusion/instance_fusion.hpp"
#include "semfusion/surfel_map.hpp"
#include "semfusion/synth.hpp"

namespace semfusion {

struct MatchedPositions {
  std::vector<Vec3> estimated;
  std::vector<Vec3> truth;
};

/// Nearest-timestamp pairing within `max_gap` seconds.
MatchedPositions match_trajectories(const Trajectory& estimated, const Trajectory& truth, double max_gap = 0.02);

/// Rigid transform (no scale) minimising sum |T * src_i - dst_i|^2.
/// Throws DimensionError on size mismatch or empty input.
Pose align_rigid(std::span<const Vec3> src, std::span<const Vec3> dst);

struct AteResult {
  double rmse = 0;
  Pose alignment;  // estimated -> truth
  std::size_t pairs = 0;
};

/// Throws InsufficientOverlapError with fewer than two matched pairs.
AteResult ate(const Trajectory& estimated, const Trajectory& truth, double max_gap = 0.02);
double ate_rmse(const Trajectory& estimated, const Trajectory& truth, double max_gap = 0.02);

/// Ground truth as a point cloud, analytic surfaces, or both (closest of the
/// two is used).
struct ReconstructionTruth {
  std::vector<Vec3> points;
  std::vector<synth::Shape> shapes;

  bool empty() const { return points.empty() && shapes.empty(); }
};

struct ReconstructionOptions {
  int max_iterations = 60;
  double tolerance = 1e-12;  // change of the mean distance between iterations
};

struct ReconstructionResult {
  double mean_distance = 0;
  Pose alignment;  // model -> truth
  int iterations = 0;
};

/// Rigid ICP of the model onto the truth, then the mean distance of every
/// model vertex to its closest truth point. Throws RegistrationFailureError.
ReconstructionResult reconstruction_error(const std::vector<Vec3>& model, const ReconstructionTruth& truth,
                                          const ReconstructionOptions& opts = {});

/// |a n b| / |a u b|, 1 when both are empty. Throws DimensionError.
double iou(const MaskImage& a, const MaskImage& b);

/// Mean over truth instances (> 0) of the IoU with the predicted instance
/// overlapping it most. Falls back to foreground IoU if the truth has no
/// instances. Negative predicted labels count as empty.
double instance_iou(const LabelImage& predicted, const LabelImage& truth);

struct MemoryReport {
  std::uint64_t instance_bytes = 0;
  std::uint64_t per_element_bytes = 0;
  double ratio = 0;  // 0 when per_element_bytes is 0
};

/// Instance-based storage |instances| |L| 4 + |surfels| (4 + 4) against
/// per-surfel distributions |surfels| |L| 4.
MemoryReport memory_report(std::uint64_t surfels, std::uint64_t instances, std::uint64_t class_count);
MemoryReport memory_report(const SurfelMap& map, const InstanceTable& table);

struct EvalReport {
  std::optional<AteResult> ate;
  std::map<int, double> recon_per_object;
  std::optional<double> recon_overall;
  std::vector<double> iou_per_frame;
  std::optional<double> iou_mean;
  std::optional<MemoryReport> memory;
  std::vector<std::string> notes;

  std::string to_text() const;
  std::string to_kv() const;
};

}  // namespace semfusion
