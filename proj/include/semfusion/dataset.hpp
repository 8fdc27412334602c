#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semfusion/geometry.hpp"
#include "semfusion/image.hpp"

namespace semfusion {

namespace fs = std::filesystem;

/// Raw 16-bit TUM depth units per metre.
inline constexpr double kDepthScale = 5000.0;

struct TimedPose {
  double timestamp = 0;
  Pose pose;
};
using Trajectory = std::vector<TimedPose>;

struct SequenceEntry {
  double timestamp = 0;        // color timestamp
  double depth_timestamp = 0;
  fs::path color_path;
  fs::path depth_path;
  std::string frame_id;        // color file stem, keys the segmentation sidecar
  std::optional<fs::path> segmentation_path;
};

struct SequenceIndex {
  fs::path root;
  std::vector<SequenceEntry> entries;
  std::optional<Trajectory> ground_truth;
};

/// One detection: a binary mask plus its class distribution over L.
struct InstanceMask {
  MaskImage mask;
  std::vector<double> class_probs;

  std::size_t class_count() const { return class_probs.size(); }
  std::size_t area() const;
};

/// Output of the (offline) segmentation stage for one frame.
struct SegmentationFrame {
  std::vector<InstanceMask> masks;
  Image<double> soft_prob;  // empty when no sidecar was found
  double omega_rgb = 0.1;
  std::vector<std::string> classes;

  bool has_soft_prob() const { return !soft_prob.empty(); }

  /// Checks the documented invariants; throws ShapeMismatchError or
  /// ProbabilityRangeError.
  void validate() const;
};

/// Pairs timestamps greedily by increasing |ta - tb|, TUM associate style.
/// Returns index pairs sorted by the first index.
std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(
    const std::vector<double>& a, const std::vector<double>& b, double max_gap);

/// Loads rgb.txt / depth.txt (and groundtruth.txt when present). Sidecars are
/// looked up under `seg_dir` (default: <root>/seg).
SequenceIndex load_sequence(const fs::path& root, double max_time_gap = 0.02,
                            const std::optional<fs::path>& seg_dir = std::nullopt);

RgbdFrame load_frame(const SequenceEntry& entry);

/// Missing directory yields an empty frame carrying `default_omega`.
SegmentationFrame load_segmentation(const fs::path& dir, double default_omega = 0.1);
void save_segmentation(const SegmentationFrame& seg, const fs::path& dir);

/// Assigns pixels claimed by several masks to the mask with the highest class
/// probability peak; masks left empty are dropped.
std::vector<InstanceMask> resolve_overlaps(std::vector<InstanceMask> masks);

DepthImage read_depth_png(const fs::path& path);
void write_depth_png(const DepthImage& depth, const fs::path& path);
ColorImage read_color_png(const fs::path& path);
void write_color_png(const ColorImage& color, const fs::path& path);
Image<int> read_label_png(const fs::path& path);
void write_label_png(const Image<int>& labels, const fs::path& path);

/// TUM trajectory format: "timestamp tx ty tz qx qy qz qw".
Trajectory read_trajectory(const fs::path& path);
void write_trajectory(const Trajectory& traj, const fs::path& path);
std::string format_trajectory_line(const TimedPose& tp);

}  // namespace semfusion
