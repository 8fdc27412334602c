#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "semfusion/dataset.hpp"
#include "semfusion/geometry.hpp"

namespace semfusion::synth {

struct Sphere {
  Vec3 center;
  double radius = 0;
};

/// Square patch of half-size `extent` centred at `point`.
struct Plane {
  Vec3 point;
  Vec3 normal;
  double extent = 0;
};

/// Axis-aligned box.
struct Box {
  Vec3 center;
  Vec3 half_extents;
};

using Shape = std::variant<Sphere, Plane, Box>;

/// Two-colour checker with smoothed edges; `period` is the side of one square
/// in metres.
struct Checker {
  Rgb a{40, 40, 40};
  Rgb b{220, 220, 220};
  double period = 0.1;
};

using Albedo = std::variant<Rgb, Checker>;

struct ScenePrimitive {
  Shape shape;
  Albedo albedo = Rgb{180, 180, 180};
  int instance_id = 0;  // 0 = background
  int class_id = 0;
};

struct Scene {
  std::vector<ScenePrimitive> primitives;
  std::vector<std::string> classes{"background", "object"};

  void validate() const;
};

struct NoiseSpec {
  double sigma0 = 0.0;          // depth noise sigma(z) = sigma0 * z^2, metres
  std::uint64_t seed = 1;
  int mask_erode_px = 0;
  int mask_dilate_px = 0;
  double band_prob = 0.45;      // soft_prob assigned to the eroded band
  double omega_rgb = 0.1;
  double class_confidence = 0.9;

  static NoiseSpec structured_light() { NoiseSpec n; n.sigma0 = 0.0015; return n; }
  static NoiseSpec eroded_masks() { NoiseSpec n; n.mask_erode_px = 2; n.band_prob = 0.45; return n; }
};

struct RenderedFrame {
  RgbdFrame frame;
  SegmentationFrame segmentation;
  LabelImage true_instances;
};

struct Hit {
  double t = 0;       // ray parameter; equals z-depth for rays with unit z
  Vec3 point;
  Vec3 normal;
  int primitive = -1;
};

/// Closest point on the surface of `shape` (a plane is its square patch, a box
/// its six faces).
Vec3 closest_point(const Shape& shape, const Vec3& p);

/// Nearest intersection of origin + t * dir (t > 0) with the scene.
std::optional<Hit> raycast(const Scene& scene, const Vec3& origin, const Vec3& dir);

Rgb shade(const ScenePrimitive& prim, const Vec3& point, const Vec3& normal);

/// Raycasts every pixel. `frame_index` only perturbs the noise seed.
RenderedFrame render_frame(const Scene& scene, const Pose& pose, const Intrinsics& K,
                           const NoiseSpec& noise, int frame_index = 0);

/// Keyposes interpolated with linear translation and slerp rotation.
struct TrajectorySpec {
  std::vector<TimedPose> keyposes;

  void validate() const;
  Pose sample(double time) const;

  /// Constant body-frame motion: pose_{k+1} = pose_k * step, one keypose per
  /// frame.
  static TrajectorySpec constant_velocity(const Pose& start, const Pose& step, int frames,
                                          double frame_interval = 1.0 / 30.0, double t0 = 1.0);

  /// Body-frame step translating `translation` metres along `direction` and
  /// rotating `degrees` about `axis`.
  static Pose body_step(const Vec3& direction, double translation, const Vec3& axis, double degrees);
};

struct SequenceOptions {
  double frame_interval = 1.0 / 30.0;
};

/// Writes a TUM-layout sequence with segmentation sidecars under seg/,
/// true instance maps under truth/, camera.txt and scene.json.
Trajectory render_sequence(const Scene& scene, const TrajectorySpec& traj, const Intrinsics& K,
                           int frame_count, const NoiseSpec& noise, const fs::path& out_dir,
                           const SequenceOptions& opts = {});

void write_scene(const Scene& scene, const fs::path& path);
Scene read_scene(const fs::path& path);

void write_camera(const Intrinsics& K, const fs::path& path);
Intrinsics read_camera(const fs::path& path);

/// Chessboard distance of every pixel to the nearest pixel with mask == 0
/// (inside) or mask != 0 (outside).
Image<int> chessboard_distance(const MaskImage& mask, bool inside);

MaskImage erode(const MaskImage& mask, int px);
MaskImage dilate(const MaskImage& mask, int px);

// Preset scenes used by tests and the CLI.

/// Checker-textured back plane with two spheres in front.
Scene textured_plane_with_spheres();
/// Flat wall with checker colouring and no other geometry.
Scene textureless_wall();
/// Uniform grey spheres and boxes on a grey back plane.
Scene colorless_structured();
/// Two sphere objects in front of a back plane.
Scene objects_on_plane();

Intrinsics default_intrinsics(int width = 320, int height = 240);

}  // namespace semfusion::synth
