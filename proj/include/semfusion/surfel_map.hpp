#pragma once

#include <filesystem>
#include <vector>

#include "semfusion/geometry.hpp"
#include "semfusion/image.hpp"

namespace semfusion {

inline constexpr int kBackground = 0;

struct Surfel {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Rgb color = Rgb::Zero();
  double weight = 0;
  double radius = 0.001;
  int t0 = 0;  // frame index of creation
  int t = 0;   // frame index of last update
  int label = kBackground;
  bool active = true;

  // Semantic state, see instance_fusion.hpp / seg_refine.hpp.
  double p_object = 0;   // running mean non-background probability p_o
  int p_count = 0;
  int confidence = 0;    // refinement counter
  bool promoted = false;

  bool is_object() const { return label != kBackground; }
};

struct FusionParams {
  double delta_depth = 0.05;       // metres
  double delta_angle_deg = 20.0;
  double weight_cap = 100.0;
  double min_radius = 0.001;
  double max_radius = 0.05;
  double carve_margin = 0.05;      // metres; 0 disables free-space carving
  int inactive_window = 200;       // frames
  double splat_depth_tolerance = 0.01;  // metres; rendering treats closer depths as ties
};

/// Per-pixel predictions rendered from the map.
struct ModelView {
  Pose pose;           // camera-to-world pose the view was rendered at
  Intrinsics K;
  DepthImage depth;    // camera z of the winning surfel, 0 where empty
  ColorImage color;
  Image<double> intensity;
  Image<Vec3> vertex;  // world frame
  Image<Vec3> normal;  // world frame
  LabelImage index;    // surfel index, -1 where empty
  LabelImage instance; // instance label of the winning surfel, -1 where empty

  bool valid(int x, int y) const { return index(x, y) >= 0; }
};

struct FusionReport {
  std::size_t updated = 0;
  std::size_t created = 0;
  std::size_t removed = 0;
};

class SurfelMap {
 public:
  explicit SurfelMap(FusionParams params = {}) : params_(params) {}

  const FusionParams& params() const { return params_; }
  const std::vector<Surfel>& surfels() const { return surfels_; }
  std::vector<Surfel>& surfels() { return surfels_; }
  std::size_t size() const { return surfels_.size(); }
  bool empty() const { return surfels_.empty(); }

  void add(const Surfel& s) { surfels_.push_back(s); }
  void set_label(std::size_t i, int label);

 private:
  FusionParams params_;
  std::vector<Surfel> surfels_;
};

/// Splats every (optionally only active) surfel as its oriented disk. The
/// nearest surfel wins; surfels within the depth tolerance of each other
/// compete on image distance from their projected centre.
ModelView render_model(const SurfelMap& map, const Pose& pose, const Intrinsics& K, bool active_only = false);

/// Radius of a new surfel observed at depth `depth` with camera-frame normal
/// z component `normal_z`.
double surfel_radius(double depth, double normal_z, double focal, const FusionParams& p);

/// Confidence-weighted running average of one observation into `s` (unit
/// observation weight, weight capped at params.weight_cap).
void integrate_observation(Surfel& s, const Vec3& position, const Vec3& normal, const Rgb& color,
                           double radius, int frame_index, const FusionParams& params);

/// Integrates a registered frame. `instance_map` (optional) labels newly
/// created surfels; existing labels are never changed here.
FusionReport fuse_frame(SurfelMap& map, const RgbdFrame& frame, const Pose& pose, const Intrinsics& K,
                        int frame_index, const LabelImage* instance_map = nullptr);

/// Flags background surfels not updated for more than `window` frames as
/// inactive. Object surfels always stay active.
std::size_t mark_inactive(SurfelMap& map, int frame_index, int window);

void export_ply(const SurfelMap& map, const std::filesystem::path& path);
void export_ply(const std::vector<Surfel>& surfels, const std::filesystem::path& path);
std::vector<Surfel> load_ply(const std::filesystem::path& path);

}  // namespace semfusion
