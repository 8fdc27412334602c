#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "semfusion/geometry.hpp"
#include "semfusion/surfel_map.hpp"

namespace semfusion {

struct RegistrationConfig {
  int levels = 3;
  std::vector<int> iterations{4, 5, 10};  // coarse -> fine
  double omega_rgb_default = 0.1;
  double convergence_eps = 1e-6;          // twist norm
  double huber_delta_icp = 0.05;          // metres
  double huber_delta_rgb = 25.0 / 255.0;  // intensity units
  int min_valid_correspondences = 100;
  double max_correspondence_distance = 0.1;  // metres
  double max_normal_angle_deg = 30.0;
  int max_step_halvings = 5;

  void validate() const;
};

/// One pyramid level of the live frame, with the derived maps the residuals
/// need.
struct FrameLevel {
  Intrinsics K;
  DepthImage depth;
  Image<double> intensity;
  Image<Vec3> vertices;  // camera frame
  Image<Vec3> normals;   // camera frame
};

FrameLevel make_frame_level(const RgbdFrame& frame, const Intrinsics& K);
std::vector<FrameLevel> make_frame_pyramid(const RgbdFrame& frame, const Intrinsics& K, int levels);

/// Projective correspondence between a live pixel and a model-view pixel.
struct IcpPair {
  int frame_pixel;
  int model_pixel;
};

using JacobianRows = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>;

/// Residuals and their Jacobians w.r.t. the left-multiplied twist increment.
struct ResidualSet {
  Eigen::VectorXd r;
  JacobianRows J;
  std::vector<char> valid;               // false where the sample left the image
  std::vector<Eigen::Vector2d> samples;  // photometric sample locations

  std::size_t size() const { return static_cast<std::size_t>(r.size()); }
};

/// Projective data association of live vertices (placed at `pose`) into the
/// model view, gated on distance and normal angle.
std::vector<IcpPair> icp_associate(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                                   const RegistrationConfig& cfg);

/// r = n_model . (pose * p_frame - p_model) for fixed pairs.
ResidualSet icp_evaluate(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                         std::span<const IcpPair> pairs);

/// Associate + evaluate. Throws InsufficientCorrespondencesError.
ResidualSet icp_residuals(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                          const RegistrationConfig& cfg);

/// Model pixels whose vertex projects into the live image at `pose` onto a
/// consistent live depth.
std::vector<int> rgb_select(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                            const RegistrationConfig& cfg);

/// r = I_live(pi(K * pose^-1 * p_model)) - I_model(u), bilinear sampling,
/// for fixed model pixels.
ResidualSet rgb_evaluate(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                         std::span<const int> model_pixels);

/// Select + evaluate. Throws InsufficientCorrespondencesError.
ResidualSet rgb_residuals(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                          const RegistrationConfig& cfg);

/// Huber-robustified mean of squared residuals: rho(r) = r^2 inside delta,
/// 2 delta |r| - delta^2 outside.
double robust_mean_cost(const ResidualSet& rs, double delta);

struct RegistrationResult {
  Pose pose;
  double final_cost = 0;
  double icp_cost = 0;
  double rgb_cost = 0;
  double omega_rgb = 0;
  std::size_t correspondence_count = 0;  // geometric pairs at the returned pose
  std::size_t photometric_count = 0;
  bool converged = false;          // finest level stopped on the twist-norm test
  bool hit_iteration_cap = false;  // finest level ran out of iterations
  double initial_gradient_norm = 0;  // finest level, first iteration
  double gradient_norm = 0;          // at the returned pose
  int iterations = 0;
};

/// Minimises E_icp + omega * E_rgb coarse-to-fine by Gauss-Newton with step
/// halving, starting from `prev_pose`. `views[l]` is the model rendered at
/// level l. Throws TrackingLostError.
RegistrationResult solve(std::span<const FrameLevel> frame, std::span<const ModelView> views,
                         const Pose& prev_pose, double omega_rgb, const RegistrationConfig& cfg);

/// Renders the active map at `prev_pose` for every level and solves.
RegistrationResult solve(const RgbdFrame& frame, const SurfelMap& map, const Intrinsics& K,
                         const Pose& prev_pose, double omega_rgb, const RegistrationConfig& cfg);

/// Geometric-only variant (omega = 0).
RegistrationResult solve_icp_only(std::span<const FrameLevel> frame, std::span<const ModelView> views,
                                  const Pose& prev_pose, const RegistrationConfig& cfg);

std::vector<ModelView> render_model_pyramid(const SurfelMap& map, const Pose& pose, const Intrinsics& K,
                                            int levels);

}  // namespace semfusion
