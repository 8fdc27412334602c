#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "semfusion/image.hpp"

namespace semfusion {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Pinhole camera. Pixel (x, y) integer coordinates address pixel centres.
struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  /// Throws DimensionError when the invariants do not hold.
  void validate() const;

  /// Intrinsics of a pyramid level `level` steps coarser than this one.
  Intrinsics scaled(int level) const;

  Mat3 matrix() const;
};

struct PixelCoord {
  double u = 0, v = 0;
};

/// Rigid-body transform. The rotation is kept orthonormal with det +1.
///
/// Twist convention: a 6-vector [translation; rotation] applied as a
/// left-multiplied increment, T' = exp(xi) * T.
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return {}; }
  static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation);
  static Pose exp(const Vec6& twist);
  /// Nearest proper rotation to `approx_rotation` (no orthonormality check).
  static Pose projected(const Mat3& approx_rotation, const Vec3& translation);

  /// Inverse of exp; returns [translation part; rotation vector].
  Vec6 log() const;

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }
  Eigen::Quaterniond quaternion() const;
  Eigen::Matrix4d matrix() const;

  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }
  Pose operator*(const Pose& other) const;
  Pose inverse() const;

  /// exp(twist) * this, followed by orthogonal re-projection of the rotation.
  Pose applied(const Vec6& twist) const;

  /// Projects the rotation back onto SO(3) (nearest orthonormal matrix).
  Pose renormalized() const;

  bool is_finite() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Angle (radians) of the relative rotation between two poses.
double rotation_angle(const Pose& a, const Pose& b);

Mat3 skew(const Vec3& v);

/// Timestamped color + depth. Depth is z-depth in metres; 0 marks invalid.
struct RgbdFrame {
  double timestamp = 0;
  ColorImage color;
  DepthImage depth;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  void validate(const Intrinsics& K, double depth_max = 6.0) const;
};

inline constexpr double kDefaultDepthMax = 6.0;

/// p(u, D) = K^-1 * [u, 1] * d(u). Throws InvalidDepthError on depth <= 0 or
/// non-finite depth.
Vec3 back_project(const PixelCoord& u, double depth, const Intrinsics& K);

/// u = pi(K p). Throws BehindCameraError when p.z <= 0.
PixelCoord project(const Vec3& p, const Intrinsics& K);

/// Level 0 is the input; each further level halves both dimensions. Depth is
/// downsampled by the median of the valid samples of each 2x2 block (lower
/// median for even counts, so the result is always a measured value) and
/// color by box average.
std::vector<RgbdFrame> build_pyramid(const RgbdFrame& frame, int levels);

/// Intrinsics matching each level of build_pyramid.
std::vector<Intrinsics> pyramid_intrinsics(const Intrinsics& K, int levels);

/// Camera-frame vertex and normal maps of a depth image. Invalid entries are
/// NaN. Normals face the camera.
struct VertexNormalMaps {
  Image<Vec3> vertices;
  Image<Vec3> normals;
};
VertexNormalMaps compute_vertex_normals(const DepthImage& depth, const Intrinsics& K);

/// Grayscale intensity in [0, 1].
Image<double> to_intensity(const ColorImage& color);

/// Bilinear sample of `img` at continuous (u, v); returns false outside the
/// interpolable domain [0, w-1) x [0, h-1). `grad` receives the exact
/// derivative of the interpolant.
bool sample_bilinear(const Image<double>& img, double u, double v, double& value,
                     Eigen::Vector2d* grad = nullptr);

}  // namespace semfusion
