#include "semfusion/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "semfusion/errors.hpp"

namespace semfusion {

void Intrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw DimensionError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DimensionError("image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw DimensionError("principal point outside the image");
}

Intrinsics Intrinsics::scaled(int level) const {
  Intrinsics k = *this;
  for (int i = 0; i < level; ++i) {
    k.fx *= 0.5;
    k.fy *= 0.5;
    k.cx = (k.cx + 0.5) * 0.5 - 0.5;
    k.cy = (k.cy + 0.5) * 0.5 - 0.5;
    k.width /= 2;
    k.height /= 2;
  }
  return k;
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!((rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-9) ||
      !(std::abs(rotation_.determinant() - 1.0) <= 1e-9))
    throw std::invalid_argument("Pose: rotation is not orthonormal with det +1");
}

Pose Pose::from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation) {
  Pose p;
  p.rotation_ = q.normalized().toRotationMatrix();
  p.translation_ = translation;
  return p.renormalized();
}

Pose Pose::exp(const Vec6& twist) {
  const Vec3 rho = twist.head<3>();
  const Vec3 omega = twist.tail<3>();
  const double theta = omega.norm();
  const Mat3 w = skew(omega);
  const Mat3 w2 = w * w;
  double a, b, c;  // sin(t)/t, (1-cos t)/t^2, (t - sin t)/t^3
  if (theta < 1e-5) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
    c = 1.0 / 6.0 - t2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
    c = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  Pose p;
  p.rotation_ = Mat3::Identity() + a * w + b * w2;
  p.translation_ = (Mat3::Identity() + b * w + c * w2) * rho;
  return p;
}

Vec6 Pose::log() const {
  const Eigen::AngleAxisd aa(rotation_);
  const Vec3 omega = aa.axis() * aa.angle();
  const double theta = aa.angle();
  const Mat3 w = skew(omega);
  Mat3 v_inv;
  if (theta < 1e-5) {
    v_inv = Mat3::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
  } else {
    const double half = 0.5 * theta;
    const double k = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
    v_inv = Mat3::Identity() - 0.5 * w + k * w * w;
  }
  Vec6 xi;
  xi.head<3>() = v_inv * translation_;
  xi.tail<3>() = omega;
  return xi;
}

Eigen::Quaterniond Pose::quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::operator*(const Pose& other) const {
  Pose p;
  p.rotation_ = rotation_ * other.rotation_;
  p.translation_ = rotation_ * other.translation_ + translation_;
  return p;
}

Pose Pose::inverse() const {
  Pose p;
  p.rotation_ = rotation_.transpose();
  p.translation_ = -(p.rotation_ * translation_);
  return p;
}

Pose Pose::applied(const Vec6& twist) const { return (exp(twist) * *this).renormalized(); }

Pose Pose::projected(const Mat3& approx_rotation, const Vec3& translation) {
  Pose p;
  p.rotation_ = approx_rotation;
  p.translation_ = translation;
  return p.renormalized();
}

Pose Pose::renormalized() const {
  Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1;
    r = u * svd.matrixV().transpose();
  }
  Pose p;
  p.rotation_ = r;
  p.translation_ = translation_;
  return p;
}

bool Pose::is_finite() const { return rotation_.allFinite() && translation_.allFinite(); }

double rotation_angle(const Pose& a, const Pose& b) {
  const Mat3 rel = a.rotation().transpose() * b.rotation();
  const double c = std::clamp((rel.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

void RgbdFrame::validate(const Intrinsics& K, double depth_max) const {
  if (color.width() != K.width || color.height() != K.height || depth.width() != K.width ||
      depth.height() != K.height)
    throw DimensionError("frame dimensions do not match the intrinsics");
  for (double d : depth.pixels()) {
    if (d != 0.0 && !(d > 0.0 && d < depth_max))
      throw InvalidDepthError("depth value outside (0, depth_max): " + std::to_string(d));
  }
}

Vec3 back_project(const PixelCoord& u, double depth, const Intrinsics& K) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw InvalidDepthError("back_project: depth must be positive and finite");
  return {(u.u - K.cx) * depth / K.fx, (u.v - K.cy) * depth / K.fy, depth};
}

PixelCoord project(const Vec3& p, const Intrinsics& K) {
  if (!(p.z() > 0.0)) throw BehindCameraError("project: point is not in front of the camera");
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

namespace {

RgbdFrame downsample(const RgbdFrame& in) {
  const int w = in.width() / 2, h = in.height() / 2;
  RgbdFrame out;
  out.timestamp = in.timestamp;
  out.depth = DepthImage(w, h, 0.0);
  out.color = ColorImage(w, h, Rgb::Zero());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 4> d{};
      int n = 0;
      Eigen::Vector3i sum = Eigen::Vector3i::Zero();
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          const double z = in.depth(sx, sy);
          if (z > 0.0) d[n++] = z;
          sum += in.color(sx, sy).cast<int>();
        }
      }
      if (n > 0) {
        std::sort(d.begin(), d.begin() + n);
        out.depth(x, y) = d[(n - 1) / 2];
      }
      // Rounded box average.
      out.color(x, y) = ((sum + Eigen::Vector3i::Constant(2)) / 4).cast<unsigned char>();
    }
  }
  return out;
}

}  // namespace

std::vector<RgbdFrame> build_pyramid(const RgbdFrame& frame, int levels) {
  if (levels < 1) throw DimensionError("pyramid needs at least one level");
  const int div = 1 << (levels - 1);
  if (frame.width() % div != 0 || frame.height() % div != 0)
    throw DimensionError("frame dimensions not divisible by 2^(levels-1)");
  if (!frame.color.same_shape(frame.depth)) throw DimensionError("color/depth size mismatch");
  std::vector<RgbdFrame> out;
  out.reserve(levels);
  out.push_back(frame);
  for (int l = 1; l < levels; ++l) out.push_back(downsample(out.back()));
  return out;
}

std::vector<Intrinsics> pyramid_intrinsics(const Intrinsics& K, int levels) {
  std::vector<Intrinsics> out;
  for (int l = 0; l < levels; ++l) out.push_back(K.scaled(l));
  return out;
}

VertexNormalMaps compute_vertex_normals(const DepthImage& depth, const Intrinsics& K) {
  const int w = depth.width(), h = depth.height();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  VertexNormalMaps m{Image<Vec3>(w, h, Vec3::Constant(nan)), Image<Vec3>(w, h, Vec3::Constant(nan))};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (const double d = depth(x, y); d > 0.0) m.vertices(x, y) = back_project({double(x), double(y)}, d, K);

  // One-sided differences toward the neighbour with the smaller depth jump,
  // so pixels on a depth edge still get the normal of their own surface.
  auto edge = [&](int x, int y, int dx, int dy, Vec3& out) {
    const Vec3& c = m.vertices(x, y);
    const int xf = x + dx, yf = y + dy, xb = x - dx, yb = y - dy;
    const bool fwd = depth.contains(xf, yf) && depth(xf, yf) > 0.0;
    const bool bwd = depth.contains(xb, yb) && depth(xb, yb) > 0.0;
    const double limit = 0.05 + 0.05 * c.z();
    const double jf = fwd ? std::abs(depth(xf, yf) - c.z()) : 1e9;
    const double jb = bwd ? std::abs(depth(xb, yb) - c.z()) : 1e9;
    if (std::min(jf, jb) > limit) return false;
    out = jf <= jb ? Vec3(m.vertices(xf, yf) - c) : Vec3(c - m.vertices(xb, yb));
    return true;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(depth(x, y) > 0.0)) continue;
      Vec3 du, dv;
      if (!edge(x, y, 1, 0, du) || !edge(x, y, 0, 1, dv)) continue;
      Vec3 n = du.cross(dv);
      const double len = n.norm();
      if (!(len > 0.0)) continue;
      n /= len;
      if (n.dot(m.vertices(x, y)) > 0.0) n = -n;
      m.normals(x, y) = n;
    }
  }
  return m;
}

Image<double> to_intensity(const ColorImage& color) {
  Image<double> out(color.width(), color.height(), 0.0);
  for (std::size_t i = 0; i < color.size(); ++i) out[i] = intensity(color[i]);
  return out;
}

bool sample_bilinear(const Image<double>& img, double u, double v, double& value,
                     Eigen::Vector2d* grad) {
  if (!(u >= 0.0 && v >= 0.0 && u < img.width() - 1 && v < img.height() - 1)) return false;
  const int x0 = static_cast<int>(u), y0 = static_cast<int>(v);
  const double fx = u - x0, fy = v - y0;
  const double i00 = img(x0, y0), i10 = img(x0 + 1, y0);
  const double i01 = img(x0, y0 + 1), i11 = img(x0 + 1, y0 + 1);
  value = (1 - fy) * ((1 - fx) * i00 + fx * i10) + fy * ((1 - fx) * i01 + fx * i11);
  if (grad) {
    (*grad)[0] = (1 - fy) * (i10 - i00) + fy * (i11 - i01);
    (*grad)[1] = (1 - fx) * (i01 - i00) + fx * (i11 - i10);
  }
  return true;
}

}  // namespace semfusion
