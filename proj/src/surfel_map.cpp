#include "semfusion/surfel_map.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "semfusion/errors.hpp"

namespace semfusion {

void SurfelMap::set_label(std::size_t i, int label) {
  auto& s = surfels_.at(i);
  s.label = label;
  if (label != kBackground) s.active = true;
}

ModelView render_model(const SurfelMap& map, const Pose& pose, const Intrinsics& K, bool active_only) {
  const int w = K.width, h = K.height;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ModelView v;
  v.pose = pose;
  v.K = K;
  v.depth = DepthImage(w, h, 0.0);
  v.color = ColorImage(w, h, Rgb::Zero());
  v.intensity = Image<double>(w, h, 0.0);
  v.vertex = Image<Vec3>(w, h, Vec3::Constant(nan));
  v.normal = Image<Vec3>(w, h, Vec3::Constant(nan));
  v.index = LabelImage(w, h, -1);
  v.instance = LabelImage(w, h, -1);

  const Pose world_to_cam = pose.inverse();
  const auto& surfels = map.surfels();
  const double tol = map.params().splat_depth_tolerance;
  Image<double> dist2(w, h, 0.0);
  DepthImage zbuf(w, h, 0.0);
  Image<double> rbuf(w, h, 0.0);
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    const Surfel& s = surfels[i];
    if (active_only && !s.active) continue;
    const Vec3 q = world_to_cam * s.position;
    if (!(q.z() > 1e-6)) continue;
    const double u = K.fx * q.x() / q.z() + K.cx;
    const double vv = K.fy * q.y() / q.z() + K.cy;
    const double rad = s.radius * K.fx / q.z();
    int x0 = static_cast<int>(std::ceil(u - rad)), x1 = static_cast<int>(std::floor(u + rad));
    int y0 = static_cast<int>(std::ceil(vv - rad)), y1 = static_cast<int>(std::floor(vv + rad));
    if (x0 > x1 || y0 > y1) {
      // Sub-pixel disk: cover the pixel containing the centre.
      x0 = x1 = static_cast<int>(std::lround(u));
      y0 = y1 = static_cast<int>(std::lround(vv));
    }
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, w - 1);
    y1 = std::min(y1, h - 1);
    const int xc = static_cast<int>(std::lround(u)), yc = static_cast<int>(std::lround(vv));
    // footprint: pixel rays that meet the surfel's disk
    const Vec3 n = world_to_cam.rotation() * s.normal;
    const double nq = n.dot(q);
    const double r2 = s.radius * s.radius;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        // depth where the pixel ray meets the disk
        const Vec3 d((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
        const double nd = n.dot(d);
        double hit = q.z();
        if (std::abs(nd) >= 1e-9) hit = nq / nd;
        if (x != xc || y != yc) {
          if (std::abs(nd) < 1e-9) continue;
          if ((d * hit - q).squaredNorm() > r2) continue;
        } else if (!(hit > 0)) {
          hit = q.z();
        }
        // hits closer than the tolerance or either disk's radius count as
        // the same surface; then the surfel centred closer to the pixel wins,
        // so a disk does not hide its neighbours' own pixels
        double& z = zbuf(x, y);
        const double d2 = (x - u) * (x - u) + (y - vv) * (y - vv);
        if (z > 0.0) {
          const double band = std::max({tol, s.radius, rbuf(x, y)});
          if (hit > z + band) continue;
          if (hit >= z - band && d2 >= dist2(x, y)) continue;
        }
        z = hit;
        rbuf(x, y) = s.radius;
        dist2(x, y) = d2;
        v.depth(x, y) = q.z();
        v.index(x, y) = static_cast<int>(i);
      }
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = v.index(x, y);
      if (i < 0) continue;
      const Surfel& s = surfels[i];
      v.color(x, y) = s.color;
      v.intensity(x, y) = intensity(s.color);
      v.vertex(x, y) = s.position;
      v.normal(x, y) = s.normal;
      v.instance(x, y) = s.label;
    }
  return v;
}

double surfel_radius(double depth, double normal_z, double focal, const FusionParams& p) {
  const double nz = std::max(std::abs(normal_z), 1e-6);
  return std::clamp(depth * std::numbers::sqrt2 / (focal * nz), p.min_radius, p.max_radius);
}

void integrate_observation(Surfel& s, const Vec3& p, const Vec3& n, const Rgb& c, double radius, int frame_index,
               const FusionParams& prm) {
  constexpr double w_new = 1.0;
  const double w = s.weight;
  const double tot = w + w_new;
  s.position = (w * s.position + w_new * p) / tot;
  const Vec3 navg = w * s.normal + w_new * n;
  if (navg.norm() > 1e-12) s.normal = navg.normalized();
  const Eigen::Vector3d col = (w * s.color.cast<double>() + w_new * c.cast<double>()) / tot;
  s.color = col.array().round().cwiseMax(0.0).cwiseMin(255.0).cast<unsigned char>().matrix();
  s.radius = std::min(s.radius, radius);
  s.weight = std::min(tot, prm.weight_cap);
  s.t = frame_index;
}

FusionReport fuse_frame(SurfelMap& map, const RgbdFrame& frame, const Pose& pose, const Intrinsics& K,
                        int frame_index, const LabelImage* instance_map) {
  const auto& prm = map.params();
  const int w = K.width, h = K.height;
  if (frame.width() != w || frame.height() != h) throw DimensionError("fuse_frame: frame/intrinsics size mismatch");
  if (!pose.is_finite()) throw std::invalid_argument("fuse_frame: non-finite pose");
  if (instance_map && (instance_map->width() != w || instance_map->height() != h))
    throw DimensionError("fuse_frame: instance map size mismatch");

  const auto vn = compute_vertex_normals(frame.depth, K);
  const ModelView view = render_model(map, pose, K, /*active_only=*/true);
  const double cos_angle = std::cos(prm.delta_angle_deg * std::numbers::pi / 180.0);
  const Pose world_to_cam = pose.inverse();

  auto& surfels = map.surfels();
  const std::size_t before = surfels.size();

  // Each matched surfel is updated once, by the pixel closest to its
  // projected centre; the other pixels that hit it are absorbed.
  constexpr double kNone = std::numeric_limits<double>::infinity();
  std::vector<double> best_dist(before, kNone);
  std::vector<int> best_pixel(before, -1);
  std::vector<Surfel> created;

  // Surfels bucketed by the pixel of their projected centre. The rendered
  // winner alone misses surfels hidden behind an oblique disk overhanging a
  // silhouette.
  std::vector<int> bucket_start(static_cast<std::size_t>(w) * h + 1, 0);
  std::vector<int> bucket;
  {
    std::vector<int> pix_of(before, -1);
    for (std::size_t i = 0; i < before; ++i) {
      if (!surfels[i].active) continue;
      const Vec3 q = world_to_cam * surfels[i].position;
      if (!(q.z() > 0)) continue;
      const long x = std::lround(K.fx * q.x() / q.z() + K.cx);
      const long y = std::lround(K.fy * q.y() / q.z() + K.cy);
      if (x < 0 || y < 0 || x >= w || y >= h) continue;
      pix_of[i] = static_cast<int>(y * w + x);
      ++bucket_start[pix_of[i] + 1];
    }
    for (std::size_t k = 1; k < bucket_start.size(); ++k) bucket_start[k] += bucket_start[k - 1];
    bucket.resize(bucket_start.back());
    std::vector<int> fill(bucket_start.begin(), bucket_start.end() - 1);
    for (std::size_t i = 0; i < before; ++i)
      if (pix_of[i] >= 0) bucket[fill[pix_of[i]]++] = static_cast<int>(i);
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3& pc = vn.vertices(x, y);
      const Vec3& nc = vn.normals(x, y);
      if (!pc.allFinite() || !nc.allFinite()) continue;
      const Vec3 pw = pose * pc;
      const Vec3 nw = pose.rotation() * nc;
      // Surfels centred on this pixel come first, then the rendered winner.
      int idx = -1;
      const int pix = y * w + x;
      double best = prm.delta_depth;
      for (int k = bucket_start[pix]; k < bucket_start[pix + 1]; ++k) {
        const Surfel& c = surfels[bucket[k]];
        const double dz = std::abs(pc.z() - (world_to_cam * c.position).z());
        if (dz < best && c.normal.dot(nw) > cos_angle) {
          best = dz;
          idx = bucket[k];
        }
      }
      if (idx < 0) {
        const int v = view.index(x, y);
        if (v >= 0 && std::abs(pc.z() - view.depth(x, y)) < prm.delta_depth && surfels[v].normal.dot(nw) > cos_angle)
          idx = v;
      }
      if (idx >= 0) {
        const Vec3 q = world_to_cam * surfels[idx].position;
        const double du = K.fx * q.x() / q.z() + K.cx - x;
        const double dv = K.fy * q.y() / q.z() + K.cy - y;
        const double d2 = du * du + dv * dv;
        if (d2 < best_dist[idx]) {
          best_dist[idx] = d2;
          best_pixel[idx] = static_cast<int>(frame.depth.index(x, y));
        }
        continue;
      }
      Surfel s;
      s.position = pw;
      s.normal = nw;
      s.color = frame.color(x, y);
      s.weight = 1.0;
      s.radius = surfel_radius(pc.z(), nc.z(), K.fx, prm);
      s.t0 = s.t = frame_index;
      s.label = instance_map ? std::max((*instance_map)(x, y), 0) : kBackground;
      created.push_back(s);
    }
  }

  FusionReport report;
  for (std::size_t i = 0; i < before; ++i) {
    const int pix = best_pixel[i];
    if (pix < 0) continue;
    const int x = pix % w, y = pix / w;
    const Vec3& pc = vn.vertices(x, y);
    const Vec3& nc = vn.normals(x, y);
    integrate_observation(surfels[i], pose * pc, pose.rotation() * nc, frame.color(x, y),
              surfel_radius(pc.z(), nc.z(), K.fx, prm), frame_index, prm);
    ++report.updated;
  }

  // Free-space carving: drop surfels that the new depth sees through. All
  // 3x3 neighbours must agree so silhouettes are not eaten away.
  if (prm.carve_margin > 0) {
    std::vector<char> keep(before, 1);
    for (std::size_t i = 0; i < before; ++i) {
      const Surfel& s = surfels[i];
      if (!s.active || best_pixel[i] >= 0) continue;
      const Vec3 q = world_to_cam * s.position;
      if (!(q.z() > 0)) continue;
      const int x = static_cast<int>(std::lround(K.fx * q.x() / q.z() + K.cx));
      const int y = static_cast<int>(std::lround(K.fy * q.y() / q.z() + K.cy));
      if (x < 1 || y < 1 || x >= w - 1 || y >= h - 1) continue;
      bool free = true;
      for (int dy = -1; dy <= 1 && free; ++dy)
        for (int dx = -1; dx <= 1 && free; ++dx) {
          const double d = frame.depth(x + dx, y + dy);
          free = d > 0.0 && d > q.z() + prm.carve_margin;
        }
      if (free) keep[i] = 0;
    }
    std::size_t out = 0;
    for (std::size_t i = 0; i < before; ++i) {
      if (!keep[i]) continue;
      if (out != i) surfels[out] = surfels[i];
      ++out;
    }
    report.removed = before - out;
    surfels.resize(out);
  }

  report.created = created.size();
  surfels.insert(surfels.end(), created.begin(), created.end());
  return report;
}

std::size_t mark_inactive(SurfelMap& map, int frame_index, int window) {
  std::size_t n = 0;
  for (auto& s : map.surfels()) {
    if (s.is_object()) {
      s.active = true;
      continue;
    }
    if (s.active && frame_index - s.t > window) {
      s.active = false;
      ++n;
    }
  }
  return n;
}

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void export_ply(const SurfelMap& map, const std::filesystem::path& path) { export_ply(map.surfels(), path); }

void export_ply(const std::vector<Surfel>& surfels, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\n"
         "format ascii 1.0\n"
         "comment surfel map export\n"
         "comment x y z: position in metres (world frame)\n"
         "comment nx ny nz: unit surface normal\n"
         "comment red green blue: fused surfel colour\n"
         "comment radius: disk radius in metres\n"
         "comment instance: object instance id, 0 = background\n"
      << "element vertex " << surfels.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
         "property double nx\nproperty double ny\nproperty double nz\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\n"
         "property double radius\n"
         "property int instance\n"
         "end_header\n";
  for (const auto& s : surfels) {
    out << num(s.position.x()) << ' ' << num(s.position.y()) << ' ' << num(s.position.z()) << ' '
        << num(s.normal.x()) << ' ' << num(s.normal.y()) << ' ' << num(s.normal.z()) << ' ' << int(s.color[0])
        << ' ' << int(s.color[1]) << ' ' << int(s.color[2]) << ' ' << num(s.radius) << ' ' << s.label << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Surfel> load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  long count = -1;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line != "ply") throw ParseError(path.string(), lineno, "not a PLY file");
    if (line.rfind("format", 0) == 0 && line != "format ascii 1.0")
      throw ParseError(path.string(), lineno, "only ASCII PLY is supported");
    if (line.rfind("element vertex", 0) == 0) count = std::stol(line.substr(15));
    if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done || count < 0) throw ParseError(path.string(), lineno, "missing PLY header");
  std::vector<Surfel> out;
  out.reserve(count);
  for (long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError(path.string(), lineno, "truncated vertex list");
    ++lineno;
    std::istringstream ss(line);
    Surfel s;
    int r, g, b;
    if (!(ss >> s.position.x() >> s.position.y() >> s.position.z() >> s.normal.x() >> s.normal.y() >>
          s.normal.z() >> r >> g >> b >> s.radius >> s.label))
      throw ParseError(path.string(), lineno, "malformed vertex");
    s.color = Rgb(static_cast<unsigned char>(r), static_cast<unsigned char>(g), static_cast<unsigned char>(b));
    s.weight = 1.0;
    out.push_back(s);
  }
  return out;
}

}  // namespace semfusion
