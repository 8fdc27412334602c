#include "semfusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <type_traits>

#include "json.hpp"

#include "semfusion/errors.hpp"

namespace semfusion::synth {

namespace {

constexpr double kEps = 1e-9;

struct PlaneAxes {
  Vec3 u, v;
};

PlaneAxes plane_axes(const Vec3& n) {
  const Vec3 ref = std::abs(n.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  const Vec3 u = n.cross(ref).normalized();
  return {u, n.cross(u)};
}

std::optional<Hit> intersect(const Sphere& s, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - s.center;
  const double a = d.squaredNorm();
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / a;
  if (t <= kEps) t = (-b + sq) / a;
  if (t <= kEps) return std::nullopt;
  Hit h;
  h.t = t;
  h.point = o + t * d;
  h.normal = (h.point - s.center).normalized();
  return h;
}

std::optional<Hit> intersect(const Plane& p, const Vec3& o, const Vec3& d) {
  const Vec3 n = p.normal.normalized();
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = n.dot(p.point - o) / denom;
  if (t <= kEps) return std::nullopt;
  const Vec3 x = o + t * d;
  const auto ax = plane_axes(n);
  if (std::abs(ax.u.dot(x - p.point)) > p.extent || std::abs(ax.v.dot(x - p.point)) > p.extent)
    return std::nullopt;
  return Hit{t, x, n, -1};
}

std::optional<Hit> intersect(const Box& b, const Vec3& o, const Vec3& d) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis_min = -1, axis_max = -1;
  for (int i = 0; i < 3; ++i) {
    const double lo = b.center[i] - b.half_extents[i], hi = b.center[i] + b.half_extents[i];
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo || o[i] > hi) return std::nullopt;
      continue;
    }
    double t1 = (lo - o[i]) / d[i], t2 = (hi - o[i]) / d[i];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > tmin) { tmin = t1; axis_min = i; }
    if (t2 < tmax) { tmax = t2; axis_max = i; }
  }
  if (tmin > tmax) return std::nullopt;
  double t = tmin;
  int axis = axis_min;
  if (t <= kEps) { t = tmax; axis = axis_max; }
  if (t <= kEps || axis < 0) return std::nullopt;
  Hit h;
  h.t = t;
  h.point = o + t * d;
  h.normal = Vec3::Zero();
  h.normal[axis] = h.point[axis] > b.center[axis] ? 1.0 : -1.0;
  return h;
}

double smooth_square(double x, double period) {
  return std::tanh(3.0 * std::sin(std::numbers::pi * x / period));
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  const Eigen::Vector3d c = a.cast<double>() + t * (b.cast<double>() - a.cast<double>());
  return c.array().round().cwiseMax(0.0).cwiseMin(255.0).cast<unsigned char>().matrix();
}

// Unit vector from a surface point toward the light.
const Vec3 kToLight = Vec3(0.3, -0.5, -1.0).normalized();

std::mt19937_64 frame_rng(std::uint64_t seed, int frame_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame_index)};
  return std::mt19937_64(seq);
}

std::string stamp(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

void Scene::validate() const {
  if (primitives.empty()) throw std::invalid_argument("scene has no primitives");
  if (classes.empty()) throw std::invalid_argument("scene has no classes");
  for (const auto& p : primitives) {
    std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            if (!s.center.allFinite() || !(s.radius > 0)) throw std::invalid_argument("invalid sphere");
          } else if constexpr (std::is_same_v<T, Plane>) {
            if (!s.point.allFinite() || !(s.normal.norm() > 0) || !(s.extent > 0))
              throw std::invalid_argument("invalid plane");
          } else {
            if (!s.center.allFinite() || !(s.half_extents.minCoeff() > 0)) throw std::invalid_argument("invalid box");
          }
        },
        p.shape);
    if (p.class_id < 0 || p.class_id >= static_cast<int>(classes.size()))
      throw std::invalid_argument("primitive class_id outside the class list");
    if (p.instance_id < 0) throw std::invalid_argument("negative instance id");
  }
}

Vec3 closest_point(const Shape& shape, const Vec3& p) {
  return std::visit(
      [&](const auto& s) -> Vec3 {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          const Vec3 d = p - s.center;
          const double n = d.norm();
          return n > 0 ? Vec3(s.center + d * (s.radius / n)) : Vec3(s.center + Vec3::UnitZ() * s.radius);
        } else if constexpr (std::is_same_v<T, Plane>) {
          const Vec3 n = s.normal.normalized();
          const auto ax = plane_axes(n);
          const Vec3 d = p - s.point;
          const double a = std::clamp(ax.u.dot(d), -s.extent, s.extent);
          const double b = std::clamp(ax.v.dot(d), -s.extent, s.extent);
          return s.point + a * ax.u + b * ax.v;
        } else {
          const Vec3 lo = s.center - s.half_extents, hi = s.center + s.half_extents;
          const Vec3 c = p.cwiseMax(lo).cwiseMin(hi);
          if (c != p) return c;  // outside: the clamped point lies on the surface
          // inside: push to the nearest face
          int axis = 0;
          bool upper = false;
          double best = std::numeric_limits<double>::infinity();
          for (int i = 0; i < 3; ++i) {
            if (p[i] - lo[i] < best) best = p[i] - lo[i], axis = i, upper = false;
            if (hi[i] - p[i] < best) best = hi[i] - p[i], axis = i, upper = true;
          }
          Vec3 q = p;
          q[axis] = upper ? hi[axis] : lo[axis];
          return q;
        }
      },
      shape);
}

std::optional<Hit> raycast(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    auto h = std::visit([&](const auto& s) { return intersect(s, origin, dir); }, scene.primitives[i].shape);
    if (h && (!best || h->t < best->t)) {
      h->primitive = static_cast<int>(i);
      best = h;
    }
  }
  if (best && best->normal.dot(dir) > 0) best->normal = -best->normal;
  return best;
}

Rgb shade(const ScenePrimitive& prim, const Vec3& point, const Vec3& normal) {
  Rgb albedo;
  if (const auto* c = std::get_if<Rgb>(&prim.albedo)) {
    albedo = *c;
  } else {
    const auto& ck = std::get<Checker>(prim.albedo);
    double s;
    if (const auto* pl = std::get_if<Plane>(&prim.shape)) {
      const auto ax = plane_axes(pl->normal.normalized());
      const Vec3 r = point - pl->point;
      s = smooth_square(ax.u.dot(r), ck.period) * smooth_square(ax.v.dot(r), ck.period);
    } else {
      // Offset keeps the zero crossings away from axis-aligned symmetry planes.
      const Vec3 r = point + Vec3::Constant(0.25 * ck.period);
      s = smooth_square(r.x(), ck.period) * smooth_square(r.y(), ck.period) * smooth_square(r.z(), ck.period);
    }
    albedo = mix(ck.a, ck.b, 0.5 * (1.0 + s));
  }
  const double lambert = 0.35 + 0.65 * std::max(0.0, normal.dot(kToLight));
  return mix(Rgb::Zero(), albedo, lambert);
}

Image<int> chessboard_distance(const MaskImage& mask, bool inside) {
  const int w = mask.width(), h = mask.height();
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  Image<int> d(w, h, kInf);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool in = mask[i] != 0;
    if (in != inside) d[i] = 0;
  }
  auto relax = [&](int x, int y, int nx, int ny) {
    if (d.contains(nx, ny)) d(x, y) = std::min(d(x, y), d(nx, ny) + 1);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      relax(x, y, x - 1, y);
      relax(x, y, x - 1, y - 1);
      relax(x, y, x, y - 1);
      relax(x, y, x + 1, y - 1);
    }
  for (int y = h - 1; y >= 0; --y)
    for (int x = w - 1; x >= 0; --x) {
      relax(x, y, x + 1, y);
      relax(x, y, x + 1, y + 1);
      relax(x, y, x, y + 1);
      relax(x, y, x - 1, y + 1);
    }
  return d;
}

MaskImage erode(const MaskImage& mask, int px) {
  if (px <= 0) return mask;
  const auto d = chessboard_distance(mask, true);
  MaskImage out(mask.width(), mask.height(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] && d[i] > px ? 1 : 0;
  return out;
}

MaskImage dilate(const MaskImage& mask, int px) {
  if (px <= 0) return mask;
  const auto d = chessboard_distance(mask, false);
  MaskImage out(mask.width(), mask.height(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] || d[i] <= px ? 1 : 0;
  return out;
}

RenderedFrame render_frame(const Scene& scene, const Pose& pose, const Intrinsics& K,
                           const NoiseSpec& noise, int frame_index) {
  scene.validate();
  K.validate();
  const int w = K.width, h = K.height;
  RenderedFrame out;
  out.frame.depth = DepthImage(w, h, 0.0);
  out.frame.color = ColorImage(w, h, Rgb::Zero());
  out.true_instances = LabelImage(w, h, 0);
  auto rng = frame_rng(noise.seed, frame_index);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image<Eigen::Vector3d> radiance(w, h, Eigen::Vector3d::Zero());

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 dir_cam((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const auto hit = raycast(scene, pose.translation(), pose.rotation() * dir_cam);
      if (!hit) continue;
      double z = hit->t;
      if (noise.sigma0 > 0) z += noise.sigma0 * z * z * gauss(rng);
      if (!(z > 0 && z < kDefaultDepthMax)) continue;
      const auto& prim = scene.primitives[hit->primitive];
      out.frame.depth(x, y) = z;
      out.true_instances(x, y) = prim.instance_id;
      // Colour integrates over the pixel (3x3 box filter) and is blurred
      // below; depth and labels come from the centre ray.
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      int n = 0;
      for (int sy = -1; sy <= 1; ++sy)
        for (int sx = -1; sx <= 1; ++sx) {
          if (sx == 0 && sy == 0) {
            acc += shade(prim, hit->point, hit->normal).cast<double>();
            ++n;
            continue;
          }
          const Vec3 d((x + sx / 3.0 - K.cx) / K.fx, (y + sy / 3.0 - K.cy) / K.fy, 1.0);
          const auto sub = raycast(scene, pose.translation(), pose.rotation() * d);
          if (!sub) continue;
          acc += shade(scene.primitives[sub->primitive], sub->point, sub->normal).cast<double>();
          ++n;
        }
      radiance(x, y) = acc / n;
    }
  }

  // Lens blur: separable [1 2 1] / 4, edges clamped.
  Image<Eigen::Vector3d> tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      tmp(x, y) = 0.25 * radiance(std::max(x - 1, 0), y) + 0.5 * radiance(x, y) + 0.25 * radiance(std::min(x + 1, w - 1), y);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d c =
          0.25 * tmp(x, std::max(y - 1, 0)) + 0.5 * tmp(x, y) + 0.25 * tmp(x, std::min(y + 1, h - 1));
      out.frame.color(x, y) = c.array().round().cwiseMax(0.0).cwiseMin(255.0).cast<unsigned char>().matrix();
    }

  // Ground-truth masks per instance, then the configured corruption.
  std::map<int, int> instance_class;
  for (const auto& p : scene.primitives)
    if (p.instance_id > 0) instance_class[p.instance_id] = p.class_id;
  MaskImage truth_union(w, h, 0);
  std::vector<InstanceMask> masks;
  const std::size_t L = scene.classes.size();
  for (const auto& [id, cls] : instance_class) {
    MaskImage m(w, h, 0);
    bool any = false;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (out.true_instances[i] == id) {
        m[i] = 1;
        truth_union[i] = 1;
        any = true;
      }
    if (!any) continue;
    m = dilate(erode(m, noise.mask_erode_px), noise.mask_dilate_px);
    InstanceMask im;
    im.mask = std::move(m);
    if (L == 1) {
      im.class_probs = {1.0};
    } else {
      im.class_probs.assign(L, (1.0 - noise.class_confidence) / static_cast<double>(L - 1));
      im.class_probs[cls] = noise.class_confidence;
    }
    if (im.area() > 0) masks.push_back(std::move(im));
  }
  masks = resolve_overlaps(std::move(masks));

  MaskImage final_union(w, h, 0);
  for (const auto& m : masks)
    for (std::size_t i = 0; i < m.mask.size(); ++i)
      if (m.mask[i]) final_union[i] = 1;
  const auto d_in = chessboard_distance(final_union, true);
  const auto d_out = chessboard_distance(truth_union, false);
  Image<double> soft(w, h, 0.0);
  const bool any_truth = std::any_of(truth_union.pixels().begin(), truth_union.pixels().end(),
                                     [](unsigned char v) { return v != 0; });
  for (std::size_t i = 0; i < soft.size(); ++i) {
    if (final_union[i]) {
      soft[i] = 1.0 - 0.5 * std::exp(-(d_in[i] - 1) / 2.0);
    } else if (truth_union[i]) {
      soft[i] = noise.band_prob;
    } else if (any_truth) {
      soft[i] = 0.4 * std::exp(-(d_out[i] - 1) / 3.0);
    }
  }

  out.segmentation.masks = std::move(masks);
  out.segmentation.soft_prob = std::move(soft);
  out.segmentation.omega_rgb = noise.omega_rgb;
  out.segmentation.classes = scene.classes;
  out.frame.timestamp = 0;
  return out;
}

void TrajectorySpec::validate() const {
  if (keyposes.size() < 2) throw std::invalid_argument("trajectory needs at least two keyposes");
  for (std::size_t i = 1; i < keyposes.size(); ++i)
    if (!(keyposes[i].timestamp > keyposes[i - 1].timestamp))
      throw std::invalid_argument("keypose times must be strictly increasing");
}

Pose TrajectorySpec::sample(double time) const {
  validate();
  if (time <= keyposes.front().timestamp) return keyposes.front().pose;
  if (time >= keyposes.back().timestamp) return keyposes.back().pose;
  auto it = std::upper_bound(keyposes.begin(), keyposes.end(), time,
                             [](double t, const TimedPose& k) { return t < k.timestamp; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double alpha = (time - a.timestamp) / (b.timestamp - a.timestamp);
  if (alpha == 0.0) return a.pose;
  const Eigen::Quaterniond q = a.pose.quaternion().slerp(alpha, b.pose.quaternion());
  const Vec3 t = (1 - alpha) * a.pose.translation() + alpha * b.pose.translation();
  return Pose::from_quaternion(q, t);
}

TrajectorySpec TrajectorySpec::constant_velocity(const Pose& start, const Pose& step, int frames,
                                                 double frame_interval, double t0) {
  TrajectorySpec spec;
  Pose p = start;
  for (int i = 0; i < std::max(frames, 2); ++i) {
    spec.keyposes.push_back({t0 + i * frame_interval, p});
    p = (p * step).renormalized();
  }
  return spec;
}

Pose TrajectorySpec::body_step(const Vec3& direction, double translation, const Vec3& axis, double degrees) {
  const Eigen::AngleAxisd aa(degrees * std::numbers::pi / 180.0, axis.normalized());
  return Pose(aa.toRotationMatrix(), direction.normalized() * translation).renormalized();
}

Trajectory render_sequence(const Scene& scene, const TrajectorySpec& traj, const Intrinsics& K,
                           int frame_count, const NoiseSpec& noise, const fs::path& out_dir,
                           const SequenceOptions& opts) {
  if (frame_count < 1) throw std::invalid_argument("frame_count must be at least 1");
  traj.validate();
  fs::create_directories(out_dir / "rgb");
  fs::create_directories(out_dir / "depth");
  fs::create_directories(out_dir / "truth");
  std::ofstream rgb_list(out_dir / "rgb.txt"), depth_list(out_dir / "depth.txt");
  if (!rgb_list || !depth_list) throw IoError("cannot write sequence lists under " + out_dir.string());
  rgb_list << "# color images\n# timestamp filename\n";
  depth_list << "# depth maps\n# timestamp filename\n";

  Trajectory gt;
  const double t0 = traj.keyposes.front().timestamp;
  for (int i = 0; i < frame_count; ++i) {
    const double t = t0 + i * opts.frame_interval;
    const Pose pose = traj.sample(t);
    auto r = render_frame(scene, pose, K, noise, i);
    const std::string id = stamp(t);
    write_color_png(r.frame.color, out_dir / "rgb" / (id + ".png"));
    write_depth_png(r.frame.depth, out_dir / "depth" / (id + ".png"));
    write_label_png(r.true_instances, out_dir / "truth" / (id + ".png"));
    save_segmentation(r.segmentation, out_dir / "seg" / id);
    rgb_list << id << " rgb/" << id << ".png\n";
    depth_list << id << " depth/" << id << ".png\n";
    gt.push_back({std::stod(id), pose});
  }
  write_trajectory(gt, out_dir / "groundtruth.txt");
  write_camera(K, out_dir / "camera.txt");
  write_scene(scene, out_dir / "scene.json");
  return gt;
}

void write_scene(const Scene& scene, const fs::path& path) {
  nlohmann::json j;
  j["classes"] = scene.classes;
  j["primitives"] = nlohmann::json::array();
  for (const auto& p : scene.primitives) {
    nlohmann::json jp;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Sphere>) {
            jp["type"] = "sphere";
            jp["center"] = vec_json(s.center);
            jp["radius"] = s.radius;
          } else if constexpr (std::is_same_v<T, Plane>) {
            jp["type"] = "plane";
            jp["point"] = vec_json(s.point);
            jp["normal"] = vec_json(s.normal);
            jp["extent"] = s.extent;
          } else {
            jp["type"] = "box";
            jp["center"] = vec_json(s.center);
            jp["half_extents"] = vec_json(s.half_extents);
          }
        },
        p.shape);
    if (const auto* c = std::get_if<Rgb>(&p.albedo)) {
      jp["albedo"] = {(*c)[0], (*c)[1], (*c)[2]};
    } else {
      const auto& ck = std::get<Checker>(p.albedo);
      jp["checker"] = {{"a", {ck.a[0], ck.a[1], ck.a[2]}}, {"b", {ck.b[0], ck.b[1], ck.b[2]}}, {"period", ck.period}};
    }
    jp["instance_id"] = p.instance_id;
    jp["class_id"] = p.class_id;
    j["primitives"].push_back(jp);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Scene read_scene(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open " + path.string());
  Scene scene;
  try {
    nlohmann::json j;
    in >> j;
    scene.classes = j.at("classes").get<std::vector<std::string>>();
    auto rgb = [](const nlohmann::json& a) {
      return Rgb(a.at(0).get<unsigned char>(), a.at(1).get<unsigned char>(), a.at(2).get<unsigned char>());
    };
    for (const auto& jp : j.at("primitives")) {
      ScenePrimitive p;
      const auto type = jp.at("type").get<std::string>();
      if (type == "sphere") {
        p.shape = Sphere{json_vec(jp.at("center")), jp.at("radius").get<double>()};
      } else if (type == "plane") {
        p.shape = Plane{json_vec(jp.at("point")), json_vec(jp.at("normal")), jp.at("extent").get<double>()};
      } else if (type == "box") {
        p.shape = Box{json_vec(jp.at("center")), json_vec(jp.at("half_extents"))};
      } else {
        throw ParseError(path.string(), 1, "unknown primitive type " + type);
      }
      if (jp.contains("checker")) {
        const auto& c = jp.at("checker");
        p.albedo = Checker{rgb(c.at("a")), rgb(c.at("b")), c.at("period").get<double>()};
      } else {
        p.albedo = rgb(jp.at("albedo"));
      }
      p.instance_id = jp.at("instance_id").get<int>();
      p.class_id = jp.at("class_id").get<int>();
      scene.primitives.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  scene.validate();
  return scene;
}

void write_camera(const Intrinsics& K, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %d %d\n", K.fx, K.fy, K.cx, K.cy, K.width, K.height);
  out << "# fx fy cx cy width height\n" << buf;
}

Intrinsics read_camera(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Intrinsics K;
    if (!(ss >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height))
      throw ParseError(path.string(), lineno, "expected 'fx fy cx cy width height'");
    K.validate();
    return K;
  }
  throw ParseError(path.string(), lineno, "no camera line");
}

Scene textured_plane_with_spheres() {
  Scene s;
  s.classes = {"background", "sports_ball", "bowl"};
  s.primitives.push_back({Plane{{0, 0, 2.0}, {0, 0, -1}, 3.0}, Checker{{50, 60, 70}, {230, 220, 200}, 0.15}, 0, 0});
  s.primitives.push_back({Sphere{{-0.25, 0.05, 1.4}, 0.18}, Rgb{210, 70, 50}, 1, 1});
  s.primitives.push_back({Sphere{{0.3, -0.1, 1.55}, 0.2}, Checker{{30, 90, 200}, {200, 220, 120}, 0.08}, 2, 2});
  return s;
}

Scene textureless_wall() {
  Scene s;
  s.classes = {"background"};
  s.primitives.push_back({Plane{{0, 0, 1.5}, {0, 0, -1}, 4.0}, Checker{{40, 40, 40}, {220, 220, 220}, 0.12}, 0, 0});
  return s;
}

Scene colorless_structured() {
  Scene s;
  s.classes = {"background", "ball", "box"};
  const Rgb grey{160, 160, 160};
  s.primitives.push_back({Plane{{0, 0, 2.2}, {0, 0, -1}, 3.0}, grey, 0, 0});
  s.primitives.push_back({Sphere{{-0.3, 0.1, 1.5}, 0.2}, grey, 1, 1});
  s.primitives.push_back({Sphere{{0.35, 0.2, 1.7}, 0.15}, grey, 2, 1});
  s.primitives.push_back({Box{{0.05, -0.3, 1.6}, {0.15, 0.1, 0.12}}, grey, 3, 2});
  s.primitives.push_back({Box{{-0.45, -0.35, 1.9}, {0.1, 0.15, 0.1}}, grey, 4, 2});
  return s;
}

Scene objects_on_plane() {
  Scene s;
  s.classes = {"background", "sports_ball", "orange"};
  s.primitives.push_back({Plane{{0, 0, 1.5}, {0, 0, -1}, 3.0}, Checker{{60, 60, 60}, {200, 200, 200}, 0.12}, 0, 0});
  s.primitives.push_back({Sphere{{-0.2, 0.0, 1.1}, 0.15}, Rgb{210, 60, 40}, 1, 1});
  s.primitives.push_back({Sphere{{0.22, 0.05, 1.2}, 0.15}, Rgb{230, 150, 30}, 2, 2});
  return s;
}

Intrinsics default_intrinsics(int width, int height) {
  const double f = 525.0 * width / 640.0;
  return {f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
}

}  // namespace semfusion::synth
